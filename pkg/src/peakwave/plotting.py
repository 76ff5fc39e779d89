"""Static SVG figures rendered with matplotlib's Agg backend.

Output is byte-stable across runs: the SVG id salt is fixed and the date
metadata is omitted.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .output import atomic_write_text  # noqa: E402

__all__ = ["Series", "line_figure", "scatter_figure"]

_STYLE = {
    "svg.hashsalt": "peakwave",
    "svg.fonttype": "none",
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
}


@dataclass
class Series:
    x: Sequence[float]
    y: Sequence[float]
    label: str = ""
    style: str = "-"


def _save(fig, path) -> Path:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return atomic_write_text(path, buf.getvalue())


def line_figure(
    path, series: Sequence[Series], *, xlabel: str = "", ylabel: str = "",
    title: str = "", logy: bool = False, vlines: Sequence[float] = (),
) -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for s in series:
            ax.plot(s.x, s.y, s.style, label=s.label or None)
        for v in vlines:
            ax.axvline(v, linestyle="--", color="0.4")
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if any(s.label for s in series):
            ax.legend()
        fig.tight_layout()
        return _save(fig, path)


def scatter_figure(path, points: Sequence[Series], *, xlabel="", ylabel="", title="",
                   vlines: Sequence[float] = ()) -> Path:
    return line_figure(path, [Series(p.x, p.y, p.label, p.style or "o") for p in points],
                       xlabel=xlabel, ylabel=ylabel, title=title, vlines=vlines)
