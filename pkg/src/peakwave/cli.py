"""Command-line entry point.

Exit codes: 0 success, 1 invalid configuration, 2 computation aborted,
3 completed but some rows or checks failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import PeakwaveError
from .output import write_csv, write_json
from .waveprofile import C_STAR

EXIT_OK, EXIT_INVALID, EXIT_ABORTED, EXIT_PARTIAL = 0, 1, 2, 3
COMMANDS = ("profile", "sweep", "spectrum", "peaked-spectrum", "strip", "evolve", "verify")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    c: float = 1.03
    c_list: tuple[float, ...] = (1.01, 1.03, 1.05, 1.07, 1.09)
    n_half: int = 300
    n_list: tuple[int, ...] = (100, 200, 300)
    tol: float = 1e-14
    method: str = "fd"
    t_end: float = 30.0
    dt: float = 2e-3
    delta: float = 1e-2
    labels: int = 513
    lambdas: tuple[complex, ...] = (0j, 0.1, 0.3, 0.2 + 2j, 0.7 + 3j, math.pi / 4, 1.0, 2.0)
    out_dir: str = "out"
    jobs: int = 1
    plot: bool = False
    include_peaked: bool = False
    dump_matrices: bool = False

    def validate(self) -> None:
        problems = []
        if self.command not in COMMANDS:
            problems.append(f"command: unknown {self.command!r}")
        if self.n_half < 8:
            problems.append(f"n_half: must be >= 8, got {self.n_half}")
        if any(n < 8 for n in self.n_list):
            problems.append("n_list: every entry must be >= 8")
        for name, cs in (("c", (self.c,)), ("c_list", self.c_list)):
            for c in cs:
                if not (1.0 < c <= C_STAR):
                    problems.append(f"{name}: {c!r} outside (1, c_star = {C_STAR:.6f}]")
        if self.command in ("profile", "sweep", "spectrum") and any(
                c >= C_STAR for c in ((self.c,) if self.command == "profile" else self.c_list)):
            problems.append("c: smooth profiles need c < c_star")
        if not self.tol > 0:
            problems.append(f"tol: must be positive, got {self.tol!r}")
        if not self.dt > 0:
            problems.append(f"dt: must be positive, got {self.dt!r}")
        if not self.t_end > 0:
            problems.append(f"t_end: must be positive, got {self.t_end!r}")
        if not 0 < self.delta < 1:
            problems.append(f"delta: must lie in (0, 1), got {self.delta!r}")
        if self.labels < 16:
            problems.append(f"labels: must be >= 16, got {self.labels}")
        if self.method not in ("fd", "fourier", "both"):
            problems.append(f"method: must be fd, fourier or both, got {self.method!r}")
        if self.jobs < 1:
            problems.append(f"jobs: must be >= 1, got {self.jobs}")
        if problems:
            raise ConfigError("; ".join(problems))

    def hashable(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out_dir")
        d.pop("jobs")  # worker count does not change results
        d["lambdas"] = [[z.real, z.imag] for z in self.lambdas]
        return d


# ---------------------------------------------------------------- parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _complexes(text: str) -> tuple[complex, ...]:
    try:
        return tuple(complex(t.strip().replace(" ", "")) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


_FLAG_FIELDS = {
    "c": "c", "c_list": "c_list", "n": "n_half", "n_list": "n_list", "tol": "tol",
    "method": "method", "t_end": "t_end", "dt": "dt", "delta": "delta", "labels": "labels",
    "lambdas": "lambdas", "out": "out_dir", "jobs": "jobs", "plot": "plot",
    "include_peaked": "include_peaked", "dump_matrices": "dump_matrices",
}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--c", type=float, help="wave speed")
    common.add_argument("--c-list", type=_floats, help="comma-separated wave speeds")
    common.add_argument("--n", type=int, help="grid half-size N (h = pi/N)")
    common.add_argument("--n-list", type=_ints, help="comma-separated N values")
    common.add_argument("--tol", type=float, help="Newton tolerance")
    common.add_argument("--method", choices=("fd", "fourier", "both"))
    common.add_argument("--t-end", type=float)
    common.add_argument("--dt", type=float)
    common.add_argument("--delta", type=float, help="initial perturbation size")
    common.add_argument("--labels", type=int, help="number of characteristic labels")
    common.add_argument("--lambdas", type=_complexes, help="comma-separated complex samples, e.g. 0.1,0.2+2j")
    common.add_argument("--out", help="output directory (env PEAKWAVE_OUT if unset)")
    common.add_argument("--config", help="JSON file with default field values")
    common.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")
    common.add_argument("--plot", action="store_true", default=None, help="also write SVG figures")
    common.add_argument("--include-peaked", action="store_true", default=None)
    common.add_argument("--dump-matrices", action="store_true", default=None)

    parser = _Parser(prog="peakwave", description="Traveling waves, Hessian spectra and peaked-wave instability.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "profile": "smooth profile on the grid",
        "sweep": "amplitude versus speed",
        "spectrum": "lowest Hessian eigenvalues across speeds",
        "peaked-spectrum": "Hessian eigenvalues at the peaked wave for several N",
        "strip": "classify and certify spectral samples of the peaked operator",
        "evolve": "nonlinear instability experiment",
        "verify": "run every acceptance check",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def resolve_config(argv: Sequence[str], env=None) -> RunConfig:
    """Flags override the config file, which overrides defaults.

    The output directory is taken from --out, else PEAKWAVE_OUT, else the
    config file, else the default.
    """
    env = os.environ if env is None else env
    args = build_parser().parse_args(list(argv))
    values: dict = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config: top level must be an object")
        names = {f.name for f in dataclasses.fields(RunConfig)} - {"command"}
        for key, val in loaded.items():
            key = _FLAG_FIELDS.get(key.replace("-", "_"), key.replace("-", "_"))
            if key not in names:
                raise ConfigError(f"config: unknown field {key!r}")
            if key in ("c_list", "n_list") and isinstance(val, list):
                val = tuple(val)
            if key == "lambdas":
                val = tuple(complex(*v) if isinstance(v, list) else complex(v) for v in val)
            values[key] = val
    if env.get("PEAKWAVE_OUT"):
        values["out_dir"] = env["PEAKWAVE_OUT"]
    for flag, name in _FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[name] = v
    values.setdefault("jobs", os.cpu_count() or 1)
    try:
        cfg = RunConfig(command=args.command, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


# ---------------------------------------------------------------- commands


def _say(path: Path, rows: int | None = None) -> None:
    extra = f" ({rows} rows)" if rows is not None else ""
    print(f"wrote {path}{extra}")


def _cmd_profile(cfg: RunConfig, out: Path) -> int:
    from .waveprofile import Grid, check_residuals, smooth_profile

    prof = smooth_profile(cfg.c, Grid(cfg.n_half), cfg.tol)
    rows = list(zip(prof.grid.nodes, prof.values, prof.slope))
    path = out / "profile.csv"
    _say(path, write_csv(path, ("x", "eta", "slope"), rows, cfg.hashable()))
    first, zero_mean = check_residuals(prof)
    write_json(out / "profile.json", {
        "c": cfg.c, "energy": prof.params.energy, "amplitude": prof.params.amplitude,
        "max_newton_residual": prof.newton_residual, "first_integral_residual": first,
        "zero_mean_residual": zero_mean}, cfg.hashable())
    _say(out / "profile.json")
    if cfg.plot:
        from .plotting import Series, line_figure

        _say(line_figure(out / "profile.svg", [Series(prof.grid.nodes, prof.values, f"c = {cfg.c}")],
                         xlabel="x", ylabel="eta"))
    return EXIT_OK


def _cmd_sweep(cfg: RunConfig, out: Path) -> int:
    from .waveprofile import Grid, amplitude_sweep

    rows = amplitude_sweep(cfg.c_list, Grid(cfg.n_half), jobs=cfg.jobs)
    path = out / "sweep.csv"
    _say(path, write_csv(path, ("c", "energy", "amplitude", "kind", "error"),
                         [(r.c, r.energy, r.amplitude, r.kind, r.error) for r in rows], cfg.hashable()))
    if cfg.plot:
        from .plotting import Series, line_figure

        ok = [r for r in rows if r.error is None]
        _say(line_figure(out / "amplitude.svg", [Series([r.c for r in ok], [r.amplitude for r in ok], "", "o-")],
                         xlabel="c", ylabel="max eta", vlines=[C_STAR]))
    return EXIT_PARTIAL if any(r.error for r in rows) else EXIT_OK


def _cmd_spectrum(cfg: RunConfig, out: Path) -> int:
    from .hessian import assemble_L_fd, assemble_L_fourier, eigen_sweep, fourier_constant_check, write_matrix
    from .waveprofile import Grid, dft, smooth_profile

    grid = Grid(cfg.n_half)
    rows = eigen_sweep(cfg.c_list, grid, cfg.method, include_peaked=cfg.include_peaked, jobs=cfg.jobs)
    table = []
    for r in rows:
        if r.error:
            table.append((r.c, r.method, "", "", "", "", "", r.cross_method_gap, r.grey_zone, r.error))
            continue
        for k, (lam, par, res) in enumerate(zip(r.eigenvalues, r.parities, r.residuals), start=1):
            table.append((r.c, r.method, k, lam.real, lam.imag, par, res, r.cross_method_gap, r.grey_zone, ""))
    path = out / "spectrum.csv"
    header = ("c", "method", "k", "lambda_re", "lambda_im", "parity", "residual",
              "cross_method_gap", "grey_zone", "error")
    _say(path, write_csv(path, header, table, cfg.hashable()))
    if cfg.method in ("fourier", "both"):
        check = fourier_constant_check(cfg.c_list[0], grid)
        write_json(out / "fourier_constant.json", check, cfg.hashable())
        _say(out / "fourier_constant.json")
        print(f"identity coefficient -1: max deviation from FD {check['max_dev_minus_identity']:.3e}; "
              f"-pi: {check['max_dev_minus_pi_identity']:.3e}")
    if cfg.dump_matrices:
        for c in cfg.c_list:
            prof = smooth_profile(c, grid)
            if cfg.method in ("fd", "both"):
                write_matrix(out / f"L_fd_c{c}.txt", assemble_L_fd(prof))
            if cfg.method in ("fourier", "both"):
                write_matrix(out / f"L_fourier_c{c}.txt", assemble_L_fourier(dft(prof.periodic_values), c))
    if cfg.plot:
        from .plotting import Series, line_figure

        series = []
        for method in ("fd", "fourier"):
            good = [r for r in rows if r.method == method and not r.error]
            for k in range(4):
                if good:
                    series.append(Series([r.c for r in good], [r.eigenvalues[k].real for r in good],
                                         f"{method} lambda{k + 1}", "o-" if method == "fd" else "x--"))
        _say(line_figure(out / "spectrum.svg", series, xlabel="c", ylabel="eigenvalue"))
    return EXIT_PARTIAL if any(r.error for r in rows) else EXIT_OK


def _cmd_peaked_spectrum(cfg: RunConfig, out: Path) -> int:
    from .hessian import assemble_L_peaked, eig
    from .waveprofile import Grid

    methods = ("fd", "fourier") if cfg.method == "both" else (cfg.method,)
    table = []
    for n in cfg.n_list:
        for method in methods:
            spec = eig(assemble_L_peaked(Grid(n), method))
            for k in range(4):
                lam = complex(spec.eigenvalues[k])
                table.append((n, method, k + 1, lam.real, lam.imag, spec.parities[k], spec.residuals[k]))
    path = out / "peaked_spectrum.csv"
    _say(path, write_csv(path, ("n_half", "method", "k", "lambda_re", "lambda_im", "parity", "residual"),
                         table, cfg.hashable()))
    return EXIT_OK


def _cmd_strip(cfg: RunConfig, out: Path) -> int:
    from .peakedops import STRIP_HALF_WIDTH, discrete_spectrum_extent, strip_report
    from .waveprofile import Grid

    rows, verdict = strip_report(Grid(cfg.n_half), cfg.lambdas, jobs=cfg.jobs)
    path = out / "strip.csv"
    _say(path, write_csv(path, ("lambda_re", "lambda_im", "class", "residual_or_ratio", "status"),
                         [(r.lam.real, r.lam.imag, r.classification, r.value, r.status) for r in rows],
                         cfg.hashable()))
    print(f"strip verdict: {'every tested sample certified' if verdict else 'some samples failed'}")
    extent_n = min(cfg.n_half, 512)  # dense eigensolve cost
    write_json(out / "strip.json", {
        "verdict": verdict, "n_half": cfg.n_half,
        "discrete_max_abs_re": discrete_spectrum_extent(extent_n), "discrete_extent_n_half": extent_n,
        "strip_half_width": STRIP_HALF_WIDTH}, cfg.hashable())
    _say(out / "strip.json")
    if cfg.plot:
        from .plotting import Series, scatter_figure

        groups = {}
        for r in rows:
            groups.setdefault(r.classification, ([], []))
            groups[r.classification][0].append(r.lam.real)
            groups[r.classification][1].append(r.lam.imag)
        _say(scatter_figure(out / "strip.svg", [Series(x, y, k) for k, (x, y) in sorted(groups.items())],
                            xlabel="Re lambda", ylabel="Im lambda",
                            vlines=[-STRIP_HALF_WIDTH, STRIP_HALF_WIDTH]))
    return EXIT_OK if verdict else EXIT_PARTIAL


def _cmd_evolve(cfg: RunConfig, out: Path) -> int:
    from .chareval import instability_experiment

    res = instability_experiment(cfg.delta, cfg.t_end, cfg.dt, cfg.labels)
    tr = res.trajectory
    rows = [(t, v, c.mass_zeta, c.blowup_invariant, vm, gap, w1, h1)
            for t, v, c, vm, gap, w1, h1 in zip(tr.times, tr.peak_slope, tr.conserved, tr.max_abs_slope,
                                                tr.min_spacing, tr.w1inf_norm, tr.h1_norm)]
    path = out / "evolve.csv"
    header = ("t", "V0", "mass_zeta", "blowup_invariant", "max_abs_V", "min_spacing", "w1inf_norm", "h1_norm")
    _say(path, write_csv(path, header, rows, cfg.hashable()))
    write_json(out / "experiment.json", {
        "delta": cfg.delta, "fitted_rate": res.fitted_rate, "theory_rate": res.theory_rate,
        "relative_error": res.relative_error, "blowup_time": res.blowup_time,
        "time_to_ten_delta": res.time_to_ten_delta, "breaking_time": tr.breaking_time,
        "breaking_reason": tr.breaking_reason, "mass_drift": tr.drift("mass_zeta"),
        "invariant_drift": tr.drift("blowup_invariant")}, cfg.hashable())
    _say(out / "experiment.json")
    if cfg.plot:
        from .plotting import Series, line_figure

        _say(line_figure(out / "evolve.svg", [
            Series(tr.times, np.abs(tr.peak_slope), "|V0|"),
            Series(tr.times, abs(tr.peak_slope[0]) * np.exp(res.theory_rate * tr.times), "linear rate", "--"),
            Series(tr.times, tr.w1inf_norm, "W1,inf norm", ":")], xlabel="t", logy=True))
    return EXIT_OK


def _cmd_verify(cfg: RunConfig, out: Path) -> int:
    from .verify import run_all

    results = run_all()
    rows = []
    for res, timing in results:
        status = "pass" if res.passed else "FAIL"
        print(f"[{status}] criterion {res.number}: {res.name}")
        for key, val in timing.items():
            print(f"        {key}: {val:.2f} s")
        rows.append((res.number, res.name, status, res.detail))
    path = out / "verify.csv"
    _say(path, write_csv(path, ("criterion", "name", "status", "detail"), rows, cfg.hashable()))
    write_json(out / "verify.json", {
        str(res.number): {"name": res.name, "passed": res.passed, "measured": res.measured,
                          "detail": res.detail} for res, _ in results}, cfg.hashable())
    _say(out / "verify.json")
    if cfg.plot:
        _verify_figures(out)
    return EXIT_OK if all(r.passed for r, _ in results) else EXIT_PARTIAL


def _verify_figures(out: Path) -> None:
    from .plotting import Series, line_figure
    from .waveprofile import Grid, dft, peaked_profile

    coeffs = dft(peaked_profile(Grid(300)).periodic_values)
    m = np.arange(1, 301)
    _say(line_figure(out / "peaked_fourier.svg", [
        Series(m, np.abs(coeffs.coeffs[300 + m]), "|coefficient|"),
        Series(m, 1.0 / (4.0 * m**2), "1/(4 m^2)", "--")], xlabel="m", logy=True))


_DISPATCH = {
    "profile": _cmd_profile, "sweep": _cmd_sweep, "spectrum": _cmd_spectrum,
    "peaked-spectrum": _cmd_peaked_spectrum, "strip": _cmd_strip, "evolve": _cmd_evolve,
    "verify": _cmd_verify,
}


def run(cfg: RunConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _DISPATCH[cfg.command](cfg, out)
    except (PeakwaveError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"aborted: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ABORTED


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return run(cfg)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
