"""Hessian operator of a traveling wave and its low-lying spectrum.

The operator is L = -d/dx (c^2 - 2 eta) d/dx + (2 eta'' - 1) on 2*pi-periodic
functions. Two discretizations are provided:

* a three-point finite-difference stencil on the 2N periodic nodes, giving a
  real symmetric matrix;
* Fourier collocation on modes -N..N, with multiplication by eta realized as
  a banded Toeplitz convolution.

For the peaked wave the curvature contains a Dirac mass at the crest; the
finite-difference version smooths it into a narrow Gaussian and the Fourier
version uses its (flat) band-limited coefficients.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DegenerateCoefficientError, DomainError
from .waveprofile import (
    C_STAR,
    ENERGY_STAR,
    FourierCoeffs,
    Grid,
    WaveProfile,
    dft,
    idft,
    peaked_profile,
    smooth_profile,
)

__all__ = [
    "OperatorMatrix",
    "Spectrum",
    "SpectrumRow",
    "assemble_L_fd",
    "assemble_L_fourier",
    "assemble_L_peaked",
    "eig",
    "eigen_sweep",
    "translation_residual",
    "fourier_constant_check",
    "write_matrix",
    "read_matrix",
    "DEFAULT_SWEEP",
]

DEFAULT_SWEEP = (1.01, 1.03, 1.05, 1.07, 1.09)
PARITY_THRESHOLD = 1e-6


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray
    basis: str
    symmetric: bool
    n_half: int
    note: str = ""

    def __post_init__(self):
        if self.basis not in ("physical", "fourier"):
            raise DomainError(f"basis must be physical or fourier, got {self.basis!r}")
        rows, cols = self.entries.shape
        if rows != cols:
            raise DomainError("operator matrix must be square")
        self.entries.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def reflection(self) -> np.ndarray:
        """Index permutation realizing x -> -x in this basis."""
        return _reflection_index(self.basis, self.dimension)


def _reflection_index(basis: str, dim: int) -> np.ndarray:
    k = np.arange(dim)
    if basis == "fourier":
        return k[::-1].copy()
    # node k carries x_{k-N}; x -> -x maps k to 2N - k (mod 2N)
    return (dim - k) % dim


# ---------------------------------------------------------------- assembly


def _fd_from_values(eta: np.ndarray, c: float, potential: np.ndarray, h: float) -> np.ndarray:
    c2 = c * c
    up = np.roll(eta, -1)
    down = np.roll(eta, 1)
    diag = (2.0 * c2 - 2.0 * eta - up - down) / (h * h) + potential
    off = -(c2 - eta - up) / (h * h)  # couples j and j+1
    M = len(eta)
    L = np.diag(diag)
    j = np.arange(M)
    L[j, (j + 1) % M] = off
    L[(j + 1) % M, j] = off
    return L


def assemble_L_fd(profile: WaveProfile) -> OperatorMatrix:
    """Periodic three-point discretization for a smooth profile."""
    if profile.kind != "smooth":
        raise DomainError("assemble_L_fd needs a smooth profile; use assemble_L_peaked")
    c = profile.params.c
    energy = profile.params.energy
    eta = np.asarray(profile.periodic_values, dtype=float)
    coef = c * c - 2.0 * eta
    if np.any(coef <= 0.0):
        j = int(np.argmin(coef))
        raise DegenerateCoefficientError(
            f"c^2 - 2 eta = {coef[j]:.3e} <= 0 at node {j - profile.grid.n_half}"
        )
    potential = (4.0 * energy + 2.0 * eta**2 - 2.0 * c * c * eta) / coef**2 - 1.0
    L = _fd_from_values(eta, c, potential, profile.grid.step)
    return OperatorMatrix(L, "physical", True, profile.grid.n_half)


def _toeplitz(coeffs: FourierCoeffs) -> np.ndarray:
    """Convolution matrix T[m, n] = coeff_{m-n} (zero when |m - n| > N)."""
    N = coeffs.n_half
    col = np.concatenate([coeffs.coeffs[N:], np.zeros(N, dtype=complex)])
    row = np.concatenate([coeffs.coeffs[N::-1], np.zeros(N, dtype=complex)])
    return scipy.linalg.toeplitz(col, row)


def _fourier_local_part(coeffs: FourierCoeffs, c: float) -> tuple[np.ndarray, np.ndarray]:
    n = coeffs.modes.astype(float)
    d1 = 1j * n
    d2 = -(n * n)
    slope_hat = FourierCoeffs(d1 * coeffs.coeffs)
    T_eta = _toeplitz(coeffs)
    T_slope = _toeplitz(slope_hat)
    L = 2.0 * T_slope * d1[None, :] - (c * c) * np.diag(d2) + 2.0 * T_eta * d2[None, :]
    return L, d2


def assemble_L_fourier(coeffs: FourierCoeffs, c: float, constant: float = -1.0) -> OperatorMatrix:
    """Fourier collocation of the Hessian for a smooth profile.

    ``constant`` is the multiplier of the identity from the ``-1`` in the
    potential; the default -1 follows from the DFT normalization.
    """
    L, d2 = _fourier_local_part(coeffs, c)
    curvature = FourierCoeffs(d2 * coeffs.coeffs)
    L = L + 2.0 * _toeplitz(curvature) + constant * np.eye(len(d2))
    return OperatorMatrix(L, "fourier", False, coeffs.n_half,
                          note=f"identity coefficient {constant!r}")


def assemble_L_peaked(grid: Grid, method: str = "fd") -> OperatorMatrix:
    """Hessian at the peaked wave with a regularized crest delta."""
    profile = peaked_profile(grid)
    if method == "fd":
        eta = np.asarray(profile.periodic_values)
        x = grid.periodic_nodes
        alpha = math.pi / grid.n_half
        delta = np.exp(-(x / alpha) ** 2) / math.sqrt(math.pi * alpha * alpha)
        potential = -0.5 - math.pi * delta
        L = _fd_from_values(eta, C_STAR, potential, grid.step)
        return OperatorMatrix(L, "physical", True, grid.n_half,
                              note=f"Gaussian delta, width {alpha!r}")
    if method == "fourier":
        coeffs = dft(profile.periodic_values)
        L, _ = _fourier_local_part(coeffs, C_STAR)
        dim = L.shape[0]
        # pi * delta has every coefficient pi/(2 pi) = 1/2 inside the band
        L = L - 0.5 * np.eye(dim) - 0.5 * np.ones((dim, dim))
        return OperatorMatrix(L, "fourier", False, grid.n_half,
                              note="band-limited delta, all-ones band scaled by 1/2")
    raise DomainError(f"method must be fd or fourier, got {method!r}")


# ---------------------------------------------------------------- eigenvalues


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    parities: tuple[str, ...]
    residuals: np.ndarray
    basis: str
    matrix_norm: float

    def lowest(self, k: int = 4) -> np.ndarray:
        return self.eigenvalues[:k]

    def physical(self, index: int) -> np.ndarray:
        """Eigenvector ``index`` sampled at the periodic grid nodes."""
        v = self.eigenvectors[:, index]
        if self.basis == "physical":
            return v
        return idft(FourierCoeffs(v), real=False)


def _parity(v: np.ndarray, refl: np.ndarray) -> str:
    scale = np.linalg.norm(v)
    if scale == 0.0:
        return "mixed"
    if np.linalg.norm(v - v[refl]) < PARITY_THRESHOLD * scale:
        return "even"
    if np.linalg.norm(v + v[refl]) < PARITY_THRESHOLD * scale:
        return "odd"
    return "mixed"


def _split_by_parity(vecs: np.ndarray, refl: np.ndarray) -> np.ndarray:
    """Rotate a (near-)degenerate eigenvector block into reflection eigenvectors."""
    q, _ = np.linalg.qr(vecs)
    b = q.conj().T @ q[refl, :]
    b = 0.5 * (b + b.conj().T)
    _, u = np.linalg.eigh(b)
    # eigh sorts ascending: odd (-1) first; put even first
    return (q @ u)[:, ::-1]


def _samples(v: np.ndarray, basis: str) -> np.ndarray:
    if basis == "physical":
        return v
    return idft(FourierCoeffs(v), real=False)


def _normalize(v: np.ndarray, basis: str) -> np.ndarray:
    v = v / np.linalg.norm(v)
    g = _samples(v, basis)
    slope = g[2] - g[0]  # centered difference at the leftmost interior node
    if abs(slope) > 1e-8 * np.abs(g).max():
        phase = abs(slope) / slope
    else:
        k = int(np.argmax(np.abs(g)))
        phase = abs(g[k]) / g[k]
    v = v * phase
    if not np.iscomplexobj(v):
        return v
    if basis == "physical" and np.abs(v.imag).max() <= 1e-14:
        return v.real
    return v


def eig(matrix: OperatorMatrix, cluster_tol: float = 1e-9) -> Spectrum:
    """Full dense eigendecomposition, sorted, parity-labelled and checked."""
    A = np.asarray(matrix.entries)
    try:
        if matrix.symmetric:
            vals, vecs = scipy.linalg.eigh(A)
        else:
            vals, vecs = scipy.linalg.eig(A)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ConvergenceError(f"dense eigensolver failed: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise ConvergenceError("dense eigensolver returned non-finite eigenvalues")
    norm = float(np.linalg.norm(A, 2)) if A.shape[0] <= 2048 else float(np.linalg.norm(A))
    refl = matrix.reflection()

    order = np.lexsort((np.imag(vals), np.real(vals)))
    vals = vals[order]
    vecs = vecs[:, order]

    # resolve parity inside clusters of nearly equal eigenvalues
    dim = len(vals)
    k = 0
    vecs = vecs.astype(complex) if not matrix.symmetric else vecs
    while k < dim:
        end = k + 1
        while end < dim and abs(vals[end] - vals[k]) <= cluster_tol * max(norm, 1.0):
            end += 1
        if end - k > 1:
            vecs[:, k:end] = _split_by_parity(vecs[:, k:end], refl)
        k = end

    out_vecs = []
    parities = []
    for j in range(dim):
        v = _normalize(vecs[:, j], matrix.basis)
        out_vecs.append(v)
        parities.append(_parity(v, refl))
    V = np.column_stack(out_vecs)

    # stable ordering within exact ties: even before odd before mixed
    rank = {"even": 0, "odd": 1, "mixed": 2}
    keys = np.lexsort(([rank[p] for p in parities], np.round(np.imag(vals), 12), np.round(np.real(vals), 12)))
    vals = vals[keys]
    V = V[:, keys]
    parities = [parities[i] for i in keys]

    if matrix.symmetric:
        vals = np.real(vals)
    residuals = np.linalg.norm(A @ V - V * vals[None, :], axis=0)
    return Spectrum(vals, V, tuple(parities), residuals, matrix.basis, norm)


# ---------------------------------------------------------------- diagnostics


def translation_residual(profile: WaveProfile) -> float:
    """||L Deta|| / ||Deta|| with Deta the centered difference of the profile."""
    L = assemble_L_fd(profile).entries
    eta = np.asarray(profile.periodic_values)
    d = (np.roll(eta, -1) - np.roll(eta, 1)) / (2.0 * profile.grid.step)
    return float(np.linalg.norm(L @ d) / np.linalg.norm(d))


def fourier_constant_check(c: float, grid: Grid, k: int = 4) -> dict:
    """Compare FD eigenvalues against Fourier ones built with -I and with -pi*I."""
    profile = smooth_profile(c, grid)
    fd = eig(assemble_L_fd(profile)).lowest(k).real
    coeffs = dft(profile.periodic_values)
    unit = eig(assemble_L_fourier(coeffs, c, -1.0)).lowest(k).real
    pi_const = eig(assemble_L_fourier(coeffs, c, -math.pi)).lowest(k).real
    return {
        "c": c,
        "n_half": grid.n_half,
        "fd": fd.tolist(),
        "fourier_minus_identity": unit.tolist(),
        "fourier_minus_pi_identity": pi_const.tolist(),
        "max_dev_minus_identity": float(np.max(np.abs(unit - fd))),
        "max_dev_minus_pi_identity": float(np.max(np.abs(pi_const - fd))),
    }


# ---------------------------------------------------------------- sweeps


@dataclass(frozen=True)
class SpectrumRow:
    c: float
    method: str
    eigenvalues: tuple[complex, ...] = ()
    parities: tuple[str, ...] = ()
    residuals: tuple[float, ...] = ()
    cross_method_gap: float = math.nan
    grey_zone: bool = False
    error: str | None = None


def _spectrum_for(c: float, n_half: int, method: str, k: int):
    grid = Grid(n_half)
    if c == C_STAR:
        spec = eig(assemble_L_peaked(grid, method))
    else:
        profile = smooth_profile(c, grid)
        if method == "fd":
            spec = eig(assemble_L_fd(profile))
        else:
            spec = eig(assemble_L_fourier(dft(profile.periodic_values), c))
    return (
        tuple(complex(v) for v in spec.eigenvalues[:k]),
        spec.parities[:k],
        tuple(float(r) for r in spec.residuals[:k]),
    )


def _sweep_task(args):
    c, n_half, methods, k, threshold = args
    rows = []
    results = {}
    for method in methods:
        try:
            results[method] = _spectrum_for(c, n_half, method, k)
        except Exception as exc:  # recorded per row, sweep continues
            rows.append(SpectrumRow(c, method, error=f"{type(exc).__name__}: {exc}"))
    gap = math.nan
    if "fd" in results and "fourier" in results:
        gap = float(max(abs(a - b) for a, b in zip(results["fd"][0], results["fourier"][0])))
    for method in methods:
        if method in results:
            vals, par, res = results[method]
            rows.append(SpectrumRow(c, method, vals, par, res, gap,
                                    bool(gap > threshold) if gap == gap else False))
    return rows


def eigen_sweep(
    c_values: Sequence[float] = DEFAULT_SWEEP,
    grid: Grid = Grid(300),
    method: str = "fd",
    *,
    k: int = 4,
    grey_threshold: float = 1e-3,
    include_peaked: bool = False,
    jobs: int = 1,
) -> list[SpectrumRow]:
    """Lowest ``k`` eigenvalues for each speed; method is fd, fourier or both.

    With both methods the rows carry the largest eigenvalue gap between them
    and are flagged when it exceeds ``grey_threshold``.
    """
    if method not in ("fd", "fourier", "both"):
        raise DomainError(f"method must be fd, fourier or both, got {method!r}")
    methods = ("fd", "fourier") if method == "both" else (method,)
    cs = [float(c) for c in c_values]
    if include_peaked:
        cs.append(C_STAR)
    tasks = [(c, grid.n_half, methods, k, grey_threshold) for c in cs]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sweep_task, tasks))
    else:
        chunks = [_sweep_task(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


# ---------------------------------------------------------------- matrix dump


def _fmt(v) -> str:
    if isinstance(v, complex) or np.iscomplexobj(v):
        v = complex(v)
        return f"{v.real:.17g}{v.imag:+.17g}j"
    return f"{float(v):.17g}"


def write_matrix(path, matrix: OperatorMatrix) -> None:
    """Dense row-major text: header 'rows cols basis', then one row per line."""
    path = Path(path)
    A = matrix.entries
    lines = [f"{A.shape[0]} {A.shape[1]} {matrix.basis}"]
    for row in A:
        lines.append(" ".join(_fmt(v) for v in row))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)


def read_matrix(path) -> tuple[np.ndarray, str]:
    text = Path(path).read_text().splitlines()
    rows, cols, basis = text[0].split()
    data = [[complex(t) for t in line.split()] for line in text[1 : 1 + int(rows)]]
    A = np.array(data)
    if not np.any(A.imag):
        A = A.real
    if A.shape != (int(rows), int(cols)):
        raise DomainError("matrix file body does not match its header")
    return A, basis
