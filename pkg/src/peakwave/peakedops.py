"""Linearized operators at the peaked wave and witnesses of their strip spectrum.

Functions on the circle are sampled on the closed interval [0, 2*pi] with
2N+1 nodes x_k = k*pi/N. Node 0 holds the limit from the right of the crest
and node 2N the limit from the left, so functions with a jump at the crest
(such as x - pi, which lies in the kernel) are represented without
Gibbs pollution. Derivatives use sixth-order finite differences (one-sided
near the ends) and integrals use end-corrected trapezoid weights.

The local coefficient c_star^2 - 2 eta_star equals x(2*pi - x)/4 on this
interval and eta_star' equals (x - pi)/4.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse
from scipy import integrate

from .errors import (
    ConvergenceError,
    DomainError,
    IllConditionedWarning,
    TailTruncationWarning,
)
from .specfun import adaptive_quad_complex, cumulative_integral, gregory_weights
from .waveprofile import Grid

__all__ = [
    "STRIP_HALF_WIDTH",
    "RESOLVENT_CONSTANT",
    "IntervalOps",
    "interval_ops",
    "apply_A",
    "apply_A0",
    "apply_K",
    "discrete_K_eigenvalues",
    "discrete_spectrum_extent",
    "delta_cancellation_residual",
    "coord_map",
    "coord_map_inverse",
    "LineGrid",
    "apply_D0",
    "d0_eigenfunction",
    "SpectralProbe",
    "a_eigenfunction",
    "f2_norm_profile",
    "resolvent_probe",
    "StripPoint",
    "StripRow",
    "strip_report",
]

STRIP_HALF_WIDTH = math.pi / 4.0
RESOLVENT_CONSTANT = 1.0 + 2.0 / math.sqrt(3.0)
TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------- interval grid


def _derivative_matrix(n: int, h: float, order: int = 6) -> scipy.sparse.csr_matrix:
    """First-derivative matrix, centered inside and one-sided near the ends."""
    half = order // 2
    rows, cols, vals = [], [], []
    cache: dict[tuple[int, ...], np.ndarray] = {}
    for i in range(n):
        lo = min(max(i - half, 0), n - order - 1)
        offsets = tuple(range(lo - i, lo - i + order + 1))
        if offsets not in cache:
            vander = np.vander(np.asarray(offsets, float), increasing=True).T
            rhs = np.zeros(order + 1)
            rhs[1] = 1.0
            cache[offsets] = np.linalg.solve(vander, rhs)
        rows.extend([i] * (order + 1))
        cols.extend(i + o for o in offsets)
        vals.extend(cache[offsets] / h)
    return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class IntervalOps:
    n_half: int
    x: np.ndarray
    step: float
    weights: np.ndarray
    coefficient: np.ndarray
    wave_slope: np.ndarray
    derivative: scipy.sparse.csr_matrix

    def norm(self, f) -> float:
        """Discrete L^2 norm over one period."""
        return float(np.sqrt(self.weights @ np.abs(np.asarray(f)) ** 2))

    def integral(self, f):
        return self.weights @ np.asarray(f)

    def mean_zero_antiderivative(self, f) -> np.ndarray:
        """Zero-mean antiderivative of the zero-mean part of ``f``."""
        f = np.asarray(f)
        centered = f - self.integral(f) / TWO_PI
        prim = cumulative_integral(centered, self.step)
        return prim - self.integral(prim) / TWO_PI

    def dense_A(self, truncated: bool = False) -> np.ndarray:
        n = len(self.x)
        A = self.coefficient[:, None] * self.derivative.toarray()
        A = A - np.outer(np.ones(n), self.weights * self.wave_slope) / math.pi
        if not truncated:
            A = A + 0.5 * self.dense_K()
        return A

    def dense_K(self) -> np.ndarray:
        n = len(self.x)
        proj = np.eye(n) - np.outer(np.ones(n), self.weights) / TWO_PI
        prim = integrate.cumulative_simpson(proj, dx=self.step, axis=0, initial=0.0)
        return proj @ prim


@lru_cache(maxsize=8)
def interval_ops(n_half: int) -> IntervalOps:
    Grid(n_half)  # validates n_half
    h = math.pi / n_half
    n = 2 * n_half + 1
    x = np.arange(n) * h
    x[-1] = TWO_PI
    return IntervalOps(
        n_half=n_half,
        x=x,
        step=h,
        weights=gregory_weights(n, h, order=6),
        coefficient=0.25 * x * (TWO_PI - x),
        wave_slope=0.25 * (x - math.pi),
        derivative=_derivative_matrix(n, h),
    )


def _ops_for(f, n_half):
    f = np.asarray(f)
    if n_half is None:
        if len(f) % 2 != 1:
            raise DomainError("interval samples need an odd length 2N+1")
        n_half = (len(f) - 1) // 2
    ops = interval_ops(n_half)
    if len(f) != len(ops.x):
        raise DomainError(f"expected {len(ops.x)} samples, got {len(f)}")
    return f, ops


def apply_A0(f, n_half: int | None = None) -> np.ndarray:
    """Local transport part plus the rank-one correction (no antiderivative term)."""
    f, ops = _ops_for(f, n_half)
    return ops.coefficient * (ops.derivative @ f) - ops.integral(ops.wave_slope * f) / math.pi


def apply_K(f, n_half: int | None = None) -> np.ndarray:
    f, ops = _ops_for(f, n_half)
    return 0.5 * ops.mean_zero_antiderivative(f)


def apply_A(f, n_half: int | None = None) -> np.ndarray:
    """Full linearized operator at the peaked wave, on interval samples."""
    return apply_A0(f, n_half) + apply_K(f, n_half)


def discrete_K_eigenvalues(n_half: int) -> np.ndarray:
    """Eigenvalues of half the mean-zero antiderivative on the periodic Fourier grid.

    Mode n (0 < |n| < N) is mapped to exp(inx)/(2in), i.e. eigenvalue -i/(2n);
    the mean and the Nyquist mode are annihilated.
    """
    M = 2 * n_half
    k = np.fft.fftfreq(M, 1.0 / M)
    I = np.eye(M)
    spec = np.fft.fft(I, axis=0)
    factor = np.zeros(M, dtype=complex)
    keep = (k != 0) & (np.abs(k) != n_half)
    factor[keep] = 1.0 / (2j * k[keep])
    K = np.fft.ifft(factor[:, None] * spec, axis=0)
    return np.linalg.eigvals(K)


def discrete_spectrum_extent(n_half: int) -> float:
    """Largest |Re| among eigenvalues of the dense interval matrix for A.

    Reported as a diagnostic only; nothing asserts that the discrete
    spectrum fills the strip as N grows.
    """
    return float(np.max(np.abs(np.linalg.eigvals(interval_ops(n_half).dense_A()).real)))


def delta_cancellation_residual(n_half: int) -> tuple[np.ndarray, np.ndarray]:
    """2 eta_star' + pi * P[delta_0] on the periodic grid, band-limited delta.

    Returns (nodes in [0, 2 pi), residual). The crest slope is the average of
    its one-sided limits, i.e. zero.
    """
    M = 2 * n_half
    x = np.arange(M) * (math.pi / n_half)
    k = np.fft.fftfreq(M, 1.0 / M)
    coeff = np.zeros(M, dtype=complex)
    keep = (k != 0) & (np.abs(k) != n_half)
    coeff[keep] = (1.0 / TWO_PI) / (1j * k[keep])
    antider = np.real(np.fft.ifft(coeff * M))
    slope = 0.25 * (x - math.pi)
    slope[0] = 0.0
    return x, 2.0 * slope + math.pi * antider


# ---------------------------------------------------------------- line operator


def coord_map(z):
    """Stretch the line onto (0, 2 pi) with z = 0 sent to the crest's antipode."""
    return math.pi + math.pi * np.tanh(math.pi * np.asarray(z, dtype=float) / 4.0)


def coord_map_inverse(x):
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0.0) or np.any(x >= TWO_PI):
        raise DomainError("coord_map_inverse needs x strictly inside (0, 2 pi)")
    return (4.0 / math.pi) * np.arctanh(x / math.pi - 1.0)


@dataclass(frozen=True, eq=False)
class LineGrid:
    z_max: float = 40.0
    n_nodes: int = 4096

    def __post_init__(self):
        if self.z_max < 40.0:
            raise DomainError("z_max must be at least 40")
        if self.n_nodes < 64:
            raise DomainError("need at least 64 nodes")

    @property
    def z(self) -> np.ndarray:
        return np.linspace(-self.z_max, self.z_max, self.n_nodes)

    @property
    def step(self) -> float:
        return 2.0 * self.z_max / (self.n_nodes - 1)

    @property
    def weight(self) -> np.ndarray:
        return 1.0 / np.cosh(math.pi * self.z / 4.0)

    @property
    def weight_slope(self) -> np.ndarray:
        return -(math.pi / 4.0) * np.tanh(math.pi * self.z / 4.0) * self.weight

    def trapezoid(self, f):
        f = np.asarray(f)
        return self.step * (np.sum(f) - 0.5 * (f[0] + f[-1]))

    def norm(self, f) -> float:
        return float(np.sqrt(self.trapezoid(np.abs(f) ** 2)))


_CENTERED8 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])


def _line_derivative(h: np.ndarray, dz: float) -> np.ndarray:
    out = np.gradient(h, dz, edge_order=2).astype(np.result_type(h, float))
    n = len(h)
    acc = np.zeros(n - 8, dtype=out.dtype)
    for k, c in enumerate(_CENTERED8):
        acc = acc + c * h[k : n - 8 + k]
    out[4:-4] = acc / dz
    return out


def apply_D0(h, grid: LineGrid = LineGrid()) -> np.ndarray:
    """Truncated operator in stretched coordinates (eighth-order differences)."""
    h = np.asarray(h)
    if len(h) != grid.n_nodes:
        raise DomainError(f"expected {grid.n_nodes} samples, got {len(h)}")
    edge = max(abs(h[0]), abs(h[-1]))
    if edge > 1e-8:
        warnings.warn(f"function is {edge:.2e} at the truncated ends", TailTruncationWarning)
    z = grid.z
    w = grid.weight
    rank_one = (math.pi / 4.0) * w * grid.trapezoid(grid.weight_slope * h)
    return _line_derivative(h, grid.step) + (math.pi / 4.0) * np.tanh(math.pi * z / 4.0) * h + rank_one


def _weighted_exponential_moment(lam: complex) -> complex:
    """Integral over the line of sech(pi z/4)^2 exp(lam z), by adaptive quadrature."""
    a = math.pi / 4.0
    span = 40.0 / (2.0 * a - abs(lam.real))

    def integrand(z):
        # 4 e^{lam z - 2a|z|} / (1 + e^{-2a|z|})^2 never overflows
        t = math.exp(-2.0 * a * abs(z))
        return 4.0 * np.exp(lam * z - 2.0 * a * abs(z)) / (1.0 + t) ** 2

    left, _ = adaptive_quad_complex(integrand, -span, 0.0, 1e-15, max_subintervals=2000)
    right, _ = adaptive_quad_complex(integrand, 0.0, span, 1e-15, max_subintervals=2000)
    return left + right


@dataclass(frozen=True, eq=False)
class SpectralProbe:
    lam: complex
    function_values: np.ndarray
    residual_norm: float
    constraint_residual: float
    diagnostics: dict = field(default_factory=dict)


def _check_interior(lam: complex) -> complex:
    lam = complex(lam)
    if not abs(lam.real) < STRIP_HALF_WIDTH:
        raise DomainError(f"|Re lambda| = {abs(lam.real)!r} is not inside the strip (< pi/4)")
    return lam


def d0_eigenfunction(lam: complex, grid: LineGrid = LineGrid()) -> SpectralProbe:
    """Closed-form eigenfunction of the truncated line operator, with residual."""
    lam = _check_interior(lam)
    z = grid.z
    w = grid.weight
    if lam == 0:
        h = w.astype(complex)
        moment = 8.0 / math.pi
    else:
        moment = _weighted_exponential_moment(lam)
        h = np.exp(lam * z) * w - (math.pi / 8.0) * w * moment
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TailTruncationWarning)
        image = apply_D0(h, grid)
    residual = grid.norm(image - lam * h) / grid.norm(h)
    lhs = grid.trapezoid(w * image)
    rhs = lam * grid.trapezoid(w * h)
    return SpectralProbe(
        lam, h, residual, abs(lhs - rhs),
        {"moment": moment, "weight_pairing": lhs, "tail": float(max(abs(h[0]), abs(h[-1])))},
    )


# ---------------------------------------------------------------- eigenfunctions of A


def _second_solution(lam, nodes, x_min, rtol, atol):
    """Integrate the regular-singular ODE for f2 from x_min with f2 ~ x^p."""
    p = 2.0 * lam / math.pi

    def rhs(x, y):
        f, fp, _, _ = y
        fpp = (lam * fp - 0.5 * (math.pi - x) * fp - 0.5 * f) / (0.25 * x * (TWO_PI - x))
        return [fp, fpp, f, x * f]

    f0 = x_min**p
    fp0 = p * x_min ** (p - 1.0)
    amp = fp0 * x_min ** (1.0 - p) / p
    base = f0 - amp * x_min**p
    start = [
        f0,
        fp0,
        amp * x_min ** (p + 1.0) / (p + 1.0) + base * x_min,
        amp * x_min ** (p + 2.0) / (p + 2.0) + base * x_min**2 / 2.0,
    ]
    x_end = TWO_PI - x_min
    sol = integrate.solve_ivp(
        rhs, (x_min, x_end), np.asarray(start, complex), method="DOP853",
        rtol=rtol, atol=atol, t_eval=np.concatenate([nodes, [x_end]]),
    )
    if sol.status != 0:
        raise ConvergenceError(f"ODE integration for lambda={lam!r} stopped at x={sol.t[-1]!r}: {sol.message}")
    f, fp, F, G = sol.y
    # tail past x_end: f ~ A y^-p + B with y = 2 pi - x
    eps = x_min
    tail_amp = fp[-1] * eps ** (p + 1.0) / p
    tail_base = f[-1] - tail_amp * eps ** (-p)
    tail_int = tail_amp * eps ** (1.0 - p) / (1.0 - p) + tail_base * eps
    tail_moment = TWO_PI * tail_int - (tail_amp * eps ** (2.0 - p) / (2.0 - p) + tail_base * eps**2 / 2.0)
    return f[:-1], fp[:-1], F[:-1], F[-1] + tail_int, G[-1] + tail_moment


def a_eigenfunction(
    lam: complex,
    grid: Grid = Grid(1024),
    *,
    x_min_fraction: float = 1e-6,
    rtol: float = 1e-13,
    atol: float = 1e-14,
) -> SpectralProbe:
    """Eigenfunction of the full operator for lam inside the strip, lam != 0.

    Combines f1 = 2 lam - pi + x with the second ODE solution f2 so that the
    total integral vanishes. Values are returned at the interior interval
    nodes x_k = k pi/N, k = 1..2N-1, normalized to unit discrete L^2 norm.
    ``residual_norm`` evaluates (A - lam) f with the derivative and the
    integrals carried by the ODE, since f is only Hoelder continuous at the
    crest and grid differences would be inaccurate there.
    """
    lam = _check_interior(lam)
    if lam == 0:
        raise DomainError("lambda = 0 is the kernel (constants and x - pi); use apply_A")
    N = grid.n_half
    h = math.pi / N
    nodes = np.arange(1, 2 * N) * h
    x_min = x_min_fraction * TWO_PI
    f2, f2p, f2_int, total, moment = _second_solution(lam, nodes, x_min, rtol, atol)

    mid = N - 1  # node x = pi
    f1 = 2.0 * lam - math.pi + nodes
    wr_mid = f1[mid] * f2p[mid] - f2[mid]
    f2, f2p, f2_int, total, moment = (v / wr_mid for v in (f2, f2p, f2_int, total, moment))

    wronskian = f1 * f2p - f2
    p = 2.0 * lam / math.pi
    exact = math.pi**2 / (nodes * (TWO_PI - nodes)) * (nodes / (TWO_PI - nodes)) ** p
    wronskian_dev = float(np.max(np.abs(wronskian - exact)))
    f2pp = (lam * f2p - 0.5 * (math.pi - nodes) * f2p - 0.5 * f2) / (0.25 * nodes * (TWO_PI - nodes))
    log_deriv = f1 * f2pp / wronskian
    abel = 2.0 * (2.0 * lam - math.pi + nodes) / (nodes * (TWO_PI - nodes))
    abel_dev = float(np.max(np.abs(log_deriv - abel) * nodes * (TWO_PI - nodes)))

    c2 = 1.0
    c1 = -total / (4.0 * math.pi * lam)
    f = c1 * f1 + c2 * f2
    fp = c1 + c2 * f2p
    running = c1 * ((2.0 * lam - math.pi) * nodes + nodes**2 / 2.0) + c2 * f2_int
    total_f = c1 * (4.0 * math.pi * lam) + c2 * total
    moment_f = c1 * ((2.0 * lam - math.pi) * TWO_PI**2 / 2.0 + TWO_PI**3 / 3.0) + c2 * moment
    mean = total_f / TWO_PI
    primitive_mean = (TWO_PI * total_f - moment_f) / TWO_PI - math.pi * mean
    antider = running - mean * nodes - primitive_mean
    slope_pairing = 0.25 * (moment_f - math.pi * total_f)
    coef = 0.25 * nodes * (TWO_PI - nodes)
    residual = coef * fp - slope_pairing / math.pi + 0.5 * antider - lam * f

    scale = math.sqrt(h * float(np.sum(np.abs(f) ** 2)))
    return SpectralProbe(
        lam,
        f / scale,
        math.sqrt(h * float(np.sum(np.abs(residual) ** 2))) / scale,
        abs(total_f) / scale,
        {
            "wronskian_deviation": wronskian_dev,
            "abel_deviation": abel_dev,
            "c1": c1,
            "c2": c2,
            "wronskian_at_pi": complex(wronskian[mid]),
        },
    )


def f2_norm_profile(lam: complex, cutoffs: Sequence[float], n_half: int = 1024) -> list[float]:
    """L^2 norm of the normalized f2 over [cutoff, 2 pi - cutoff] for each cutoff.

    Bounded as cutoff -> 0 inside the strip; grows without bound outside it.
    """
    lam = complex(lam)
    if lam == 0:
        raise DomainError("lambda must be non-zero")
    out = []
    for eps in cutoffs:
        # geometric refinement toward both ends, where f2 may be singular
        ends = np.geomspace(eps, 0.05, 400)[1:]
        middle = np.linspace(0.05, TWO_PI - 0.05, 2 * n_half + 1)[1:-1]
        nodes = np.concatenate([ends, middle, (TWO_PI - ends)[::-1]])
        f2, f2p, *_ = _second_solution(lam, nodes, eps, 1e-11, 1e-13)
        mid = int(np.argmin(np.abs(nodes - math.pi)))
        f1 = 2.0 * lam - math.pi + nodes[mid]
        f2 = f2 / (f1 * f2p[mid] - f2[mid])
        out.append(float(np.sqrt(integrate.trapezoid(np.abs(f2) ** 2, nodes))))
    return out


# ---------------------------------------------------------------- resolvent


def resolvent_probe(
    lam: complex, g, n_half: int | None = None, tolerance: float = 1e-9,
    cond_cap: float = 1e12,
) -> tuple[np.ndarray, float]:
    """Solve (A - lam) f = g on the interval grid and compare with the a priori bound.

    Returns (f, ratio) with ratio = ||f|| (|Re lam| - pi/4) / (C ||g||).
    Raises ConvergenceError if the ratio exceeds 1 + tolerance.
    """
    lam = complex(lam)
    if not abs(lam.real) > STRIP_HALF_WIDTH:
        raise DomainError(f"|Re lambda| = {abs(lam.real)!r} is inside the strip; no resolvent bound")
    g, ops = _ops_for(g, n_half)
    system = ops.dense_A() - lam * np.eye(len(ops.x))
    cond = float(np.linalg.cond(system))
    if cond > cond_cap:
        warnings.warn(f"resolvent system condition number {cond:.2e}", IllConditionedWarning)
    f = np.linalg.solve(system, g.astype(complex))
    ratio = ops.norm(f) * (abs(lam.real) - STRIP_HALF_WIDTH) / (RESOLVENT_CONSTANT * ops.norm(g))
    if ratio > 1.0 + tolerance:
        raise ConvergenceError(f"resolvent bound violated at lambda={lam!r}: ratio {ratio:.6f}")
    return f, float(ratio)


# ---------------------------------------------------------------- strip report


@dataclass(frozen=True)
class StripPoint:
    lam: complex

    @property
    def classification(self) -> str:
        gap = abs(self.lam.real) - STRIP_HALF_WIDTH
        if abs(gap) <= 1e-12:
            return "boundary"
        return "interior" if gap < 0 else "resolvent"


@dataclass(frozen=True)
class StripRow:
    lam: complex
    classification: str
    value: float
    status: str
    detail: str = ""


def _strip_row(args) -> StripRow:
    lam, n_half, tol, resolvent_n = args
    point = StripPoint(complex(lam))
    cls = point.classification
    try:
        if cls == "boundary":
            return StripRow(point.lam, cls, math.nan, "untested", "boundary of strip")
        if cls == "resolvent":
            ops = interval_ops(resolvent_n)
            _, ratio = resolvent_probe(point.lam, np.cos(ops.x), resolvent_n)
            return StripRow(point.lam, cls, ratio, "pass" if ratio <= 1.0 else "fail", "bound ratio")
        if point.lam == 0:
            ops = interval_ops(n_half)
            res = max(ops.norm(apply_A(np.ones_like(ops.x))),
                      ops.norm(apply_A(ops.x - math.pi)) / ops.norm(ops.x - math.pi))
            return StripRow(point.lam, cls, res, "pass" if res <= tol else "fail",
                            "kernel dimension 2 (constant, x - pi)")
        probe = a_eigenfunction(point.lam, Grid(n_half))
        ok = probe.residual_norm <= tol and probe.diagnostics["wronskian_deviation"] <= 1e-8
        return StripRow(point.lam, cls, probe.residual_norm, "pass" if ok else "fail",
                        f"wronskian deviation {probe.diagnostics['wronskian_deviation']:.2e}")
    except Exception as exc:  # recorded per sample, report continues
        return StripRow(point.lam, cls, math.nan, "error", f"{type(exc).__name__}: {exc}")


def strip_report(
    grid: Grid, lambda_samples: Sequence[complex], *, tol: float = 1e-4,
    resolvent_n: int = 256, jobs: int = 1,
) -> tuple[list[StripRow], bool]:
    """Classify each sample and certify it; returns (rows, verdict).

    The verdict is true when every interior and resolvent sample passed.
    Boundary samples are reported as untested.
    """
    tasks = [(complex(lam), grid.n_half, tol, resolvent_n) for lam in lambda_samples]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_strip_row, tasks))
    else:
        rows = [_strip_row(t) for t in tasks]
    verdict = all(r.status in ("pass", "untested") for r in rows)
    return rows, verdict
