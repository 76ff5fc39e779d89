"""Smooth and peaked 2*pi-periodic traveling waves.

The smooth family exists for 1 < c < c_star. Each profile is pinned by its
first-integral level ``energy``, chosen so the orbit has period 2*pi, and is
sampled node by node by inverting the quadrature map x = f(eta).
At c = c_star the profile is the explicit piecewise quadratic with a corner
at the crest.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConvergenceError, DomainError, NoRootError
from .specfun import adaptive_quad, complete_elliptic_E

__all__ = [
    "C_STAR",
    "ENERGY_STAR",
    "ModelParams",
    "Grid",
    "WaveProfile",
    "FourierCoeffs",
    "SweepRow",
    "period",
    "solve_energy_for_period",
    "profile_inverse_map",
    "profile_map_derivative",
    "newton_profile",
    "smooth_profile",
    "peaked_profile",
    "peaked_eta",
    "peaked_slope",
    "dft",
    "idft",
    "check_residuals",
    "amplitude_sweep",
]

C_STAR = math.pi / (2.0 * math.sqrt(2.0))
ENERGY_STAR = math.pi**4 / 512.0
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ModelParams:
    """Wave speed ``c`` and first-integral level ``energy``."""

    c: float
    energy: float

    def __post_init__(self):
        if not (math.isfinite(self.c) and math.isfinite(self.energy)):
            raise DomainError("c and energy must be finite")
        if self.energy < 0:
            raise DomainError(f"energy must be non-negative, got {self.energy!r}")

    @property
    def c_star(self) -> float:
        return C_STAR

    @property
    def energy_crit(self) -> float:
        return self.c**4 / 8.0

    @property
    def amplitude(self) -> float:
        """Crest height sqrt(2*energy) (also minus the trough depth)."""
        return math.sqrt(2.0 * self.energy)


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_j = j*pi/N, j = -N..N, on one period."""

    n_half: int

    def __post_init__(self):
        if int(self.n_half) != self.n_half or self.n_half < 8:
            raise DomainError(f"n_half must be an integer >= 8, got {self.n_half!r}")

    @property
    def step(self) -> float:
        return math.pi / self.n_half

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.n_half, self.n_half + 1)

    @property
    def nodes(self) -> np.ndarray:
        """All 2N+1 nodes including both ends -pi and pi."""
        return self.indices * self.step

    @property
    def periodic_nodes(self) -> np.ndarray:
        """The 2N distinct nodes once x_N is identified with x_{-N}."""
        return self.nodes[:-1]

    @property
    def center(self) -> int:
        """Array index of the node x = 0."""
        return self.n_half


@dataclass(frozen=True, eq=False)
class WaveProfile:
    """Profile values and slopes on all 2N+1 grid nodes.

    For the peaked wave ``slope`` holds the right-sided value at the crest;
    both one-sided values are kept in ``peak_slopes`` as (left, right).
    """

    params: ModelParams
    grid: Grid
    values: np.ndarray
    slope: np.ndarray
    kind: str
    peak_slopes: tuple[float, float] = (0.0, 0.0)
    newton_residual: float = 0.0

    def __post_init__(self):
        n = 2 * self.grid.n_half + 1
        if self.kind not in ("smooth", "peaked"):
            raise DomainError(f"kind must be smooth or peaked, got {self.kind!r}")
        if self.values.shape != (n,) or self.slope.shape != (n,):
            raise DomainError(f"values and slope must have length {n}")
        self.values.setflags(write=False)
        self.slope.setflags(write=False)

    @property
    def periodic_values(self) -> np.ndarray:
        return self.values[:-1]

    def slope_for_quadrature(self) -> np.ndarray:
        """Slope with the crest node replaced by the mean of its one-sided limits."""
        s = np.array(self.slope)
        if self.kind == "peaked":
            s[self.grid.center] = 0.5 * sum(self.peak_slopes)
        return s


@dataclass(frozen=True, eq=False)
class FourierCoeffs:
    """Exponential coefficients for modes n = -N..N."""

    coeffs: np.ndarray

    @property
    def n_half(self) -> int:
        return (len(self.coeffs) - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        return np.arange(-self.n_half, self.n_half + 1)

    def __getitem__(self, n: int) -> complex:
        if abs(n) > self.n_half:
            raise IndexError(n)
        return self.coeffs[n + self.n_half]


# ---------------------------------------------------------------- period & energy


def period(energy: float, c: float) -> float:
    """Period of the traveling-wave orbit at first-integral level ``energy``."""
    if not (math.isfinite(energy) and math.isfinite(c)):
        raise DomainError("energy and c must be finite")
    if c <= 1.0:
        raise DomainError(f"c must exceed 1, got {c!r}")
    crit = c**4 / 8.0
    if energy <= 0.0 or energy > crit * (1.0 + 1e-15):
        raise DomainError(f"energy must lie in (0, c^4/8 = {crit!r}], got {energy!r}")
    root = math.sqrt(2.0 * min(energy, crit))
    denom = c * c + 2.0 * root
    kappa = math.sqrt(min(4.0 * root / denom, 1.0))
    return 4.0 * complete_elliptic_E(kappa) * math.sqrt(denom)


def solve_energy_for_period(
    c: float, target_period: float = TWO_PI, tol: float = 1e-12, scan_points: int = 64
) -> float:
    """Energy level whose orbit has the requested period.

    A logarithmic scan brackets the sign change, bisection shrinks the
    bracket, and safeguarded secant steps finish the job.
    """
    if not math.isfinite(c) or c <= 1.0:
        raise DomainError(f"c must exceed 1, got {c!r}")
    crit = c**4 / 8.0
    residual = lambda e: period(e, c) - target_period  # noqa: E731

    levels = crit * np.logspace(-16.0, 0.0, scan_points)
    values = [residual(float(e)) for e in levels]
    lo = hi = None
    for k in range(scan_points - 1):
        if values[k] == 0.0:
            return float(levels[k])
        if values[k] * values[k + 1] < 0.0:
            lo, hi = float(levels[k]), float(levels[k + 1])
            f_lo, f_hi = values[k], values[k + 1]
            break
    if lo is None:
        raise NoRootError(
            f"period - target has no sign change on (0, c^4/8] for c={c!r}: "
            f"T(small)-target={values[0]:.3e}, T(crit)-target={values[-1]:.3e}"
        )

    for _ in range(30):
        mid = 0.5 * (lo + hi)
        f_mid = residual(mid)
        if f_mid == 0.0:
            return mid
        if f_lo * f_mid < 0.0:
            hi, f_hi = mid, f_mid
        else:
            lo, f_lo = mid, f_mid

    a, fa, b, fb = lo, f_lo, hi, f_hi
    for _ in range(100):
        # polish well past tol; stop only on an exact hit or a collapsed bracket
        if fb == 0.0:
            return b
        x = b - fb * (b - a) / (fb - fa) if fb != fa else 0.5 * (lo + hi)
        if not lo < x < hi:
            x = 0.5 * (lo + hi)
        fx = residual(x)
        if f_lo * fx < 0.0:
            hi, f_hi = x, fx
        else:
            lo, f_lo = x, fx
        a, fa, b, fb = b, fb, x, fx
        if hi - lo <= 4e-16 * hi:
            break
    best = min((abs(f_lo), lo), (abs(f_hi), hi))
    if best[0] > tol:
        raise ConvergenceError(
            f"period residual {best[0]:.3e} above {tol:.1e} for c={c!r}"
        )
    return best[1]


# ---------------------------------------------------------------- profile


def profile_inverse_map(eta: float, params: ModelParams, tol: float = 1e-15) -> float:
    """Position x in [0, pi] where the smooth profile takes the value ``eta``."""
    amp = params.amplitude
    if amp == 0.0:
        raise DomainError("zero-energy profile is flat; inverse map undefined")
    if abs(eta) > amp * (1.0 + 4e-16):
        raise DomainError(f"|eta| = {abs(eta)!r} exceeds amplitude {amp!r}")
    lower = max(-1.0, min(1.0, eta / amp))
    if lower >= 1.0:
        return 0.0
    c2 = params.c * params.c
    lower_gap = (amp + eta) / amp  # 1 + lower, without cancellation

    def integrand(x, from_lower, to_one):
        # 1 - x**2 = (1 - x)(1 + x), both factors kept accurate
        one_plus = lower_gap + from_lower if x < 0.0 else 2.0 - to_one
        return math.sqrt(c2 - 2.0 * amp * x) / math.sqrt(to_one * one_plus)

    return adaptive_quad(
        integrand, lower, 1.0, tol, singular_endpoints=True, endpoint_offsets=True
    ).value


def profile_map_derivative(eta: float, params: ModelParams) -> float:
    """d x / d eta along the smooth profile (negative, infinite at the ends)."""
    amp = params.amplitude
    gap = (amp - eta) * (amp + eta)
    if gap <= 0.0:
        return -math.inf
    return -math.sqrt(params.c**2 - 2.0 * eta) / math.sqrt(gap)


def _solve_node(x_target, params, lo, hi, guess, tol, max_iter, node):
    """Safeguarded Newton for f(eta) = x_target with f decreasing on [lo, hi]."""
    eta = guess
    resid = math.inf
    for it in range(max_iter):
        resid = profile_inverse_map(eta, params) - x_target
        if abs(resid) < tol:
            return eta, abs(resid)
        # f decreasing: f(eta) > x means eta is too small
        if resid > 0.0:
            lo = max(lo, eta)
        else:
            hi = min(hi, eta)
        slope = profile_map_derivative(eta, params)
        if not math.isfinite(slope):
            step_ok = False
        elif abs(slope) < 1e-300:
            raise ConvergenceError(f"derivative underflow at node {node}, eta={eta!r}")
        else:
            trial = eta - resid / slope
            step_ok = lo < trial < hi
        eta = trial if step_ok else 0.5 * (lo + hi)
        if np.nextafter(lo, hi) >= hi:
            # bracket is two adjacent doubles: the best attainable root, even
            # if f jumps by more than tol across one ulp (steep f near trough)
            r_lo = profile_inverse_map(lo, params) - x_target
            r_hi = profile_inverse_map(hi, params) - x_target
            slope_bound = abs(profile_map_derivative(hi, params)) * 4.0 * (hi - lo)
            best = min((abs(r_lo), lo), (abs(r_hi), hi))
            if best[0] <= max(tol, slope_bound):
                return best[1], best[0]
            resid = best[0]
            break
    raise ConvergenceError(
        f"Newton failed at node {node} (x={x_target!r}) after {max_iter} iterations; "
        f"last residual {resid:.3e}"
    )


def newton_profile(
    params: ModelParams, grid: Grid, tol: float = 1e-14, max_iter: int = 100
) -> WaveProfile:
    """Sample the smooth profile by Newton inversion of x = f(eta) at each node."""
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    amp = params.amplitude
    if not 0.0 < params.energy < params.energy_crit:
        raise DomainError("smooth profiles need 0 < energy < c^4/8")
    if params.c >= C_STAR:
        raise DomainError("no smooth 2pi-periodic profile at c >= c_star; use peaked_profile")
    N = grid.n_half
    h = grid.step
    half = np.empty(N + 1)
    half[0] = amp
    half[N] = -amp
    worst = 0.0
    for j in range(1, N):
        eta, res = _solve_node(j * h, params, -amp, half[j - 1], half[j - 1], tol, max_iter, j)
        half[j] = eta
        worst = max(worst, res)

    gap = np.clip((amp - half) * (amp + half), 0.0, None)
    half_slope = -np.sqrt(gap / (params.c**2 - 2.0 * half))
    half_slope[0] = 0.0
    half_slope[N] = 0.0

    values = np.concatenate([half[:0:-1], half])
    slope = np.concatenate([-half_slope[:0:-1], half_slope])
    return WaveProfile(params, grid, values, slope, "smooth", newton_residual=worst)


def smooth_profile(c: float, grid: Grid, tol: float = 1e-14) -> WaveProfile:
    """Energy root followed by Newton sampling."""
    return newton_profile(ModelParams(c, solve_energy_for_period(c)), grid, tol)


def peaked_eta(x):
    """Peaked profile on its fundamental period [-pi, pi] (vectorized)."""
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    return (math.pi**2 - 4.0 * math.pi * ax + 2.0 * x * x) / 16.0


def peaked_slope(x):
    """Derivative of the peaked profile off the crest, on [-pi, pi]."""
    x = np.asarray(x, dtype=float)
    return -(math.pi - np.abs(x)) * np.sign(x) / 4.0


def peaked_profile(grid: Grid) -> WaveProfile:
    x = grid.nodes
    values = peaked_eta(x)
    values[grid.center] = math.pi**2 / 16.0
    slope = peaked_slope(x)
    slope[grid.center] = -math.pi / 4.0
    # reflection makes the symmetry exact in floating point
    values = np.concatenate([values[: grid.center + 1], values[grid.center - 1 :: -1]])
    return WaveProfile(
        ModelParams(C_STAR, ENERGY_STAR), grid, values, slope, "peaked",
        peak_slopes=(math.pi / 4.0, -math.pi / 4.0),
    )


# ---------------------------------------------------------------- Fourier


def _periodic_samples(values) -> np.ndarray:
    v = np.asarray(values)
    if v.ndim != 1 or len(v) < 2:
        raise DomainError("need a one-dimensional array of samples")
    if len(v) % 2 == 1:
        v = v[:-1]
    return v


def dft(profile_values) -> FourierCoeffs:
    """Coefficients (h/2pi) * sum_j eta_j exp(-i n x_j) for n = -N..N.

    Accepts the 2N periodic samples (x_{-N}..x_{N-1}) or all 2N+1 nodes, in
    which case the duplicate endpoint x_N is dropped.
    """
    v = _periodic_samples(profile_values)
    M = len(v)
    N = M // 2
    spectrum = np.fft.fft(v) / M
    n = np.arange(-N, N + 1)
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    return FourierCoeffs(sign * spectrum[n % M])


def idft(coeffs: FourierCoeffs, real: bool | None = None) -> np.ndarray:
    """Grid samples at x_{-N}..x_{N-1} from coefficients; modes +-N carry weight 1/2."""
    N = coeffs.n_half
    M = 2 * N
    n = coeffs.modes
    sign = np.where(n % 2 == 0, 1.0, -1.0)
    scaled = sign * coeffs.coeffs * M
    full = np.zeros(M, dtype=complex)
    full[n[1:-1] % M] = scaled[1:-1]
    full[N] = 0.5 * (scaled[0] + scaled[-1])
    out = np.fft.ifft(full)
    if real is None:
        real = np.allclose(coeffs.coeffs[::-1], np.conj(coeffs.coeffs), rtol=0, atol=1e-14 * (1 + np.abs(coeffs.coeffs).max()))
    return out.real if real else out


# ---------------------------------------------------------------- diagnostics


def check_residuals(profile: WaveProfile) -> tuple[float, float]:
    """(max first-integral residual, trapezoid value of the zero-mean integral)."""
    c2 = profile.params.c**2
    eta = profile.values
    s = profile.slope
    first = 0.5 * (c2 - 2.0 * eta) * s * s + 0.5 * eta * eta - profile.params.energy
    if profile.kind == "peaked":
        # any one-sided value gives the same product since c^2 - 2 eta = 0 there
        first = np.delete(first, profile.grid.center)
    sq = profile.slope_for_quadrature()
    if profile.kind == "peaked":
        sq = np.array(sq)
        sq[profile.grid.center] = math.sqrt(0.5 * sum(v * v for v in profile.peak_slopes))
    integrand = (eta + sq * sq)[:-1]
    zero_mean = profile.grid.step * float(np.sum(integrand))
    return float(np.max(np.abs(first))), abs(zero_mean)


@dataclass(frozen=True)
class SweepRow:
    c: float
    energy: float
    amplitude: float
    kind: str = "smooth"
    error: str | None = None


def _sweep_row(c: float) -> SweepRow:
    try:
        energy = solve_energy_for_period(c)
        return SweepRow(c, energy, math.sqrt(2.0 * energy))
    except (DomainError, ConvergenceError) as exc:
        return SweepRow(c, math.nan, math.nan, error=f"{type(exc).__name__}: {exc}")


def amplitude_sweep(
    c_values: Sequence[float], grid: Grid | None = None, jobs: int = 1
) -> list[SweepRow]:
    """Amplitude-speed table, with the peaked endpoint appended.

    The crest height of the smooth profile is pinned at sqrt(2*energy), so
    ``grid`` is accepted for interface symmetry but not needed.
    """
    cs = [float(c) for c in c_values]
    if jobs > 1 and len(cs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_row, cs))
    else:
        rows = [_sweep_row(c) for c in cs]
    rows.append(SweepRow(C_STAR, ENERGY_STAR, math.pi**2 / 16.0, kind="peaked"))
    return rows
