"""Special functions and quadrature kernels.

Only what the rest of the package needs: the complete elliptic integral of
the second kind by the arithmetic-geometric mean, an adaptive quadrature
wrapper that regularizes inverse-square-root endpoint singularities, and
uniform-grid rules (end-corrected trapezoid, cumulative integrals) used on
periodic and interval grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, DomainError

__all__ = [
    "QuadratureResult",
    "complete_elliptic_E",
    "adaptive_quad",
    "adaptive_quad_complex",
    "gregory_weights",
    "cumulative_integral",
]

_AGM_MAX_ITER = 64


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    evaluations: int

    def __post_init__(self):
        if not self.error_estimate >= 0:
            raise ValueError("error_estimate must be non-negative")
        if self.evaluations < 1:
            raise ValueError("evaluations must be at least 1")


def complete_elliptic_E(kappa: float) -> float:
    """Complete elliptic integral of the second kind, E(kappa).

    ``kappa`` is the modulus (not the parameter m = kappa**2). Uses the
    Gauss AGM recursion E = K * (1 - sum 2**(n-1) c_n**2) with K = pi/(2 a_N).

    >>> round(complete_elliptic_E(0.0), 15) == round(math.pi / 2, 15)
    True
    """
    kappa = float(kappa)
    if not math.isfinite(kappa) or kappa < 0.0 or kappa > 1.0:
        raise DomainError(f"modulus kappa must lie in [0, 1], got {kappa!r}")
    if kappa == 1.0:
        return 1.0
    a = 1.0
    b = math.sqrt((1.0 - kappa) * (1.0 + kappa))
    total = 0.5 * kappa * kappa
    power = 0.5
    gap = math.inf
    for _ in range(_AGM_MAX_ITER):
        # the last-ulp gap may never close; stop once it stops shrinking
        if a - b <= 1e-16 * a or a - b >= gap:
            break
        gap = a - b
        c = 0.5 * gap
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        power *= 2.0
        total += power * c * c
    else:
        raise ConvergenceError(f"AGM did not converge for kappa={kappa!r}")
    return (math.pi / (2.0 * a)) * (1.0 - total)


def adaptive_quad(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-12,
    *,
    singular_endpoints: bool = False,
    endpoint_offsets: bool = False,
    max_subintervals: int = 500,
) -> QuadratureResult:
    """Integrate ``f`` over [a, b] adaptively (Gauss-Kronrod, via QUADPACK).

    With ``singular_endpoints`` the variable is changed to
    x = a + (b - a) sin(theta)**2, which cancels (x - a)**-1/2 and
    (b - x)**-1/2 behaviour at either end. The integrand is never evaluated
    at the endpoints themselves. With ``endpoint_offsets`` as well, ``f`` is
    called as f(x, x - a, b - x) with both distances formed without
    cancellation, so integrands like 1/sqrt(1 - x) stay accurate right up
    to the endpoint.

    Raises ConvergenceError when the subinterval budget is exhausted or the
    integrand behaves badly; roundoff-limited results are returned with
    their (larger) error estimate.
    """
    if not (math.isfinite(a) and math.isfinite(b)) or not a < b:
        raise DomainError(f"need finite a < b, got [{a!r}, {b!r}]")
    if not tol > 0:
        raise DomainError(f"tol must be positive, got {tol!r}")
    if endpoint_offsets and not singular_endpoints:
        raise DomainError("endpoint_offsets requires singular_endpoints=True")

    if singular_endpoints:
        width = b - a

        def integrand(theta):
            s = math.sin(theta)
            c = math.cos(theta)
            left = width * s * s
            if endpoint_offsets:
                value = f(a + left, left, width * c * c)
            else:
                value = f(a + left)
            return value * 2.0 * width * s * c

        lo, hi = 0.0, 0.5 * math.pi
    else:
        integrand, lo, hi = f, a, b

    # quad appends a message (4th element) only when QUADPACK flags a problem
    out = integrate.quad(
        integrand, lo, hi, epsabs=tol, epsrel=0.0, limit=max_subintervals,
        full_output=1,
    )
    value, err, info = out[:3]
    neval = int(info["neval"])
    # ier 2 (roundoff) and 4 (extrapolation roundoff) are accepted
    hard_failure = len(out) > 3 and info.get("last", 0) >= max_subintervals and err > tol
    if hard_failure or not math.isfinite(value):
        raise ConvergenceError(
            f"adaptive_quad: estimate {err:.3e} above tol {tol:.1e} after "
            f"{neval} evaluations on [{a}, {b}]"
        )
    return QuadratureResult(float(value), float(abs(err)), max(neval, 1))


def adaptive_quad_complex(
    f: Callable[[float], complex], a: float, b: float, tol: float = 1e-12, **kw
) -> tuple[complex, float]:
    """Complex-valued integrand: real and imaginary parts integrated separately."""
    re = adaptive_quad(lambda x: f(x).real, a, b, tol, **kw)
    im = adaptive_quad(lambda x: f(x).imag, a, b, tol, **kw)
    return complex(re.value, im.value), math.hypot(re.error_estimate, im.error_estimate)


# Gregory end corrections; the interior weight is 1.
_GREGORY = {
    2: (0.5,),
    4: (3 / 8, 7 / 6, 23 / 24),
    6: (95 / 288, 317 / 240, 23 / 30, 793 / 720, 157 / 160),
}


def gregory_weights(n: int, h: float, order: int = 6) -> np.ndarray:
    """Weights of the end-corrected trapezoid rule on ``n`` uniform nodes.

    order=2 is the plain trapezoid rule.
    """
    ends = _GREGORY[order]
    if n < 2 * len(ends):
        raise DomainError(f"need at least {2 * len(ends)} nodes for order {order}")
    w = np.full(n, float(h))
    k = len(ends)
    w[:k] = np.asarray(ends) * h
    w[n - k:] = np.asarray(ends[::-1]) * h
    return w


def cumulative_integral(y: np.ndarray, dx: float, initial: float = 0.0) -> np.ndarray:
    """Running integral of uniformly sampled ``y`` (cumulative Simpson).

    Exact for quadratics; complex input is handled componentwise.
    """
    y = np.asarray(y)
    if np.iscomplexobj(y):
        return (cumulative_integral(y.real, dx, 0.0)
                + 1j * cumulative_integral(y.imag, dx, 0.0) + initial)
    return integrate.cumulative_simpson(y, dx=dx, initial=0.0) + initial
