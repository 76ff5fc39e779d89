"""Acceptance checks, shared by the ``verify`` command and the test suite.

Each check returns a CheckResult with the measured numbers. Results depend
only on the inputs (fixed seeds), so repeated runs give identical records;
wall-clock timings are returned separately and never written to files.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import chareval, hessian, peakedops, waveprofile
from .waveprofile import C_STAR, Grid

__all__ = ["CheckResult", "CHECKS", "run_all", "run_check"]


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    detail: str = ""


def _decreasing_or_floor(values, floor):
    """Each value is below its predecessor, or both sit under the roundoff floor."""
    return all(b < a or (a <= floor and b <= floor) for a, b in zip(values, values[1:]))


def check_period_anchor() -> tuple[CheckResult, dict]:
    t0 = time.perf_counter()
    devs = {}
    for c in (1.02, 1.05, C_STAR):
        devs[f"{c:.6f}"] = abs(waveprofile.period(c**4 / 8.0, c) - 4.0 * c * math.sqrt(2.0))
    at_star = abs(waveprofile.period(waveprofile.ENERGY_STAR, C_STAR) - 2.0 * math.pi)
    elapsed = time.perf_counter() - t0
    ok = max(devs.values()) <= 1e-12 and at_star <= 1e-12 and elapsed < 1.0
    return CheckResult(1, "period closed-form anchor", ok,
                       {"max_dev_4c_sqrt2": max(devs.values()), "dev_2pi_at_cstar": at_star},
                       "T(c^4/8, c) = 4 c sqrt2 and T = 2 pi at c_star"), {"seconds": elapsed}


def check_profile_solver() -> tuple[CheckResult, dict]:
    measured, timings, ok = {}, {}, True
    for c in (1.03, 1.07):
        t0 = time.perf_counter()
        prof = waveprofile.smooth_profile(c, Grid(300), tol=1e-14)
        timings[f"profile_{c}"] = time.perf_counter() - t0
        x = prof.grid.nodes[prof.grid.center + 1 : -1]
        eta = prof.values[prof.grid.center + 1 : -1]
        inv = max(abs(waveprofile.profile_inverse_map(e, prof.params) - xx) for e, xx in zip(eta, x))
        first, zero_mean = waveprofile.check_residuals(prof)
        series = [zero_mean]
        for n in (600,):
            series.append(waveprofile.check_residuals(waveprofile.smooth_profile(c, Grid(n)))[1])
        converging = all(b <= a / 3.0 or b <= 1e-12 for a, b in zip(series, series[1:]))
        measured[f"c={c}"] = {"max_inverse_residual": inv, "first_integral": first,
                              "zero_mean_N300_N600": series}
        ok &= inv < 1e-13 and first < 1e-10 and zero_mean < 1e-3 and converging
        ok &= timings[f"profile_{c}"] < 10.0
    return CheckResult(2, "profile solver residuals", ok, measured,
                       "zero-mean convergence: ratio >= 3 per doubling or already below 1e-12"), timings


def check_peaked_fourier() -> tuple[CheckResult, dict]:
    coeffs = waveprofile.dft(waveprofile.peaked_profile(Grid(300)).periodic_values)
    m = np.arange(1, 51)
    decay = float(np.max(np.abs(4.0 * m**2 * coeffs.coeffs[300 + m].real - 1.0)))
    mean_dev = abs(coeffs[0].real + math.pi**2 / 48.0)
    ok = decay <= 0.02 and mean_dev <= 1e-10
    return CheckResult(3, "peaked Fourier decay", ok,
                       {"max_decay_dev_m_le_50": decay, "mean_coeff_dev": mean_dev,
                        "aliasing_prediction_mean": math.pi**2 / (48.0 * 300**2)},
                       "literal thresholds; the 2N-point DFT carries an O(1/N^2) aliasing term"), {}


def check_small_amplitude() -> tuple[CheckResult, dict]:
    c = 1.001
    vals = hessian.eig(hessian.assemble_L_fd(waveprofile.smooth_profile(c, Grid(300)))).lowest(4).real
    target = np.array([-1.0, c * c - 1.0, c * c - 1.0, 4.0 * c * c - 1.0])
    dev = np.abs(vals - target)
    return CheckResult(4, "small-amplitude spectral anchor", bool(dev.max() <= 5e-3),
                       {"eigenvalues": vals.tolist(), "target": target.tolist(),
                        "deviation": dev.tolist()}), {}


def check_translation_mode() -> tuple[CheckResult, dict]:
    c = 1.03
    series = {"fd": [], "fourier": []}
    for n in (300, 600):
        prof = waveprofile.smooth_profile(c, Grid(n))
        series["fd"].append(abs(hessian.eig(hessian.assemble_L_fd(prof)).eigenvalues[2]))
        four = hessian.eig(hessian.assemble_L_fourier(waveprofile.dft(prof.periodic_values), c))
        series["fourier"].append(float(abs(four.eigenvalues[2])))
    ok = all(v[0] < 1e-3 and _decreasing_or_floor(v, 1e-10) for v in series.values())
    return CheckResult(5, "translation mode", ok, {"abs_lambda3_N300_N600": series},
                       "decrease required unless both values are below the 1e-10 roundoff floor"), {}


def check_sweep_pattern() -> tuple[CheckResult, dict]:
    rows = hessian.eigen_sweep(hessian.DEFAULT_SWEEP, Grid(300), "both")
    fd = [r for r in rows if r.method == "fd"]
    lam1 = [r.eigenvalues[0].real for r in fd]
    monotone = all(b < a for a, b in zip(lam1, lam1[1:]))
    parity_ok = all(r.error is None and r.parities[1] == "even" and r.parities[2] == "odd"
                    and r.parities[3] == "even" for r in rows)
    peaked = []
    for n in (100, 200, 300):
        peaked.append(float(hessian.eig(hessian.assemble_L_peaked(Grid(n), "fd")).eigenvalues[0]))
    diverging = all(b < a for a, b in zip(peaked, peaked[1:]))
    gaps = {f"{r.c}": r.cross_method_gap for r in fd}
    return CheckResult(6, "sweep monotonicity and parity", monotone and parity_ok and diverging,
                       {"lambda1_fd": lam1, "parities": [list(r.parities) for r in rows],
                        "peaked_fd_lambda1_N100_200_300": peaked, "cross_method_gap": gaps}), {}


def check_kernel() -> tuple[CheckResult, dict]:
    series = {"one": [], "x_minus_pi": [], "wave_slope": []}
    for n in (128, 256, 512, 1024):
        ops = peakedops.interval_ops(n)
        series["one"].append(ops.norm(peakedops.apply_A(np.ones_like(ops.x))))
        series["x_minus_pi"].append(ops.norm(peakedops.apply_A(ops.x - math.pi)))
        series["wave_slope"].append(ops.norm(peakedops.apply_A(ops.wave_slope)))
    at512 = {k: v[2] for k, v in series.items()}
    ok = all(v <= 1e-3 for v in at512.values()) and all(
        _decreasing_or_floor(v, 1e-12) for v in series.values())
    return CheckResult(7, "peaked kernel identities", ok,
                       {"N128_256_512_1024": series},
                       "decrease required unless values are below the 1e-12 roundoff floor"), {}


def check_strip_interior() -> tuple[CheckResult, dict]:
    t0 = time.perf_counter()
    a_rows, d_rows = {}, {}
    ok = True
    for lam in (0.1, 0.3, 0.5, 0.2 + 2j, 0.7 + 3j):
        probe = peakedops.a_eigenfunction(lam, Grid(1024))
        w = probe.diagnostics["wronskian_deviation"]
        a_rows[str(complex(lam))] = {"residual": probe.residual_norm, "wronskian_deviation": w}
        ok &= probe.residual_norm <= 1e-4 and w <= 1e-8
    for lam in (0.3 + 0.5j, 0.2, 0.6j):
        probe = peakedops.d0_eigenfunction(lam)
        d_rows[str(complex(lam))] = {"residual": probe.residual_norm,
                                     "constraint": probe.constraint_residual}
        ok &= probe.residual_norm <= 1e-6
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 30.0
    return CheckResult(8, "strip interior eigenfunctions", bool(ok),
                       {"a_eigenfunction": a_rows, "d0_eigenfunction": d_rows}), {"seconds": elapsed}


def check_resolvent() -> tuple[CheckResult, dict]:
    n_half = 256
    rng = np.random.default_rng(20240611)
    worst = {}
    for lam in (1.0, 1.5, 0.9 + 5j):
        ratios = []
        for _ in range(20):
            g = rng.standard_normal(2 * n_half + 1)
            ratios.append(peakedops.resolvent_probe(lam, g, n_half, tolerance=math.inf)[1])
        worst[str(complex(lam))] = max(ratios)
    return CheckResult(9, "resolvent bound", max(worst.values()) <= 1.0,
                       {"max_bound_ratio": worst, "constant": peakedops.RESOLVENT_CONSTANT}), {}


def check_conservation() -> tuple[CheckResult, dict]:
    drifts = {}
    for dt in (1e-3, 5e-4):
        traj = chareval.evolve(chareval.initial_state(1025, 1e-2), 5.0, dt)
        drifts[dt] = (traj.drift("mass_zeta"), traj.drift("blowup_invariant"))
    small = all(v <= 1e-8 for v in drifts[1e-3])
    ratios = [drifts[1e-3][k] / drifts[5e-4][k] if drifts[5e-4][k] > 0 else math.inf for k in range(2)]
    sixteen = all(10.0 <= r <= 25.0 for r in ratios)
    return CheckResult(10, "nonlinear conservation", small and sixteen,
                       {"drift_dt1e-3": list(drifts[1e-3]), "drift_dt5e-4": list(drifts[5e-4]),
                        "halving_ratio": ratios, "drift_within_1e-8": small,
                        "ratio_near_16": sixteen},
                       "ratio band [10, 25] taken as 'about 16'"), {}


def check_instability() -> tuple[CheckResult, dict]:
    t0 = time.perf_counter()
    out, ok = {}, True
    for delta in (1e-2, 1e-3):
        res = chareval.instability_experiment(delta)
        traj = res.trajectory
        reached = res.time_to_ten_delta is not None and (
            traj.breaking_time is None or res.time_to_ten_delta < traj.breaking_time)
        out[str(delta)] = {"fitted_rate": res.fitted_rate, "relative_error": res.relative_error,
                           "time_to_ten_delta": res.time_to_ten_delta,
                           "breaking_time": traj.breaking_time}
        ok &= res.relative_error <= 0.15 and reached
    elapsed = time.perf_counter() - t0
    return CheckResult(11, "instability rate", bool(ok and elapsed < 60.0),
                       {"runs": out, "theory_rate": chareval.THEORY_RATE}), {"seconds": elapsed}


CHECKS: dict[int, Callable[[], tuple[CheckResult, dict]]] = {
    1: check_period_anchor,
    2: check_profile_solver,
    3: check_peaked_fourier,
    4: check_small_amplitude,
    5: check_translation_mode,
    6: check_sweep_pattern,
    7: check_kernel,
    8: check_strip_interior,
    9: check_resolvent,
    10: check_conservation,
    11: check_instability,
}


def run_check(number: int) -> tuple[CheckResult, dict]:
    return CHECKS[number]()


def run_all(numbers=None) -> list[tuple[CheckResult, dict]]:
    return [run_check(k) for k in (numbers or sorted(CHECKS))]
