import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cached_profile
from peakwave.errors import ConvergenceError, DomainError
from peakwave.waveprofile import (
    C_STAR,
    ENERGY_STAR,
    FourierCoeffs,
    Grid,
    ModelParams,
    amplitude_sweep,
    check_residuals,
    dft,
    idft,
    newton_profile,
    peaked_eta,
    peaked_profile,
    peaked_slope,
    period,
    profile_inverse_map,
    profile_map_derivative,
    solve_energy_for_period,
)

# Energy levels giving period 2pi, from a 40-digit root solve
ENERGY_REFERENCE = {
    1.03: 0.05849519009588918293711696886449613926915,
    1.07: 0.1303450713436954512963536452657054831903,
}


def test_constants():
    assert C_STAR**4 / 8.0 == pytest.approx(ENERGY_STAR, rel=1e-15)
    assert period(ENERGY_STAR, C_STAR) == pytest.approx(2 * math.pi, abs=1e-12)


@pytest.mark.parametrize("c", [1.001, 1.02, 1.05, 1.1])
def test_period_at_critical_energy(c):
    assert period(c**4 / 8, c) == pytest.approx(4 * c * math.sqrt(2), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(min_value=1.001, max_value=1.11), st.floats(min_value=1e-6, max_value=1.0))
def test_period_decreases_with_energy(c, frac):
    crit = c**4 / 8
    longer, shorter = period(0.5 * frac * crit, c), period(frac * crit, c)
    assert 4 * c * math.sqrt(2) - 1e-12 <= shorter <= longer + 1e-13 <= 2 * math.pi * c + 1e-12


def test_period_small_energy_limit():
    c = 1.05
    assert period(1e-14 * c**4, c) == pytest.approx(2 * math.pi * c, rel=1e-6)


@pytest.mark.parametrize("energy, c", [(0.0, 1.05), (1.0, 1.05), (0.01, 1.0), (math.nan, 1.05)])
def test_period_domain(energy, c):
    with pytest.raises(DomainError):
        period(energy, c)


@pytest.mark.parametrize("c", sorted(ENERGY_REFERENCE))
def test_energy_root_matches_reference(c):
    assert solve_energy_for_period(c) == pytest.approx(ENERGY_REFERENCE[c], abs=2e-15)


def test_energy_root_near_linear_limit():
    energy = solve_energy_for_period(1.001)
    assert abs(period(energy, 1.001) - 2 * math.pi) <= 1e-12


def test_energy_root_requires_admissible_speed():
    with pytest.raises((DomainError, ConvergenceError)):
        solve_energy_for_period(1.2)


def test_inverse_map_endpoints_and_derivative():
    params = ModelParams(1.07, ENERGY_REFERENCE[1.07])
    a = params.amplitude
    assert profile_inverse_map(a, params) == 0.0
    assert profile_inverse_map(-a, params) == pytest.approx(math.pi, abs=1e-13)
    eta, step = 0.1, 1e-6
    fd = (profile_inverse_map(eta + step, params) - profile_inverse_map(eta - step, params)) / (2 * step)
    assert profile_map_derivative(eta, params) == pytest.approx(fd, rel=1e-7)


def test_grid_validation_and_layout():
    with pytest.raises(DomainError):
        Grid(7)
    g = Grid(8)
    assert len(g.nodes) == 17 and len(g.periodic_nodes) == 16
    assert g.nodes[g.center] == 0.0 and g.step == pytest.approx(math.pi / 8)


def test_profile_is_even_read_only_and_solves_map(profile_107):
    p = profile_107
    assert not p.values.flags.writeable
    assert np.array_equal(p.values, p.values[::-1])
    assert np.array_equal(p.slope, -p.slope[::-1])
    assert p.values[p.grid.center] == pytest.approx(p.params.amplitude, abs=1e-15)
    assert p.newton_residual <= 1e-13
    x = p.grid.nodes[p.grid.center + 1 : -1 : 37]
    eta = p.values[p.grid.center + 1 : -1 : 37]
    for xx, e in zip(x, eta):
        assert profile_inverse_map(e, p.params) == pytest.approx(xx, abs=1e-13)


def test_profile_residuals(profile_103):
    first, zero_mean = check_residuals(profile_103)
    assert first < 1e-12 and zero_mean < 1e-12


def test_profile_rejects_peaked_speed():
    with pytest.raises(DomainError):
        newton_profile(ModelParams(C_STAR, ENERGY_STAR), Grid(16))


def test_fine_grid_profile_converges():
    p = cached_profile(1.07, 600)
    assert p.newton_residual < 5e-14


def test_peaked_profile_values():
    g = Grid(64)
    p = peaked_profile(g)
    assert p.kind == "peaked"
    assert p.values[g.center] == pytest.approx(math.pi**2 / 16)
    assert p.values[0] == pytest.approx(-math.pi**2 / 16)
    assert p.peak_slopes == pytest.approx((math.pi / 4, -math.pi / 4))
    x = np.linspace(-3.0, 3.0, 13)
    # the leading coefficient vanishes only at the crest
    assert np.allclose(C_STAR**2 - 2 * peaked_eta(x), np.abs(x) * (2 * math.pi - np.abs(x)) / 4, atol=1e-15)
    pos = x[x > 0]
    assert np.allclose(peaked_slope(pos), (pos - math.pi) / 4)
    assert np.allclose(peaked_slope(-pos), -(pos - math.pi) / 4)


def test_peaked_first_integral_and_mean_rate():
    residuals = []
    for n in (150, 300, 600):
        first, zero_mean = check_residuals(peaked_profile(Grid(n)))
        assert first < 1e-14
        residuals.append(zero_mean)
    ratios = [a / b for a, b in zip(residuals, residuals[1:])]
    assert all(3.5 < r < 4.5 for r in ratios)


@pytest.mark.parametrize("n_half", [8, 64, 300])
def test_peaked_mean_coefficient_has_exact_aliasing_term(n_half):
    coeffs = dft(peaked_profile(Grid(n_half)).periodic_values)
    expected = -math.pi**2 / 48 + math.pi**2 / (48 * n_half**2)
    assert coeffs[0].real == pytest.approx(expected, abs=1e-15)


def test_dft_of_single_modes():
    g = Grid(16)
    x = g.periodic_nodes
    c = dft(np.cos(3 * x))
    assert c[3] == pytest.approx(0.5) and c[-3] == pytest.approx(0.5)
    assert np.sum(np.abs(c.coeffs)) == pytest.approx(1.0)
    s = dft(np.sin(2 * x))
    assert s[2] == pytest.approx(-0.5j) and s[-2] == pytest.approx(0.5j)


def test_dft_accepts_closed_grid():
    g = Grid(16)
    closed = np.cos(g.nodes)
    assert np.allclose(dft(closed).coeffs, dft(closed[:-1]).coeffs)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=8, max_value=64), st.integers(min_value=0, max_value=2**31))
def test_dft_roundtrip(n_half, seed):
    v = np.random.default_rng(seed).standard_normal(2 * n_half)
    back = idft(dft(v))
    assert np.isrealobj(back)
    assert np.max(np.abs(back - v)) < 1e-12


def test_fourier_coeffs_indexing():
    fc = FourierCoeffs(np.arange(17, dtype=complex))
    assert fc.n_half == 8 and fc[-8] == 0 and fc[8] == 16 and fc[0] == 8


def test_amplitude_sweep_rows():
    rows = amplitude_sweep([1.03, 1.07, 1.2])
    assert [r.kind for r in rows] == ["smooth", "smooth", "smooth", "peaked"]
    assert rows[0].amplitude < rows[1].amplitude < rows[3].amplitude
    assert rows[2].error is not None and math.isnan(rows[2].amplitude)
    assert rows[3].amplitude == pytest.approx(math.pi**2 / 16)


def test_amplitude_sweep_parallel_matches_serial():
    assert amplitude_sweep([1.02, 1.06], jobs=2) == amplitude_sweep([1.02, 1.06])


def test_peaked_coefficients_equal_aliased_decay():
    # the 2N-point DFT folds 1/(4 k^2) over k = m + 2N j, which sums to this closed form
    n_half = 300
    coeffs = dft(peaked_profile(Grid(n_half)).periodic_values)
    m = np.arange(1, n_half)
    folded = math.pi**2 / (16 * n_half**2 * np.sin(math.pi * m / (2 * n_half)) ** 2)
    assert np.max(np.abs(coeffs.coeffs[n_half + m].real - folded)) < 1e-15
    assert np.max(np.abs(coeffs.coeffs[n_half + m].imag)) < 1e-15


@pytest.mark.parametrize("c", [1.01, 1.03, 1.05, 1.07, 1.09])
def test_profiles_monotone_and_nondegenerate(c):
    p = cached_profile(c, 300)
    inner = p.values[p.grid.center : -1]
    assert np.all(np.diff(inner) < 0)
    assert np.all(c * c - 2 * p.values > 0)
    assert period(p.params.energy, c) == pytest.approx(2 * math.pi, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=8, max_value=128), st.integers(min_value=0, max_value=2**31))
def test_dft_roundtrip_tolerance(n_half, seed):
    v = np.random.default_rng(seed).uniform(-10, 10, 2 * n_half)
    assert np.max(np.abs(idft(dft(v)) - v)) <= 1e-12


def test_peaked_decay_deviation_shrinks_like_inverse_square():
    # for each fixed mode the aliasing error falls by four per doubling of N
    m = np.arange(1, 26)
    devs = []
    for n_half in (100, 200, 400):
        coeffs = dft(peaked_profile(Grid(n_half)).periodic_values)
        devs.append(np.abs(4 * m**2 * coeffs.coeffs[n_half + m].real - 1))
    assert np.all(devs[0] / devs[1] > 3.9) and np.all(devs[1] / devs[2] > 3.9)
    assert np.max(devs[2]) < 1e-2
