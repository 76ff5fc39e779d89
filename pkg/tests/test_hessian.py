import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cached_profile
from peakwave.errors import DegenerateCoefficientError, DomainError
from peakwave.hessian import (
    OperatorMatrix,
    _fd_from_values,
    assemble_L_fd,
    assemble_L_fourier,
    assemble_L_peaked,
    eig,
    eigen_sweep,
    fourier_constant_check,
    read_matrix,
    translation_residual,
    write_matrix,
)
from peakwave.waveprofile import C_STAR, FourierCoeffs, Grid, dft


def _discrete_laplacian_symbol(c, n_half):
    """Eigenvalues of -c^2 D+D- - 1 on the periodic grid, from the exact symbol."""
    h = math.pi / n_half
    n = np.arange(-n_half, n_half)
    return np.sort(4 * c * c / h**2 * np.sin(n * h / 2) ** 2 - 1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=1.0, max_value=1.2), st.integers(min_value=8, max_value=48))
def test_fd_stencil_on_flat_state_matches_symbol(c, n_half):
    h = math.pi / n_half
    L = _fd_from_values(np.zeros(2 * n_half), c, -np.ones(2 * n_half), h)
    assert np.allclose(np.linalg.eigvalsh(L), _discrete_laplacian_symbol(c, n_half), atol=1e-9 * c * c / h**2)


@settings(max_examples=20, deadline=None)
@given(st.floats(min_value=1.0, max_value=1.2), st.integers(min_value=8, max_value=48))
def test_fourier_on_flat_state_is_diagonal(c, n_half):
    L = assemble_L_fourier(FourierCoeffs(np.zeros(2 * n_half + 1, dtype=complex)), c).entries
    n = np.arange(-n_half, n_half + 1)
    assert np.allclose(L, np.diag(c * c * n * n - 1.0))


def test_fd_matrix_symmetric_and_reflection_invariant(profile_103):
    m = assemble_L_fd(profile_103)
    A = m.entries
    assert m.symmetric and np.array_equal(A, A.T)
    p = m.reflection()
    assert np.allclose(A[np.ix_(p, p)], A, rtol=0, atol=1e-9 * np.abs(A).max())


def test_fourier_matrix_reflection_invariant(profile_103):
    m = assemble_L_fourier(dft(profile_103.periodic_values), 1.03)
    p = m.reflection()
    assert np.allclose(m.entries[np.ix_(p, p)], m.entries, atol=1e-9 * np.abs(m.entries).max())


def test_fd_rejects_peaked_and_degenerate_profiles(profile_103):
    with pytest.raises(DomainError):
        assemble_L_fd(dataclasses.replace(profile_103, kind="peaked"))
    tall = dataclasses.replace(profile_103, values=np.array(profile_103.values) * 20.0,
                               slope=np.array(profile_103.slope))
    with pytest.raises(DegenerateCoefficientError):
        assemble_L_fd(tall)


def test_operator_matrix_validation():
    with pytest.raises(DomainError):
        OperatorMatrix(np.zeros((2, 3)), "physical", True, 8)
    with pytest.raises(DomainError):
        OperatorMatrix(np.zeros((2, 2)), "hybrid", True, 8)


def test_eig_sorted_labelled_and_accurate(profile_103):
    spec = eig(assemble_L_fd(profile_103))
    assert np.all(np.diff(spec.eigenvalues) >= 0)
    assert spec.parities[:5] == ("even", "even", "odd", "even", "odd")
    assert np.max(spec.residuals[:10]) < 1e-9 * spec.matrix_norm
    v = spec.eigenvectors[:, 2]
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert v[2] - v[0] > 0


def test_translation_mode_is_slope(profile_103):
    spec = eig(assemble_L_fd(profile_103))
    v = spec.eigenvectors[:, 2]
    d = np.asarray(profile_103.slope[:-1])
    cos = abs(v @ d) / np.linalg.norm(d)
    assert cos > 0.999


def test_translation_residual_second_order():
    r1 = translation_residual(cached_profile(1.03, 150))
    r2 = translation_residual(cached_profile(1.03, 300))
    assert 3.5 < r1 / r2 < 4.5


def test_fd_approaches_fourier_at_second_order():
    gaps = []
    for n in (150, 300):
        prof = cached_profile(1.03, n)
        fd = eig(assemble_L_fd(prof)).lowest(4).real
        four = eig(assemble_L_fourier(dft(prof.periodic_values), 1.03)).lowest(4).real
        gaps.append(np.abs(fd - four))
    assert np.max(gaps[1]) < 2e-4
    assert np.all(gaps[0] / gaps[1] > 3.5)


def test_identity_coefficient_choice():
    check = fourier_constant_check(1.03, Grid(100))
    assert check["max_dev_minus_identity"] < 5e-3
    assert check["max_dev_minus_pi_identity"] > 1.0


def test_degenerate_cluster_is_split_by_parity():
    # flat state: every mode n != 0 pairs with -n
    L = _fd_from_values(np.zeros(32), 1.05, -np.ones(32), math.pi / 16)
    spec = eig(OperatorMatrix(L, "physical", True, 16))
    assert spec.parities[0] == "even"
    assert spec.parities[1:5] == ("even", "odd", "even", "odd")


@pytest.mark.parametrize("method", ["fd", "fourier"])
def test_peaked_lowest_eigenvalue_diverges(method):
    lams = [eig(assemble_L_peaked(Grid(n), method)).eigenvalues[0].real for n in (50, 100, 200)]
    assert lams[0] > lams[1] > lams[2]
    assert lams[2] / lams[1] == pytest.approx(2.0, rel=0.1)


def test_peaked_method_validation():
    with pytest.raises(DomainError):
        assemble_L_peaked(Grid(16), "spline")


def test_sweep_rows_and_errors():
    rows = eigen_sweep([1.03, 1.2], Grid(64), "both", include_peaked=True)
    assert [(r.c, r.method) for r in rows] == [
        (1.03, "fd"), (1.03, "fourier"), (1.2, "fd"), (1.2, "fourier"),
        (C_STAR, "fd"), (C_STAR, "fourier")]
    assert rows[0].error is None and rows[2].error is not None
    assert rows[0].cross_method_gap == rows[1].cross_method_gap
    assert rows[0].grey_zone == (rows[0].cross_method_gap > 1e-3)
    with pytest.raises(DomainError):
        eigen_sweep([1.03], Grid(16), "spline")


def test_sweep_parallel_matches_serial():
    serial = eigen_sweep([1.02, 1.04], Grid(48), "fd")
    parallel = eigen_sweep([1.02, 1.04], Grid(48), "fd", jobs=2)
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.eigenvalues, b.eigenvalues) and a.parities == b.parities


@pytest.mark.parametrize("complex_entries", [False, True])
def test_matrix_file_roundtrip(tmp_path, complex_entries):
    rng = np.random.default_rng(7)
    A = rng.standard_normal((5, 5))
    if complex_entries:
        A = A + 1j * rng.standard_normal((5, 5))
    write_matrix(tmp_path / "m.txt", OperatorMatrix(A, "fourier", False, 8))
    back, basis = read_matrix(tmp_path / "m.txt")
    assert basis == "fourier" and np.array_equal(back, A)


def test_fd_spectrum_real():
    spec = eig(assemble_L_fd(cached_profile(1.05, 100)))
    assert np.max(np.abs(np.imag(spec.eigenvalues))) <= 1e-10


def test_cross_method_gap_grows_toward_peaked_speed():
    rows = eigen_sweep((1.03, 1.07, 1.09, 1.1), Grid(300), "both")
    gaps = [r.cross_method_gap for r in rows if r.method == "fd"]
    assert gaps[0] < 1e-3
    assert all(a < b for a, b in zip(gaps, gaps[1:]))


def test_sort_is_ascending_with_parity_tiebreak():
    L = _fd_from_values(np.zeros(32), 1.05, -np.ones(32), math.pi / 16)
    spec = eig(OperatorMatrix(L, "physical", True, 16))
    vals = np.round(spec.eigenvalues, 9)
    for k in range(len(vals) - 1):
        assert vals[k] <= vals[k + 1]
        if vals[k] == vals[k + 1]:
            assert (spec.parities[k], spec.parities[k + 1]) == ("even", "odd")
