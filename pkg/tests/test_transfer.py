import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpjacobi import GOLDEN, birkhoff_sums, count_zeros_disk, lyapunov, transfer_product
from qpjacobi.models import almost_mathieu, free_laplacian, random_model
from qpjacobi.operator import orbit
from qpjacobi.transfer import SingularCocycleError, energy_slice, phase_slice


def step_product(pair, z, N, E):
    a, b, tb = orbit(pair, np.complex128(z), GOLDEN, 0, N + 1)
    M = np.eye(2, dtype=complex)
    for k in range(N):
        M = np.array([[a[k] - E, -tb[k]], [b[k + 1], 0.0]]) @ M
    return M


@given(st.integers(1, 30), st.floats(0, 1), st.floats(-4, 4))
@settings(max_examples=40, deadline=None)
def test_analytic_product_matches_direct(N, x, E):
    pair = random_model(np.random.default_rng(N), K=2, b_shift=1.0)
    want = step_product(pair, x, N, E)
    got = transfer_product(pair, x, GOLDEN, N, E, "a").to_array()
    assert np.max(np.abs(got - want)) <= 1e-11 * np.max(np.abs(want))


def test_plain_variant_divides_by_b(random_pair):
    N, x, E = 9, 0.31, 0.7
    a = transfer_product(random_pair, x, GOLDEN, N, E, "a").to_array()
    p = transfer_product(random_pair, x, GOLDEN, N, E, "plain").to_array()
    _, b, _ = orbit(random_pair, np.complex128(x), GOLDEN, 0, N + 1)
    np.testing.assert_allclose(p * np.prod(b[1:N + 1]), a, rtol=1e-12)


def test_unimodular_variant_has_unit_determinant(random_pair):
    M = transfer_product(random_pair, 0.2, GOLDEN, 12, 0.4, "u").to_array()
    assert abs(abs(np.linalg.det(M)) - 1.0) < 1e-10


def test_cadence_does_not_change_product(am3):
    a = transfer_product(am3, 0.1, GOLDEN, 200, 0.5, "a", cadence=1)
    b = transfer_product(am3, 0.1, GOLDEN, 200, 0.5, "a", cadence=16)
    assert abs(float(a.log_norm()) - float(b.log_norm())) < 1e-10


def test_long_product_stays_finite(am3):
    M = transfer_product(am3, 0.1, GOLDEN, 5000, 0.5)
    assert np.isfinite(float(M.log_norm()))
    assert float(M.log_norm()) > 5000 * math.log(3) * 0.9


def test_free_laplacian_lyapunov_outside_band():
    # constant cocycle: L = arccosh(|E|/2) for |E| > 2
    est = lyapunov(free_laplacian(), 0.0, GOLDEN, 3.0, 2048, grid_size=89)
    assert est.value == pytest.approx(math.acosh(1.5), abs=1e-3)


def test_herman_bound(am3):
    for E in (-4.0, 0.0, 2.5):
        est = lyapunov(am3, 0.0, GOLDEN, E, 128)
        assert est.value >= math.log(3) - 0.05
        assert est.relation_residual < 1e-8


def test_lyapunov_relation_with_nonconstant_b(random_pair):
    est = lyapunov(random_pair, 0.0, GOLDEN, 0.3, 32, grid_size=987)
    assert est.relation_residual < 1e-8
    assert est.D == pytest.approx(est.D_N, abs=0.05)


def test_lyapunov_argument_checks(am3):
    with pytest.raises(ValueError):
        lyapunov(am3, 0.0, GOLDEN, 0.0, 0)
    with pytest.raises(ValueError):
        lyapunov(am3, 0.0, GOLDEN, 0.0, 8, variant="bogus")


def test_birkhoff_sums(random_pair):
    N, z = 10, 0.17
    s = birkhoff_sums(random_pair, z, GOLDEN, N)
    _, b, tb = orbit(random_pair, np.complex128(z), GOLDEN, 0, N + 1)
    assert float(s.S) == pytest.approx(np.log(np.abs(b[:N])).sum(), abs=1e-12)
    assert float(s.S_tilde) == pytest.approx(np.log(np.abs(tb[:N])).sum(), abs=1e-12)


@pytest.mark.parametrize("roots", [[0.0], [0.1, 0.2, -0.3], [1 + 1j, 1 - 1j, 0.5, 3.0]])
def test_zero_count_polynomial(roots):
    f = lambda w: np.prod([w - r for r in roots], axis=0)
    for radius in (0.05, 0.25, 1.0, 2.0, 5.0):
        want = sum(abs(r) < radius for r in roots)
        assert count_zeros_disk(f, 0.0, radius) == want


def test_zero_count_nudges_off_contour_zero():
    f = lambda w: (w - 1.0) * (w + 0.2)
    k, r = count_zeros_disk(f, 0.0, 1.0, return_radius=True)
    assert k == (2 if r > 1.0 else 1)
    assert abs(r - 1.0) <= 0.01


def test_zero_count_matches_spectrum(am3):
    spec = np.linalg.eigvalsh(np.diag(2 * 3.0 * np.cos(2 * np.pi * (0.1 + np.arange(20) * GOLDEN)))
                              - np.eye(20, k=1) - np.eye(20, k=-1))
    f = energy_slice(am3, 0.1, GOLDEN, 0, 19)
    assert count_zeros_disk(f, 0.0, 3.0) == int(np.sum(np.abs(spec) < 3.0))


def test_phase_slice_is_analytic_in_phase(am3):
    g = phase_slice(am3, GOLDEN, 0.5, 0, 5)
    h = 1e-6
    z = 0.3 + 0.05j
    # Cauchy-Riemann: d/dx = -i d/dy
    dx = (g(np.array([z + h])).to_complex() - g(np.array([z - h])).to_complex()) / (2 * h)
    dy = (g(np.array([z + 1j * h])).to_complex() - g(np.array([z - 1j * h])).to_complex()) / (2 * h)
    assert abs(dx[0] + 1j * dy[0]) < 1e-4 * abs(dx[0])


def test_singular_cocycle_error_type():
    assert issubclass(SingularCocycleError, ValueError)


def test_herman_bound_random_phases():
    pair = almost_mathieu(2.0)
    est = lyapunov(pair, 0.0, GOLDEN, 1.0, 64)
    assert est.value >= math.log(2.0) - 0.05
