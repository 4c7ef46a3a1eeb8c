import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpjacobi import TrigPolynomial, evaluate, load_model, mean_log_modulus, truncate
from qpjacobi.models import almost_mathieu, geometric_model
from qpjacobi.sampling import (ModelFileError, SamplingPair, StripError, model_from_dict,
                               save_model, strip_bounds)

coef = st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False)


@st.composite
def polys(draw, max_degree=4):
    K = draw(st.integers(0, max_degree))
    return TrigPolynomial(np.array(draw(st.lists(coef, min_size=2 * K + 1, max_size=2 * K + 1))))


def naive(p, z):
    return sum(c * np.exp(2j * math.pi * n * z) for n, c in zip(p.indices, p.coeffs))


@given(polys(), st.floats(0, 1), st.floats(-0.3, 0.3))
def test_horner_matches_naive_sum(p, x, y):
    z = complex(x, y)
    assert abs(p(z) - naive(p, z)) <= 1e-10 * (1 + p.l1_norm() * math.exp(2 * math.pi * p.degree * 0.3))


@given(polys(), st.floats(0, 1))
def test_tilde_is_conjugate_on_real_line(p, x):
    assert abs(p.tilde()(x) - np.conj(p(x))) <= 1e-10 * (1 + p.l1_norm())


@given(polys(), st.floats(0, 1))
@settings(max_examples=50)
def test_derivative_matches_central_difference(p, x):
    h = 1e-6
    fd = (p(x + h) - p(x - h)) / (2 * h)
    assert abs(p.derivative()(x) - fd) <= 1e-5 * (1 + p.l1_norm() * (2 * math.pi * p.degree) ** 3)


def test_cosine():
    p = TrigPolynomial.cosine(2.0)
    x = np.linspace(0, 1, 7)
    np.testing.assert_allclose(evaluate(p, x).real, 2 * np.cos(2 * np.pi * x), atol=1e-14)


def test_real_valued_needs_symmetric_coefficients():
    with pytest.raises(ValueError):
        TrigPolynomial(np.array([1.0, 0.0, 2.0]), real_valued=True)


def test_even_length_rejected():
    with pytest.raises(ValueError):
        TrigPolynomial(np.array([1.0, 2.0]))


def test_strip_enforced():
    p = TrigPolynomial.cosine(1.0)
    with pytest.raises(StripError):
        evaluate(p, 0.1 + 0.6j, rho0=0.5)


def test_pair_shift_tilde_and_derivatives(random_pair):
    x = 0.37
    assert abs(random_pair.tilde_b(x) - np.conj(random_pair.b(x))) < 1e-12
    h = 1e-6
    fd = (random_pair.a(x + h) - random_pair.a(x - h)) / (2 * h)
    assert abs(random_pair.da(x) - fd) < 1e-5


@pytest.mark.parametrize("r", [0.3, 0.7])
def test_mean_log_modulus_inside_unit_disk(r):
    # Jensen: int log|1 + r e(x)| = 0 for r < 1
    b = TrigPolynomial(np.array([0, 1, r], dtype=complex))
    D, err = mean_log_modulus(b)
    assert abs(D) < 1e-9 and err < 1e-9


@pytest.mark.parametrize("r", [1.5, 4.0])
def test_mean_log_modulus_outside_unit_disk(r):
    b = TrigPolynomial(np.array([0, 1, r], dtype=complex))
    D, _ = mean_log_modulus(b)
    assert abs(D - math.log(r)) < 1e-9


def test_mean_log_modulus_shifted_line():
    # |e(x + i y)| = exp(-2 pi y)
    b = TrigPolynomial(np.array([0, 0, 1], dtype=complex))
    D, _ = mean_log_modulus(b, y=0.1)
    assert abs(D + 2 * math.pi * 0.1) < 1e-12


def test_truncation_of_finite_polynomial_is_exact():
    p = TrigPolynomial.cosine(3.0)
    t = truncate(p, 4, 0.5)
    assert t.certified and t.certificate == 0.0


def test_truncation_certificate_bounds_tail():
    rho0 = 0.4
    coeffs = lambda n: 0.9 * math.exp(-math.pi * rho0 * abs(n))
    t = truncate(coeffs, 6, rho0, C=1.0)
    assert t.certified
    # actual sup of the tail on |Im z| < rho0/3 is at most the majorant sum
    z = np.linspace(0, 1, 101) + 1j * rho0 / 3 * 0.999
    tail = sum(coeffs(n) * np.exp(2j * math.pi * n * z) for n in range(-200, 201) if abs(n) > 6)
    assert np.max(np.abs(tail)) <= t.certificate


def test_truncation_flags_violated_decay():
    t = truncate({0: 1.0, 5: 1.0}, 2, 0.5, C=1.0)
    assert not t.certified and t.certificate is None


def test_model_roundtrip(tmp_path, random_pair):
    path = tmp_path / "m.json"
    save_model(random_pair, path)
    back = load_model(path)
    np.testing.assert_allclose(back.a.coeffs, random_pair.a.coeffs, atol=1e-15)
    np.testing.assert_allclose(back.b.coeffs, random_pair.b.coeffs, atol=1e-15)


def test_model_file_errors(tmp_path):
    with pytest.raises(ModelFileError):
        model_from_dict({"a": [[1, 1.0, 0.0]], "b": [[0, 1.0, 0.0]]})
    with pytest.raises(ModelFileError):
        model_from_dict({"a": [[0, 1.0, 0.0]], "b": [[0, 0.0, 0.0]]})
    with pytest.raises(ModelFileError):
        load_model(tmp_path / "missing.json")


def test_strip_bounds_almost_mathieu():
    sb = strip_bounds(almost_mathieu(3.0), grid=256, y_points=5)
    # |2 lam cos(2 pi z)| grows like lam e^{2 pi |y|}
    assert sb.sup_a >= 6.0
    assert sb.sup_b == pytest.approx(1.0)


def test_geometric_model_strip():
    p = geometric_model(K=10, ratio=0.5)
    assert isinstance(p, SamplingPair)
    assert p.rho0 == pytest.approx(math.log(2) / math.pi)
