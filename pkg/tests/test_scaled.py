import numpy as np
from hypothesis import given, strategies as st

from qpjacobi import ScaledMatrix2, ScaledValue

finite = st.complex_numbers(min_magnitude=1e-100, max_magnitude=1e100, allow_nan=False,
                            allow_infinity=False)


@given(finite)
def test_roundtrip(z):
    v = ScaledValue.from_complex(z)
    m = abs(complex(v.mantissa))
    assert 0.5 <= m < 1.0
    assert abs(complex(v.to_complex()) - z) <= 1e-15 * abs(z)


@given(finite, finite)
def test_product_and_quotient(u, w):
    a, b = ScaledValue.from_complex(u), ScaledValue.from_complex(w)
    assert abs(complex((a * b).to_complex()) - u * w) <= 1e-14 * abs(u * w)
    assert abs(complex((a / b).to_complex()) - u / w) <= 1e-14 * abs(u / w)


def test_zero_is_kept():
    v = ScaledValue.from_complex(0.0)
    assert bool(v.is_zero)
    assert np.isneginf(v.log_magnitude)


def test_no_overflow_in_long_products():
    v = ScaledValue.from_complex(1e200)
    acc = v
    for _ in range(20):
        acc = acc * v
    assert np.isclose(float(acc.log_magnitude), 21 * 200 * np.log(10))


def test_matrix_log_norm():
    m = np.array([[3.0, 0.0], [0.0, 1e-3]], dtype=complex)
    sm = ScaledMatrix2.from_array(m)
    assert np.isclose(float(sm.log_norm()), np.log(3.0))
    np.testing.assert_allclose(sm.to_array(), m)
    assert np.isclose(float(sm.log_abs_det()), np.log(3e-3))
