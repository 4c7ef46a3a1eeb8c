import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qpjacobi import GOLDEN, SILVER, continued_fraction, diophantine_check, torus_norm
from qpjacobi.frequency import convergent_grid_size

FIB = [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89, 144, 233, 377, 610, 987]


def test_golden_partial_quotients_are_ones():
    cf = continued_fraction(GOLDEN, 12)
    assert all(a == 1 for a in cf.partial_quotients)


def test_golden_denominators_are_fibonacci():
    q = continued_fraction(GOLDEN, 14).denominators
    assert list(q[:15]) == FIB[:15]


def test_silver_partial_quotients_are_twos():
    cf = continued_fraction(SILVER, 10)
    assert all(a == 2 for a in cf.partial_quotients[1:])


def test_rational_terminates():
    cf = continued_fraction(3 / 8, 10)
    assert cf.terminating
    p, q = cf.convergents[-1]
    assert (p, q) == (3, 8)


@given(st.floats(-50, 50, allow_nan=False))
def test_torus_norm_range_and_periodicity(t):
    v = torus_norm(t)
    assert 0.0 <= v <= 0.5
    assert math.isclose(v, torus_norm(t + 7), abs_tol=1e-9)


def test_torus_norm_vectorized():
    out = torus_norm(np.array([0.1, 0.9, 2.5]))
    np.testing.assert_allclose(out, [0.1, 0.1, 0.5])


def test_golden_is_diophantine():
    rep = diophantine_check(GOLDEN, c=0.3, alpha=1.0, n_max=10000)
    assert rep.passes
    assert rep.worst_margin > 0


def test_rational_fails_diophantine():
    rep = diophantine_check(0.25, c=0.01, alpha=1.0, n_max=100)
    assert not rep.passes
    assert rep.worst_n % 4 == 0


def test_convergent_grid_size_is_a_denominator():
    q = convergent_grid_size(GOLDEN, 4096)
    assert q in continued_fraction(GOLDEN, 40).denominators
    assert q >= 4096 / 2


@pytest.mark.parametrize("omega", [GOLDEN, SILVER, math.sqrt(2) - 1, math.e - 2])
def test_convergents_approximate(omega):
    cf = continued_fraction(omega, 12)
    for p, q in cf.convergents[1:]:
        assert abs(omega - p / q) < 1.0 / q ** 2
