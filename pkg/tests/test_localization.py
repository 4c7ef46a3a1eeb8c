import math

import numpy as np
import pytest

from qpjacobi import GOLDEN
from qpjacobi.localization import (center_proximity, fitted_rate, localization_center,
                                   localization_profile, restriction_distance, tail_mass)
from qpjacobi.models import free_laplacian


def synthetic(n=81, c=30, rate=0.7):
    psi = np.exp(-rate * np.abs(np.arange(n) - c))
    return psi / np.linalg.norm(psi)


def test_center_and_ties():
    assert localization_center(synthetic()) == 30
    assert localization_center(np.array([0.5, -1.0, 1.0])) == 1


def test_tail_mass_exact():
    psi = synthetic()
    w = psi ** 2
    assert tail_mass(psi, 30, 5) == pytest.approx(w[:25].sum() + w[36:].sum())
    assert tail_mass(psi, 30, 100) == 0.0
    with pytest.raises(ValueError):
        tail_mass(psi, 30, -1)


def test_fitted_rate_recovers_exponent():
    assert fitted_rate(synthetic(rate=0.7)) == pytest.approx(0.7, abs=1e-10)


def test_fitted_rate_nan_when_too_short():
    assert math.isnan(fitted_rate(np.ones(4)))


def test_profile_almost_mathieu(am3):
    prof = localization_profile(am3, 0.1, GOLDEN, 128, 40, Q=10, Qs=(5, 20))
    assert set(prof.tail_mass) == {5, 10, 20}
    assert prof.tail_mass[20] <= prof.tail_mass[10] <= prof.tail_mass[5]
    # positive Lyapunov exponent log 3: eigenvectors decay at about that rate
    assert prof.fitted_rate > 0.8
    assert prof.restriction_distance < 1e-6


def test_free_laplacian_is_extended():
    prof = localization_profile(free_laplacian(), 0.0, GOLDEN, 128, 64, Q=10)
    assert prof.tail_mass[10] > 0.5


def test_restriction_distance_full_window_is_zero(am3):
    from qpjacobi import eigenvalues
    E = eigenvalues(am3, 0.1, GOLDEN, 0, 31)[5]
    assert restriction_distance(am3, 0.1, GOLDEN, E, (0, 31)) < 1e-12


def test_center_proximity_vacuous_and_active(am3):
    r = center_proximity(am3, 0.1, GOLDEN, 64, 0, 63, sigma=1e-3, Q=10)
    assert r.vacuous and r.holds
    r = center_proximity(am3, 0.1, GOLDEN, 64, 10, 11, sigma=1e3, Q=10)
    assert not r.vacuous
    assert r.holds == (abs(r.centers[0] - r.centers[1]) < 20)
