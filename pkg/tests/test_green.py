import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpjacobi import GOLDEN, build_window, eigensystem, eigenvalues
from qpjacobi.green import (SingularResolventError, decay_certificate, green_entry, green_matrix,
                            poisson_residual, poisson_sweep, window_green)
from qpjacobi.models import random_model


@given(st.integers(1, 16), st.floats(0, 1), st.floats(-6, 6), st.floats(0.01, 1))
@settings(max_examples=40, deadline=None)
def test_cramer_matches_inverse_complex_energy(N, x, Er, Ei):
    pair = random_model(np.random.default_rng(N), K=3)
    E = complex(Er, Ei)
    G = green_matrix(pair, x, GOLDEN, N, E).to_complex()
    H = build_window(pair, x, GOLDEN, 0, N - 1).dense()
    np.testing.assert_allclose(G, np.linalg.inv(H - E * np.eye(N)), atol=1e-9, rtol=1e-9)


def test_cramer_complex_phase(random_pair):
    z = 0.3 + 0.1j
    E = 0.4 + 0.2j
    G = green_matrix(random_pair, z, GOLDEN, 9, E).to_complex()
    H = build_window(random_pair, z, GOLDEN, 0, 8).dense()
    np.testing.assert_allclose(G, np.linalg.inv(H - E * np.eye(9)), atol=1e-10)


def test_green_entry_cases(random_pair):
    E = -10.0
    full = green_matrix(random_pair, 0.2, GOLDEN, 8, E).to_complex()
    for (j, k), case in [((1, 5), "j<k"), ((6, 2), "j>k"), ((3, 3), "j=k")]:
        g = green_entry(random_pair, 0.2, GOLDEN, 8, E, j, k)
        assert g.formula_case == case
        assert g.value == pytest.approx(full[j, k])
    with pytest.raises(IndexError):
        green_entry(random_pair, 0.2, GOLDEN, 8, E, 8, 0)


def test_singular_energy_rejected(am3):
    E = eigenvalues(am3, 0.1, GOLDEN, 0, 9)[3]
    with pytest.raises(SingularResolventError):
        green_entry(am3, 0.1, GOLDEN, 10, E, 0, 9)
    with pytest.raises(SingularResolventError):
        window_green(build_window(am3, 0.1, GOLDEN, 0, 9), E)


def test_large_window_entries_stay_scaled(am3):
    # corner entries decay like exp(-L N): far below double range at N = 800
    G = green_matrix(am3, 0.1, GOLDEN, 800, 0.123)
    assert float(G[0, 799].log_magnitude) < -700
    assert np.isfinite(float(G[0, 799].log_magnitude))


def test_poisson_single_site(am3):
    w = build_window(am3, 0.2, GOLDEN, 0, 29)
    sd = eigensystem(w)
    psi = sd.eigenvectors[:, 11]
    assert poisson_residual(w, psi, sd.eigenvalues[11], (5, 20), 12) < 1e-9


def test_poisson_sweep_all_small(random_pair):
    w = build_window(random_pair, 0.4, GOLDEN, 0, 39)
    sd = eigensystem(w)
    sweep = poisson_sweep(w, sd.eigenvalues, sd.eigenvectors)
    assert sweep.max_residual < 1e-8
    assert sweep.windows_checked > 0
    assert sweep.per_eigenvalue.shape == (40,)


def test_poisson_sweep_agrees_with_single_site(random_pair):
    w = build_window(random_pair, 0.4, GOLDEN, 0, 11)
    sd = eigensystem(w)
    sweep = poisson_sweep(w, sd.eigenvalues, sd.eigenvectors, floor=1e-3)
    worst = 0.0
    i = 4
    for a in range(1, 11):
        for b in range(a, 11):
            sp = np.linalg.eigvalsh(w.dense()[a:b + 1, a:b + 1])
            if np.min(np.abs(sp - sd.eigenvalues[i])) < 1e-3:
                continue
            for m in range(a, b + 1):
                worst = max(worst, poisson_residual(w, sd.eigenvectors[:, i], sd.eigenvalues[i], (a, b), m))
    # both are round-off; they must agree at that level
    assert sweep.per_eigenvalue[i] == pytest.approx(worst, abs=1e-11)


def test_decay_certificate_in_positive_regime(am3):
    N = 64
    spec = eigenvalues(am3, 0.1, GOLDEN, 0, N - 1)
    gaps = np.diff(spec)
    i = int(np.argmax(gaps))
    E = 0.5 * (spec[i] + spec[i + 1])
    cert = decay_certificate(am3, 0.1, GOLDEN, N, E, K=2 * math.log(N) ** 2)
    assert cert.gamma >= math.log(3) - 0.05
    if cert.applicable:
        assert cert.holds and cert.max_violation <= 0
