import numpy as np
import pytest

from qpjacobi import GOLDEN
from qpjacobi.avalanche import (ap_check, ap_sum, chain_blocks, chain_residuals, chain_zero_profile,
                                random_ap_sequence, real_zeros)
from qpjacobi.operator import determinant_sequence


def test_diagonal_sequence_is_exact():
    mats = [np.diag([2.0 ** (10 + k), 2.0 ** -(10 + k)]) for k in range(8)]
    rep = ap_check(mats)
    assert rep.conditions_hold
    assert rep.discrepancy <= 1e-12


def test_ap_sum_two_matrices_is_zero():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(2, 2, 2))
    assert abs(ap_sum([A, B])) < 1e-12


@pytest.mark.parametrize("n", [3, 8, 20])
def test_random_sequences_meet_hypotheses(n, rng):
    mats = random_ap_sequence(rng, n, mu=1e3)
    rep = ap_check(mats)
    assert rep.conditions_hold
    assert rep.n == n and rep.mu >= 1e3
    assert rep.discrepancy <= 20 * n / rep.mu


def test_bad_sequence_fails_conditions():
    big = np.diag([1e3, 1e-3])
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    rep = ap_check([big, rot @ big, big])
    assert not rep.conditions_hold


def test_chain_blocks_residual_small(am3):
    rep = chain_blocks(am3, 0.1, GOLDEN, 0.3, [16, 16, 16, 16])
    assert rep.lengths == (16, 16, 16, 16)
    assert rep.starts == (0, 16, 32, 48)
    f = determinant_sequence(am3, 0.1, GOLDEN, 0, 64, 0.3)[-1]
    assert rep.log_abs_f == pytest.approx(float(f.log_magnitude), abs=1e-10)
    assert rep.residual < 1e-6


def test_chain_residuals_vectorized(am3):
    z = np.array([0.11, 0.27, 0.83])
    r = chain_residuals(am3, z, GOLDEN, 0.3, [16, 16, 16])
    for zi, ri in zip(z, r):
        assert ri == pytest.approx(chain_blocks(am3, zi, GOLDEN, 0.3, [16, 16, 16]).residual, abs=1e-9)


def test_real_zeros_are_zeros(am3):
    zs = real_zeros(am3, GOLDEN, 0.3, 16, 512)
    assert zs.size > 0
    f = determinant_sequence(am3, zs, GOLDEN, 0, 16, 0.3)[-1]
    g = determinant_sequence(am3, zs + 1e-3, GOLDEN, 0, 16, 0.3)[-1]
    assert np.all(f.log_magnitude < g.log_magnitude - 5)


def test_zero_profile_shrinks_with_block_length(am3):
    p16 = chain_zero_profile(am3, GOLDEN, 0.3, [16] * 4)
    p32 = chain_zero_profile(am3, GOLDEN, 0.3, [32] * 4)
    assert p32.median() < p16.median()
