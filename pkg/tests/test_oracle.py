from fractions import Fraction as F

import numpy as np
import pytest

from afp.oracle import haar_isometry, haar_unitary, two_free_projections_spectrum


def test_unitarity_small():
    U = haar_unitary(2, seed=1)
    assert np.abs(U.conj().T @ U - np.eye(2)).max() < 1e-10


def test_unitarity_moderate():
    U = haar_unitary(64, seed=5)
    assert np.abs(U.conj().T @ U - np.eye(64)).max() < 1e-10


def test_isometry_columns_orthonormal():
    V = haar_isometry(50, 20, seed=3)
    assert np.abs(V.conj().T @ V - np.eye(20)).max() < 1e-10


def test_haar_rejects_small_n():
    with pytest.raises(ValueError):
        haar_unitary(1, seed=0)


def test_fixed_seed_reproduces():
    assert np.array_equal(haar_unitary(8, seed=11), haar_unitary(8, seed=11))
    assert not np.array_equal(haar_unitary(8, seed=11), haar_unitary(8, seed=12))


def test_trace_second_moment():
    # E|tr U|^2 = 1 for Haar unitaries
    N, n = 20, 200
    ss = np.random.SeedSequence(2024).spawn(n)
    vals = np.array([abs(np.trace(haar_unitary(N, s))) ** 2 / N for s in ss])
    sigma = vals.std(ddof=1) / np.sqrt(n)
    assert abs(vals.mean() - 1 / N) <= 3 * sigma


def test_phase_fix_removes_bias():
    # without phase normalization the diagonal of Q is biased toward positive reals
    ss = np.random.SeedSequence(9).spawn(300)
    d = np.array([haar_unitary(4, s)[0, 0] for s in ss])
    assert abs(d.real.mean()) < 0.1


@pytest.mark.parametrize("a, b, N", [(0, F(1, 2), 1000), (F(1, 2), 1, 1000), (F(1, 2), F(1, 2), 100)])
def test_spectrum_rejects_bad_input(a, b, N):
    with pytest.raises(ValueError):
        two_free_projections_spectrum(a, b, N=N, seed=0, reps=1)


def test_spectrum_deterministic_and_normalized():
    e1 = two_free_projections_spectrum(F(3, 4), F(1, 2), N=600, seed=7, reps=2)
    e2 = two_free_projections_spectrum(F(3, 4), F(1, 2), N=600, seed=7, reps=2)
    assert e1 == e2
    assert abs(sum(e1.histogram) - 1) < 1e-9
    assert 0 <= e1.atom0 <= 1 and 0 <= e1.atom1 <= 1
    assert abs(e1.atom1 - 0.25) < 0.02
    assert set(e1.to_dict()) == {"a", "b", "N", "seed", "atom1", "atom0", "histogram"}


def test_spectrum_atom_at_zero():
    # P meet (1 - Q) has trace max(a - b, 0)
    e = two_free_projections_spectrum(F(3, 4), F(1, 8), N=800, seed=1, reps=1)
    assert abs(e.atom0 - 0.625) < 0.02
    assert e.atom1 < 0.02
