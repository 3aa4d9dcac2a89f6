"""Random matrix oracle for the atoms of two free projections.

If P and Q are free projections of traces a and b, the spectral measure of
PQP has an atom at 1 of mass max(a + b - 1, 0) (the trace of P meet Q).
For large N a diagonal projection P and a Haar-rotated projection
Q = U diag(1,..,1,0,..,0) U* are asymptotically free, so counting
eigenvalues of PQP near 1 estimates the atom mass.

Conventions: atom masses are global traces, i.e. eigenvalue counts divided
by N; the histogram describes PQP restricted to the range of P and is
normalized to total mass 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from fractions import Fraction

import numpy as np

__all__ = [
    "SpectrumEstimate",
    "haar_unitary",
    "haar_isometry",
    "two_free_projections_spectrum",
]

N_BINS = 20
WINDOW = 5  # atom window is [1 - WINDOW/N, 1]


@dataclass(frozen=True)
class SpectrumEstimate:
    a: Fraction
    b: Fraction
    N: int
    seed: int
    reps: int
    atom1: float
    atom0: float
    histogram: tuple
    bin_edges: tuple
    atom1_reps: tuple

    def to_dict(self) -> dict:
        return {
            "a": str(self.a),
            "b": str(self.b),
            "N": self.N,
            "seed": self.seed,
            "atom1": self.atom1,
            "atom0": self.atom0,
            "histogram": list(self.histogram),
        }


def _complex_gaussian(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def _phase_fixed_qr(Z):
    Q, R = np.linalg.qr(Z)
    d = np.diagonal(R)
    # normalize so the distribution is exactly Haar, not QR-biased
    return Q * (d / np.abs(d))


def haar_unitary(N: int, seed) -> np.ndarray:
    """Haar distributed N x N unitary (phase-fixed QR of a complex Ginibre matrix)."""
    if N < 2:
        raise ValueError(f"N must be at least 2, got {N}")
    rng = np.random.default_rng(seed)
    return _phase_fixed_qr(_complex_gaussian(rng, (N, N)))


def haar_isometry(N: int, k: int, seed) -> np.ndarray:
    """First k columns of a Haar unitary, sampled directly as an N x k isometry."""
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    rng = np.random.default_rng(seed)
    return _phase_fixed_qr(_complex_gaussian(rng, (N, k)))


def _one_rep(ra: int, rb: int, N: int, seed) -> np.ndarray:
    # Q = V V* with V a Haar isometry; PQP on range(P) is W W*, W = V[:ra]
    V = haar_isometry(N, rb, seed)
    W = V[:ra, :]
    if ra <= rb:
        eig = np.linalg.eigvalsh(W @ W.conj().T)
    else:
        eig = np.linalg.eigvalsh(W.conj().T @ W)
        eig = np.concatenate([eig, np.zeros(ra - rb)])
    return np.clip(eig, 0.0, 1.0)


def two_free_projections_spectrum(a, b, N: int = 2000, seed: int = 42, reps: int = 3) -> SpectrumEstimate:
    """Estimate the atoms of PQP for projections of traces a and b."""
    a, b = Fraction(a), Fraction(b)
    if not (0 < a < 1 and 0 < b < 1):
        raise ValueError("traces must lie strictly between 0 and 1")
    if N < 500:
        raise ValueError(f"N must be at least 500, got {N}")
    if reps < 1:
        raise ValueError("reps must be positive")
    ra, rb = round(a * N), round(b * N)
    if ra in (0, N) or rb in (0, N):
        raise ValueError(f"degenerate ranks {ra}, {rb} for N = {N}")

    delta = WINDOW / N
    edges = np.linspace(0.0, 1.0, N_BINS + 1)
    seeds = np.random.SeedSequence(seed).spawn(reps)
    a1, a0, counts = [], [], np.zeros(N_BINS)
    for ss in seeds:
        eig = _one_rep(ra, rb, N, ss)
        a1.append(np.count_nonzero(eig >= 1 - delta) / N)
        a0.append(np.count_nonzero(eig <= delta) / N)
        counts += np.histogram(eig, bins=edges)[0]

    hist = counts / counts.sum()
    return SpectrumEstimate(
        a=a,
        b=b,
        N=N,
        seed=seed,
        reps=reps,
        atom1=math.fsum(sorted(a1)) / reps,
        atom0=math.fsum(sorted(a0)) / reps,
        histogram=tuple(float(h) for h in hist),
        bin_edges=tuple(float(e) for e in edges),
        atom1_reps=tuple(a1),
    )
