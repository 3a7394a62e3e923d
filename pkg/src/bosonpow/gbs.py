"""Gaussian boson sampling with squeezed-vacuum inputs.

Conventions: the interferometer acts on annihilation operators as
``a_out = U a_in`` and covariance matrices are written in the
``(a_1..a_M, a_1^dag..a_M^dag)`` ordering. For the same physical device the
Fock-state module's row-input ``U`` corresponds to ``U.T`` here.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .binning import BinnedDistribution, ModeBinning, _grid
from .errors import CapacityError, DimensionError, ParameterError, SymmetryError
from .linalg import SYMMETRY_TOL, det_and_inverse, hafnian_exact
from .rng import generator
from .sampler import draw_indices

log = logging.getLogger(__name__)

HAFNIAN_CAP = 12


@dataclass(frozen=True)
class GbsSetup:
    U: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=complex)
        r = np.asarray(self.r, dtype=float)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise DimensionError("interferometer must be square")
        if r.shape != (U.shape[0],):
            raise DimensionError(f"need one squeezing value per mode ({U.shape[0]}), got {r.shape}")
        if not np.all(np.isfinite(r)):
            raise ParameterError("squeezing parameters must be finite")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "r", r)

    @property
    def M(self) -> int:
        return self.U.shape[0]

    @property
    def n_squeezed(self) -> int:
        return int(np.count_nonzero(self.r))

    @property
    def mean_photons(self) -> float:
        return float(np.sum(np.sinh(self.r) ** 2))

    @classmethod
    def calibrated(cls, U, n_squeezed: int, n_target: float) -> "GbsSetup":
        """Squeeze the first ``n_squeezed`` modes equally so the mean photon number is ``2 n_target``."""
        U = np.asarray(U, dtype=complex)
        if not 1 <= n_squeezed <= U.shape[0]:
            raise ParameterError("n_squeezed must lie in 1..M")
        r = np.zeros(U.shape[0])
        r[:n_squeezed] = math.asinh(math.sqrt(2 * n_target / n_squeezed))
        return cls(U, r)


@dataclass
class GbsState:
    sigma: np.ndarray
    sigma_q: np.ndarray
    B: np.ndarray
    det_sigma_q: float
    sigma_q_inv: np.ndarray

    @property
    def M(self) -> int:
        return self.B.shape[0]


def build_gbs_state(setup: GbsSetup) -> GbsState:
    U, r = setup.U, setup.r
    M = setup.M
    ch, sh = np.diag(np.cosh(r)), np.diag(np.sinh(r))
    S = np.block([[ch, sh], [sh, ch]]).astype(complex)
    W = np.block([[U, np.zeros((M, M))], [np.zeros((M, M)), U.conj()]])
    sigma = 0.5 * W @ S @ S.conj().T @ W.conj().T
    sigma_q = sigma + 0.5 * np.eye(2 * M)
    det, inv = det_and_inverse(sigma_q)
    B = U @ np.diag(np.tanh(r)) @ U.T
    if not np.allclose(B, B.T, atol=SYMMETRY_TOL, rtol=0):
        raise SymmetryError("B matrix lost symmetry")
    return GbsState(sigma, sigma_q, B, float(det.real), inv)


def reduced_matrix(B: np.ndarray, Y: Sequence[int]) -> np.ndarray:
    """Drop rows/columns with ``y_i = 0`` and repeat the others ``y_i`` times."""
    idx = [i for i, y in enumerate(Y) for _ in range(int(y))]
    return B[np.ix_(idx, idx)]


def gbs_probability(state: GbsState, Y: Sequence[int]) -> float:
    """``|Haf(B_Y)|^2 / (prod y_i! sqrt(det sigma_Q))``.

    The ``prod y_i!`` factor normalises outcomes with repeated photons in a
    mode; for collision-free outcomes it is 1.
    """
    if len(Y) != state.M:
        raise DimensionError(f"outcome has {len(Y)} modes, expected {state.M}")
    if min(Y) < 0:
        raise ParameterError("photon counts must be non-negative")
    total = int(sum(Y))
    if total % 2:
        return 0.0
    if total > HAFNIAN_CAP:
        raise CapacityError(f"{total} photons exceeds the Hafnian capacity of {HAFNIAN_CAP}")
    haf = hafnian_exact(reduced_matrix(state.B, Y))
    norm = math.prod(math.factorial(int(y)) for y in Y)
    return float(abs(haf) ** 2 / (norm * math.sqrt(state.det_sigma_q)))


def _z_diag(state: GbsState, theta: np.ndarray) -> np.ndarray:
    ph = np.exp(1j * theta)
    return np.concatenate([ph, ph])


def _char_det(state: GbsState, theta: np.ndarray) -> complex:
    K = np.eye(2 * state.M) - state.sigma_q_inv
    return complex(state.det_sigma_q * np.linalg.det(np.eye(2 * state.M) - _z_diag(state, theta)[:, None] * K))


def gbs_char_at(state: GbsState, theta: Sequence[float], steps: int = 32) -> complex:
    """Characteristic function ``E[exp(i theta . n)]`` at real angles ``theta``.

    Equal to ``[det(sigma_Q) det(I - Z (I - sigma_Q^-1))]^(-1/2)``; the
    ``det(sigma_Q)`` factor normalises ``chi(0) = 1``. The square-root branch
    is tracked continuously along the segment from 0 to ``theta``; the step
    count doubles until no step moves the root by more than a quarter of its
    modulus.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (state.M,):
        raise DimensionError(f"need {state.M} angles, got {theta.shape}")
    if not np.any(theta):
        return complex(1.0)
    while True:
        root = 1.0 + 0j
        ok = True
        for t in np.linspace(0.0, 1.0, steps + 1)[1:]:
            cand = np.sqrt(_char_det(state, t * theta))
            if abs(cand - root) > abs(cand + root):
                cand = -cand
            if abs(cand - root) > 0.25 * max(abs(root), abs(cand)):
                ok = False
                break
            root = cand
        if ok or steps >= 4096:
            return complex(1.0 / root)
        steps *= 2


def gbs_char_function(state: GbsState, c: Sequence[int], N: int) -> complex:
    """Characteristic function on the ``(N+1)``-point grid: angles ``2 pi c / (N+1)``."""
    c = np.asarray(c, dtype=float)
    return gbs_char_at(state, 2 * np.pi * c / (N + 1))


def gbs_mode_binned(state: GbsState, b: ModeBinning, N: int) -> BinnedDistribution:
    """Binned photon-count distribution by DFT over ``Z_{N+1}^d``.

    Photon numbers are not conserved, so every bin count is only known modulo
    ``N+1``: label ``n`` collects all outcomes whose bin totals are congruent
    to ``n``. The reconstruction is faithful when the mass above ``N`` photons
    per bin is negligible.
    """
    if b.M != state.M:
        raise DimensionError("binning and state disagree on M")
    d = b.d
    labels_of_mode = b.labels()
    chi = np.empty((N + 1,) * d, dtype=complex)
    for c in _grid(N, d):
        theta = 2 * np.pi * np.asarray(c, dtype=float)[labels_of_mode] / (N + 1)
        chi[c] = gbs_char_at(state, theta)
    full = np.fft.fftn(chi) / (N + 1) ** d
    labels = list(itertools.product(range(N + 1), repeat=d))
    vals = np.array([full[n] for n in labels])
    resid = float(np.max(np.abs(vals.imag)))
    if resid > 1e-6:
        log.warning("GBS binned DFT left an imaginary residue of %.3g", resid)
    probs = vals.real.copy()
    negative = probs < 0
    clamped = float(-probs[negative].sum())
    probs[negative] = 0.0
    return BinnedDistribution("gbs-mode", labels, probs / probs.sum(), clamped)


def truncated_outcomes(M: int, max_total: int) -> list[tuple[int, ...]]:
    """All even-total occupation tuples with at most ``max_total`` photons."""
    out = []
    for total in range(0, max_total + 1, 2):
        for combo in itertools.combinations_with_replacement(range(M), total):
            y = [0] * M
            for m in combo:
                y[m] += 1
            out.append(tuple(y))
    return out


def truncated_distribution(state: GbsState, max_total: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
    outcomes = truncated_outcomes(state.M, max_total)
    return outcomes, np.array([gbs_probability(state, y) for y in outcomes])


def gbs_sample(state: GbsState, max_total: int, count: int, seed) -> list[tuple[int, ...]]:
    """Inverse-CDF samples from the truncated outcome distribution."""
    outcomes, probs = truncated_distribution(state, max_total)
    missing = 1.0 - probs.sum()
    if missing > 1e-3:
        log.warning("truncation at %d photons drops %.3g of the probability mass", max_total, missing)
    idx = draw_indices(probs, count, generator(seed))
    return [outcomes[i] for i in idx]
