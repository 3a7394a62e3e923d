"""Coarse-grained (binned) boson-sampling statistics.

Mode binning groups the M output modes into ``d`` equal bins; its binned
photon-count distribution is computed classically from the characteristic
function ``chi(c) = Per(V_N(2 pi c / (N+1)))`` by a discrete Fourier
transform, either exactly or with Gurvits-estimated permanents. State
binning groups the output Fock states into equal bins; its peak bin
probability (PBP) drives mining success.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CapacityError, ConfigError, DimensionError, ParameterError, PhotonNumberError, ValidityError
from .linalg import glynn_mean, gurvits_sample_count, permanent_exact
from .rng import generator
from .sampler import InputSpec, OutputDistribution, enumerate_states

GRID_CAP = 1_000_000
MODE_SAMPLES_CONSTANT = 2**14
IMAG_RESIDUE_TOL = 1e-9


@dataclass(frozen=True)
class ModeBinning:
    M: int
    bins: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        flat = sorted(m for b in self.bins for m in b)
        if flat != list(range(self.M)):
            raise ParameterError("mode bins must partition 0..M-1")
        if len({len(b) for b in self.bins}) != 1:
            raise ParameterError("mode bins must have equal size")

    @property
    def d(self) -> int:
        return len(self.bins)

    @classmethod
    def from_permutation(cls, perm: Sequence[int], d: int) -> "ModeBinning":
        M = len(perm)
        if d < 1 or M % d:
            raise ParameterError(f"d_mb={d} must divide M={M}")
        size = M // d
        perm = [int(p) for p in perm]
        return cls(M, tuple(tuple(perm[j * size:(j + 1) * size]) for j in range(d)))

    @classmethod
    def contiguous(cls, M: int, d: int) -> "ModeBinning":
        return cls.from_permutation(range(M), d)

    def labels(self) -> np.ndarray:
        """Bin index of every mode."""
        lab = np.empty(self.M, dtype=int)
        for j, b in enumerate(self.bins):
            lab[list(b)] = j
        return lab

    def membership(self) -> np.ndarray:
        """``M x d`` 0/1 matrix mapping modes onto bins."""
        return np.eye(self.d, dtype=np.int64)[self.labels()]


@dataclass
class BinnedDistribution:
    kind: str
    labels: list
    probs: np.ndarray
    clamped_mass: float = 0.0

    def to_json(self) -> dict:
        labels = [list(l) if isinstance(l, tuple) else l for l in self.labels]
        return {"kind": self.kind, "labels": labels,
                "probs": [float(p) for p in self.probs], "clamped_mass": float(self.clamped_mass)}

    @classmethod
    def from_json(cls, doc: dict) -> "BinnedDistribution":
        labels = [tuple(l) if isinstance(l, list) else l for l in doc["labels"]]
        return cls(doc["kind"], labels, np.asarray(doc["probs"], dtype=float), float(doc.get("clamped_mass", 0.0)))

    def as_dict(self) -> dict:
        return {l: float(p) for l, p in zip(self.labels, self.probs)}


@dataclass(frozen=True)
class AccuracyParams:
    """Accuracy knobs. ``delta`` defaults to the validation cap for the given N, d."""

    beta: float
    epsilon: float = 0.05
    gamma: float = 1e-4
    delta: float | None = None
    confidence: float = 0.99

    def __post_init__(self):
        for name in ("beta", "epsilon", "gamma", "confidence"):
            v = getattr(self, name)
            if not 0 < v < 1 and not (name == "beta" and v == 1):
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")

    def delta_for(self, N: int, d: int) -> float:
        cap = delta_cap(self.beta, N, d)
        if self.delta is None:
            return cap
        if self.delta > cap * (1 + 1e-12):
            raise ConfigError(f"delta={self.delta} exceeds the cap beta/(N+1)^(d/2) = {cap}")
        return self.delta


def delta_cap(beta: float, N: int, d: int) -> float:
    """Largest permanent additive error compatible with TV accuracy ``beta``."""
    return beta / (N + 1) ** (d / 2)


def binned_counts(Y: Sequence[int], b: ModeBinning) -> tuple[int, ...]:
    if len(Y) != b.M:
        raise DimensionError(f"occupation has {len(Y)} modes, binning expects {b.M}")
    return tuple(int(sum(Y[m] for m in bin_)) for bin_ in b.bins)


def _phases(b: ModeBinning, c: Sequence[int], N: int) -> np.ndarray:
    c = np.asarray(c)
    if c.shape != (b.d,):
        raise DimensionError(f"grid point has {c.shape} entries, expected ({b.d},)")
    s = 2 * np.pi * c / (N + 1)
    return np.exp(1j * s[b.labels()])


def char_matrix(U, inp: InputSpec, b: ModeBinning, c: Sequence[int]) -> np.ndarray:
    """``V_N(s)``: the input-mode block of ``conj(U) D(s) U^T``."""
    U = np.asarray(U, dtype=complex)
    if U.shape != (inp.M, inp.M) or b.M != inp.M:
        raise DimensionError("unitary, input and binning disagree on M")
    rows = U[list(inp.photon_modes)]
    return (rows.conj() * _phases(b, c, inp.N)) @ rows.T


def char_function(U, inp: InputSpec, b: ModeBinning, c: Sequence[int], mode: str = "exact",
                  delta: float = 0.05, confidence: float = 0.99, seed: int = 0) -> complex:
    V = char_matrix(U, inp, b, c)
    if mode == "exact":
        return permanent_exact(V)
    if mode == "gurvits":
        m = gurvits_sample_count(delta, confidence)
        return glynn_mean(V, m, generator(seed))
    raise ParameterError(f"unknown characteristic-function mode {mode!r}")


def _grid(N: int, d: int) -> list[tuple[int, ...]]:
    size = (N + 1) ** d
    if size > GRID_CAP:
        raise CapacityError(f"DFT grid of {size} points exceeds the cap of {GRID_CAP}")
    return list(itertools.product(range(N + 1), repeat=d))


def dft_from_chi(chi: np.ndarray, N: int, d: int, kind: str = "mode") -> BinnedDistribution:
    """Inverse transform a characteristic-function grid onto weight-N count vectors.

    Negative entries (estimation noise) are clamped to zero and the result
    renormalised; the removed mass is reported as ``clamped_mass``.
    """
    full = np.fft.fftn(chi) / (N + 1) ** d
    labels = enumerate_states(d, N)
    vals = np.array([full[n] for n in labels])
    probs = vals.real.copy()
    negative = probs < 0
    clamped = float(-probs[negative].sum())
    probs[negative] = 0.0
    total = probs.sum()
    if total <= 0:
        raise ValueError("reconstructed distribution has no positive mass")
    return BinnedDistribution(kind, labels, probs / total, clamped)


def exact_mode_binned(U, inp: InputSpec, b: ModeBinning) -> BinnedDistribution:
    N, d = inp.N, b.d
    chi = np.empty((N + 1,) * d, dtype=complex)
    for c in _grid(N, d):
        chi[c] = char_function(U, inp, b, c, "exact")
    return dft_from_chi(chi, N, d)


def estimated_mode_binned(U, inp: InputSpec, b: ModeBinning, acc: AccuracyParams, seed: int) -> BinnedDistribution:
    """Classical-verifier estimate of the mode-binned distribution.

    Each grid point's permanent is a Gurvits estimate with additive error
    ``acc.delta_for(N, d)`` at confidence ``acc.confidence``, drawn from an
    independent child stream of ``seed``.
    """
    N, d = inp.N, b.d
    delta = acc.delta_for(N, d)
    m = gurvits_sample_count(delta, acc.confidence)
    chi = np.empty((N + 1,) * d, dtype=complex)
    for k, c in enumerate(_grid(N, d)):
        if not any(c):
            chi[c] = 1.0
            continue
        chi[c] = glynn_mean(char_matrix(U, inp, b, c), m, generator(seed, k))
    return dft_from_chi(chi, N, d)


def marginalize_modes(dist: OutputDistribution, b: ModeBinning) -> BinnedDistribution:
    """Brute-force mode-binned distribution by summing the full distribution."""
    N = sum(dist.states[0])
    labels = enumerate_states(b.d, N)
    pos = {l: i for i, l in enumerate(labels)}
    probs = np.zeros(len(labels))
    for y, p in zip(dist.states, dist.probs):
        probs[pos[binned_counts(y, b)]] += p
    return BinnedDistribution("mode", labels, probs)


def photon_fractions(dist: BinnedDistribution) -> np.ndarray:
    """Expected share of photons landing in each bin, ``sum_n (n_j / N) P(n)``."""
    counts = np.asarray(dist.labels, dtype=float)
    N = counts[0].sum()
    return (dist.probs[:, None] * counts).sum(axis=0) / N


def empirical_mode_binned(samples, b: ModeBinning) -> BinnedDistribution:
    """Per-bin photon fractions over a sample set: ``m_j / (N |s|)``."""
    Y = np.asarray(samples, dtype=np.int64)
    if Y.size == 0 or Y.ndim != 2:
        raise ParameterError("empirical mode binning needs a non-empty set of samples")
    if Y.shape[1] != b.M:
        raise DimensionError(f"samples have {Y.shape[1]} modes, binning expects {b.M}")
    weights = Y.sum(axis=1)
    if np.any(weights != weights[0]):
        raise PhotonNumberError("all samples must carry the same photon number")
    m = Y.sum(axis=0) @ b.membership()
    return BinnedDistribution("mode-fraction", list(range(b.d)), m / m.sum())


def tv_distance(P, Q) -> float:
    p = P.probs if isinstance(P, BinnedDistribution) else np.asarray(P, dtype=float)
    q = Q.probs if isinstance(Q, BinnedDistribution) else np.asarray(Q, dtype=float)
    if p.shape != q.shape:
        raise DimensionError(f"cannot compare distributions of shapes {p.shape} and {q.shape}")
    return float(0.5 * np.abs(p - q).sum())


@dataclass(frozen=True)
class StateBinning:
    state_count: int
    bins: tuple[tuple[int, ...], ...]
    _lookup: np.ndarray = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        lookup = np.empty(self.state_count, dtype=np.int64)
        for j, b in enumerate(self.bins):
            lookup[list(b)] = j
        object.__setattr__(self, "_lookup", lookup)

    @property
    def d(self) -> int:
        return len(self.bins)

    def bin_of(self, state_indices) -> np.ndarray:
        return self._lookup[np.asarray(state_indices, dtype=np.int64)]


def state_bins(perm: Sequence[int], state_count: int, d: int) -> StateBinning:
    perm = [int(p) for p in perm]
    if len(perm) != state_count or sorted(perm) != list(range(state_count)):
        raise ParameterError("state permutation must permute 0..|Y|-1")
    if d < 1 or state_count % d:
        raise ParameterError(f"d_sb={d} must divide |Y|={state_count}")
    size = state_count // d
    return StateBinning(state_count, tuple(tuple(perm[j * size:(j + 1) * size]) for j in range(d)))


def bin_histogram(state_indices, sb: StateBinning) -> np.ndarray:
    return np.bincount(sb.bin_of(state_indices), minlength=sb.d)


def pbp_from_indices(state_indices, sb: StateBinning) -> tuple[float, int]:
    """Peak bin probability and its bin; ties go to the smallest bin index."""
    h = bin_histogram(state_indices, sb)
    total = h.sum()
    if total == 0:
        raise ParameterError("peak bin probability of an empty sample set")
    j = int(np.argmax(h))
    return float(h[j] / total), j


def pbp(samples, sb: StateBinning, states: Sequence[tuple[int, ...]]) -> tuple[float, int]:
    index = {s: i for i, s in enumerate(states)}
    try:
        idx = [index[tuple(int(v) for v in y)] for y in samples]
    except KeyError as exc:
        raise PhotonNumberError(f"sample {exc.args[0]} is not in the state space") from None
    return pbp_from_indices(idx, sb)


def exact_pbp(probs: np.ndarray, sb: StateBinning) -> tuple[float, int]:
    sums = np.array([probs[list(b)].sum() for b in sb.bins])
    j = int(np.argmax(sums))
    return float(sums[j]), j


def required_samples_mode(N: int, d: int, beta: float, constant: float = MODE_SAMPLES_CONSTANT) -> int:
    """Network-wide samples needed by the mode-binned validation test."""
    if not 0 < beta < 1:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    return math.ceil(constant * math.sqrt(math.comb(N + d - 1, N)) / (beta * beta))


def required_samples_state(d: int, epsilon: float, gamma: float = 1e-4, mode: str = "hoeffding") -> int:
    """Network-wide samples for a PBP estimate within ``epsilon`` at confidence ``1 - gamma``.

    ``bootstrap`` is the resampling count for ``gamma = 1e-4`` and only holds
    when ``2 d epsilon^0.8 <= 0.1``.
    """
    if mode == "hoeffding":
        return math.ceil(12 * d / (epsilon * epsilon) * math.log(2 / gamma))
    if mode == "bootstrap":
        lhs = 2 * d * epsilon**0.8
        if lhs > 0.1:
            raise ValidityError(f"bootstrap count needs 2*d_sb*eps^0.8 <= 0.1, got {lhs:.4g}")
        return math.ceil(1.8e5 * d**3.5)
    raise ParameterError(f"unknown sample-count mode {mode!r}")
