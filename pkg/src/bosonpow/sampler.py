"""Exact Fock-state boson sampling at desk scale.

Modes are indexed from 0. An input is the set of modes holding one photon
each; outputs are occupation tuples of length M. Probabilities follow the
row-input convention: the amplitude of output ``Y`` is the permanent of the
submatrix of ``U`` taking the input rows and ``y_i`` copies of column ``i``,
divided by ``sqrt(prod y_i!)``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError, DimensionError, ParameterError, PhotonNumberError
from .linalg import permanent_exact
from .rng import generator

log = logging.getLogger(__name__)

STATE_CAP = 2_000_000


@dataclass(frozen=True)
class InputSpec:
    M: int
    N: int
    photon_modes: tuple[int, ...]

    def __post_init__(self):
        modes = tuple(sorted(int(m) for m in self.photon_modes))
        object.__setattr__(self, "photon_modes", modes)
        if not 1 <= self.N <= self.M:
            raise ParameterError(f"need 1 <= N <= M, got N={self.N}, M={self.M}")
        if len(modes) != self.N or len(set(modes)) != self.N:
            raise ParameterError("photon_modes must hold N distinct modes")
        if modes[0] < 0 or modes[-1] >= self.M:
            raise ParameterError("photon mode index out of range")

    @classmethod
    def first_modes(cls, M: int, N: int) -> "InputSpec":
        return cls(M, N, tuple(range(N)))

    @property
    def occupation(self) -> tuple[int, ...]:
        x = [0] * self.M
        for m in self.photon_modes:
            x[m] = 1
        return tuple(x)


@dataclass
class OutputDistribution:
    states: list[tuple[int, ...]]
    probs: np.ndarray

    def index(self) -> dict[tuple[int, ...], int]:
        return {s: i for i, s in enumerate(self.states)}

    def to_json(self) -> dict:
        return {"states": [list(s) for s in self.states], "probs": [float(p) for p in self.probs]}


def state_count(M: int, N: int) -> int:
    return math.comb(M + N - 1, N)


def enumerate_states(M: int, N: int, cap: int = STATE_CAP) -> list[tuple[int, ...]]:
    """All length-M occupation tuples of weight N in lexicographic order."""
    if M < 1 or N < 0:
        raise ParameterError(f"need M >= 1 and N >= 0, got M={M}, N={N}")
    count = state_count(M, N)
    if count > cap:
        raise CapacityError(f"{count} states for M={M}, N={N} exceeds the cap of {cap}")

    out: list[tuple[int, ...]] = []
    prefix = [0] * M

    def fill(pos: int, left: int):
        if pos == M - 1:
            prefix[pos] = left
            out.append(tuple(prefix))
            return
        for k in range(left + 1):
            prefix[pos] = k
            fill(pos + 1, left - k)

    fill(0, N)
    return out


def _check_unitary_shape(U: np.ndarray, M: int):
    if U.shape != (M, M):
        raise DimensionError(f"unitary has shape {U.shape}, expected ({M}, {M})")


def output_amplitude(U, inp: InputSpec, Y: Sequence[int]) -> complex:
    U = np.asarray(U, dtype=complex)
    _check_unitary_shape(U, inp.M)
    if len(Y) != inp.M:
        raise DimensionError(f"output has {len(Y)} modes, expected {inp.M}")
    if sum(Y) != inp.N or min(Y) < 0:
        raise PhotonNumberError(f"output {tuple(Y)} does not carry {inp.N} photons")
    cols = [i for i, y in enumerate(Y) for _ in range(y)]
    sub = U[np.ix_(inp.photon_modes, cols)]
    norm = math.prod(math.factorial(y) for y in Y)
    return permanent_exact(sub) / math.sqrt(norm)


def exact_distribution(U, inp: InputSpec, cap: int = STATE_CAP) -> OutputDistribution:
    U = np.asarray(U, dtype=complex)
    _check_unitary_shape(U, inp.M)
    if inp.M < inp.N**2:
        log.warning("M=%d < N^2=%d: collision outcomes will be common", inp.M, inp.N**2)
    states = enumerate_states(inp.M, inp.N, cap)
    probs = np.array([abs(output_amplitude(U, inp, y)) ** 2 for y in states])
    return OutputDistribution(states, probs)


@dataclass
class SampleDraw:
    samples: list[tuple[int, ...]]
    indices: np.ndarray
    discarded: int

    @property
    def attempts(self) -> int:
        return len(self.samples) + self.discarded


def draw_indices(probs: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws of state indices."""
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    return np.minimum(np.searchsorted(cdf, rng.random(count), side="right"), len(probs) - 1)


def sample(U, inp: InputSpec, count: int, seed, eta: float = 1.0,
           dist: OutputDistribution | None = None) -> SampleDraw:
    """Draw ``count`` post-selected samples from the exact output distribution.

    Under uniform loss each shot keeps all N photons with probability
    ``eta**N``; failed shots are discarded and counted.
    """
    if not 0 < eta <= 1:
        raise ParameterError(f"transmission eta must lie in (0, 1], got {eta}")
    if count < 0:
        raise ParameterError("count must be non-negative")
    rng = generator(seed)
    if dist is None:
        dist = exact_distribution(U, inp)
    success = eta**inp.N
    discarded = 0 if success == 1.0 else int(rng.negative_binomial(count, success)) if count else 0
    idx = draw_indices(dist.probs, count, rng)
    return SampleDraw([dist.states[i] for i in idx], idx, discarded)


def permuted_input(perm: Sequence[int], N: int) -> InputSpec:
    """Input photons occupy modes ``perm[0..N-1]``."""
    perm = [int(p) for p in perm]
    M = len(perm)
    if sorted(perm) != list(range(M)):
        raise ParameterError("not a permutation of 0..M-1")
    return InputSpec(M, N, tuple(perm[:N]))


def samples_to_jsonl(samples: Sequence[Sequence[int]]) -> str:
    return "".join(json.dumps({"y": [int(v) for v in y]}) + "\n" for y in samples)
