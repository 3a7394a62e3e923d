"""Dense complex linear algebra: permanents, Hafnians, Haar unitaries.

Matrices are plain ``numpy`` arrays of dtype ``complex128``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import ConfigError, DimensionError, ParameterError, SingularityError, SymmetryError
from .rng import generator

SYMMETRY_TOL = 1e-10
CONDITION_CUTOFF = 1e12


def _square(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ParameterError("matrix has non-finite entries")
    return A


def permanent_exact(A) -> complex:
    """Permanent by Glynn's formula with Gray-code ordering, O(n 2^n).

    Sign vectors run over {+1,-1}^n with the first entry pinned to +1. Column
    sums weighted by the signs are updated incrementally as one sign flips per
    Gray-code step.
    """
    A = _square(A)
    n = A.shape[0]
    if n == 0:
        return complex(1.0)
    if n == 1:
        return complex(A[0, 0])
    if n == 2:
        return complex(A[0, 0] * A[1, 1] + A[0, 1] * A[1, 0])

    sums = A.sum(axis=0)
    signs = np.ones(n, dtype=np.int8)
    parity = 1
    total = np.prod(sums)
    for g in range(1, 1 << (n - 1)):
        # lowest set bit of g selects the row to flip (rows 1..n-1)
        k = (g & -g).bit_length()
        sums = sums - 2 * signs[k] * A[k]
        signs[k] = -signs[k]
        parity = -parity
        total += parity * np.prod(sums)
    return complex(total / (1 << (n - 1)))


def glynn_estimator(A, x) -> complex:
    """``x_1...x_n * prod_j (sum_k A[j,k] x_k)`` for one sign vector ``x``."""
    A = _square(A)
    x = np.asarray(x)
    if x.shape != (A.shape[0],):
        raise DimensionError(f"sign vector length {x.shape} does not match matrix order {A.shape[0]}")
    if not np.all(np.abs(x) == 1):
        raise ParameterError("sign vector entries must be +1 or -1")
    return complex(np.prod(x) * np.prod(A @ x))


@dataclass(frozen=True)
class EstimatorConfig:
    delta: float
    confidence: float = 0.99
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.confidence < 1:
            raise ConfigError(f"confidence must lie in (0, 1), got {self.confidence}")

    @property
    def samples(self) -> int:
        return gurvits_sample_count(self.delta, self.confidence)


def gurvits_sample_count(delta: float, confidence: float) -> int:
    """Number of Glynn draws for additive error ``delta`` with probability ``confidence``."""
    if not 0 < delta < 1 or not 0 < confidence < 1:
        raise ConfigError("delta and confidence must lie in (0, 1)")
    return max(1, math.ceil(2.0 / delta**2 * math.log(2.0 / (1.0 - confidence))))


def glynn_mean(A: np.ndarray, m: int, rng: np.random.Generator, chunk: int = 1 << 16) -> complex:
    """Mean of ``m`` Glynn estimators with signs drawn from ``rng``."""
    n = A.shape[0]
    total = 0j
    done = 0
    while done < m:
        size = min(chunk, m - done)
        x = rng.integers(0, 2, size=(size, n), dtype=np.int8) * 2 - 1
        # rows of A @ x.T are the linear forms; product over rows per draw
        forms = A @ x.T.astype(float)
        total += np.sum(np.prod(x, axis=1) * np.prod(forms, axis=0))
        done += size
    return complex(total / m)


def permanent_gurvits(A, cfg: EstimatorConfig) -> tuple[complex, int]:
    """Additive-error permanent estimate; returns ``(estimate, m)``."""
    A = _square(A)
    m = cfg.samples
    if A.shape[0] == 0:
        return complex(1.0), m
    return glynn_mean(A, m, generator(cfg.seed)), m


def hafnian_exact(B) -> complex:
    """Hafnian as a sum over perfect matchings.

    Matchings are enumerated by always pairing the lowest unmatched index,
    with the sub-results for each remaining index set memoised, so the cost
    is O(n^2 2^n) rather than (n-1)!!.
    """
    B = _square(B)
    n = B.shape[0]
    if not np.allclose(B, B.T, atol=SYMMETRY_TOL, rtol=0):
        raise SymmetryError("Hafnian requires a symmetric matrix")
    if n == 0:
        return complex(1.0)
    if n % 2:
        return complex(0.0)

    rows = B.tolist()

    @lru_cache(maxsize=None)
    def haf(mask: int) -> complex:
        if mask == 0:
            return 1.0
        i = (mask & -mask).bit_length() - 1
        rest = mask & ~(1 << i)
        total = 0j
        m = rest
        while m:
            j = (m & -m).bit_length() - 1
            m &= m - 1
            if rows[i][j] != 0:
                total += rows[i][j] * haf(rest & ~(1 << j))
        return total

    return complex(haf((1 << n) - 1))


def haar_unitary(M: int, seed) -> np.ndarray:
    """Haar-random ``M x M`` unitary from a seeded complex Ginibre matrix.

    QR-decompose, then rescale each column of Q by the phase of the matching
    diagonal entry of R so the result is Haar distributed.
    """
    if M < 1:
        raise DimensionError("unitary dimension must be at least 1")
    rng = generator(seed)
    z = (rng.standard_normal((M, M)) + 1j * rng.standard_normal((M, M))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def beamsplitter() -> np.ndarray:
    """Balanced 2x2 beamsplitter."""
    return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2.0)


def det_and_inverse(A) -> tuple[complex, np.ndarray]:
    A = _square(A)
    if A.shape[0] == 0:
        return complex(1.0), A.copy()
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond >= CONDITION_CUTOFF:
        raise SingularityError(f"matrix is singular or ill-conditioned (cond={cond:.3g})")
    lu, piv = scipy.linalg.lu_factor(A)
    swaps = np.count_nonzero(piv != np.arange(A.shape[0]))
    det = (-1) ** swaps * np.prod(np.diag(lu))
    inv = scipy.linalg.lu_solve((lu, piv), np.eye(A.shape[0], dtype=complex))
    return complex(det), inv


def matrix_to_json(A) -> dict:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise DimensionError("only 2-d matrices serialize")
    return {
        "rows": int(A.shape[0]),
        "cols": int(A.shape[1]),
        "re": [float(v) for v in A.real.ravel()],
        "im": [float(v) for v in A.imag.ravel()],
    }


def matrix_from_json(doc: dict) -> np.ndarray:
    rows, cols = int(doc["rows"]), int(doc["cols"])
    re = np.asarray(doc["re"], dtype=float)
    im = np.asarray(doc["im"], dtype=float)
    if re.size != rows * cols or im.size != rows * cols:
        raise DimensionError("entry count does not match rows*cols")
    return (re + 1j * im).reshape(rows, cols)
