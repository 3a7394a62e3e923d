"""Network-wide protocol parameters."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from decimal import Decimal

import numpy as np

from .errors import ConfigError
from .linalg import matrix_to_json


def dec(x) -> Decimal:
    """Exact decimal from a config number (via its shortest repr)."""
    if isinstance(x, Decimal):
        return x
    if isinstance(x, float) and not math.isfinite(x):
        raise ConfigError(f"token amount must be finite, got {x}")
    return Decimal(str(x))


def unitary_ref(U) -> str:
    """Content hash of an interferometer matrix (hex SHA-256 of its JSON form)."""
    doc = json.dumps(matrix_to_json(np.asarray(U)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(doc.encode()).hexdigest()


@dataclass(frozen=True)
class ParameterSet:
    N: int
    M: int
    d_mb: int
    d_sb: int
    U_ref: str
    T_mine: int
    epsilon: float
    beta: float
    R: Decimal
    P: Decimal
    stake: Decimal

    def __post_init__(self):
        for name in ("R", "P", "stake"):
            object.__setattr__(self, name, dec(getattr(self, name)))
        if not 1 <= self.N <= self.M:
            raise ConfigError(f"need 1 <= N <= M, got N={self.N}, M={self.M}")
        if self.d_mb < 1 or self.M % self.d_mb:
            raise ConfigError(f"d_mb={self.d_mb} must divide M={self.M}")
        if self.d_sb < 1 or self.state_count % self.d_sb:
            raise ConfigError(f"d_sb={self.d_sb} must divide |Y|={self.state_count}")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)")
        if not 0 < self.beta <= 1:
            raise ConfigError("beta must lie in (0, 1]")
        if self.T_mine < 1:
            raise ConfigError("T_mine must be a positive number of simulated seconds")
        if min(self.R, self.P, self.stake) < 0:
            raise ConfigError("R, P and stake must be non-negative")

    @property
    def state_count(self) -> int:
        return math.comb(self.M + self.N - 1, self.N)

    def check_economics(self, k) -> list[str]:
        """Violations of ``R/3 < P < R`` and ``2k < R``."""
        problems = []
        k = dec(k)
        if not self.R / 3 < self.P < self.R:
            problems.append(f"P={self.P} outside (R/3, R) = ({self.R / 3}, {self.R})")
        if not 2 * k < self.R:
            problems.append(f"R={self.R} does not exceed 2k={2 * k}")
        return problems

    def to_json(self) -> dict:
        doc = asdict(self)
        for name in ("R", "P", "stake"):
            doc[name] = str(doc[name])
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "ParameterSet":
        try:
            return cls(**{k: doc[k] for k in cls.__dataclass_fields__})
        except KeyError as exc:
            raise ConfigError(f"parameter set is missing {exc.args[0]!r}") from None

    def digest(self) -> bytes:
        doc = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(doc.encode()).digest()
