"""Incentive mathematics and hardware cost models.

Rates follow the usual photonic and permanent-based estimates::

    R_q = (eta_f * eta_t**M)**N * R0 / (N e)      quantum samples per second
    R_c = 1 / (a_tilde * 2 N 2**N)                classical samples per second

Utilities are per-sample linear in the committed sample count ``n``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .binning import required_samples_mode, required_samples_state
from .errors import ConfigError

log = logging.getLogger(__name__)

# Mining time quoted for N=25, d_mb=3, beta=0.1 under the reference hardware.
QUOTED_T_MINE = 81.6


@dataclass(frozen=True)
class HardwareProfile:
    """Photonic device and classical baseline used for rate and energy figures.

    When ``a_tilde_per_photon`` is set the classical scaling factor is
    ``a_tilde * N`` (a machine whose per-permanent-term time grows with N).
    """

    R0: float = 1e8
    eta_f: float | None = 0.90
    eta_t: float = 0.9999
    a_tilde: float = 10 ** -9.2
    power_q: float = 1500.0
    power_c: float = 100.0
    a_tilde_per_photon: bool = False
    eta_g: float | None = None
    eta_c: float | None = None
    eta_d: float | None = None
    name: str = "custom"

    def __post_init__(self):
        parts = (self.eta_g, self.eta_c, self.eta_d)
        if any(p is not None for p in parts):
            if any(p is None for p in parts):
                raise ConfigError("give all of eta_g, eta_c, eta_d or none of them")
            prod = self.eta_g * self.eta_c * self.eta_d
            if self.eta_f is None:
                object.__setattr__(self, "eta_f", prod)
            elif abs(self.eta_f - prod) > 1e-12:
                raise ConfigError(f"eta_f={self.eta_f} differs from eta_g*eta_c*eta_d={prod}")
        if self.eta_f is None:
            raise ConfigError("eta_f is required")
        for name in ("eta_f", "eta_t", "eta_g", "eta_c", "eta_d"):
            v = getattr(self, name)
            if v is not None and not 0 < v <= 1:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")
        if self.R0 <= 0 or self.a_tilde <= 0:
            raise ConfigError("R0 and a_tilde must be positive")
        if self.power_q < 0 or self.power_c < 0:
            raise ConfigError("powers must be non-negative")

    def a_tilde_at(self, N: int) -> float:
        return self.a_tilde * N if self.a_tilde_per_photon else self.a_tilde

    @classmethod
    def from_json(cls, doc: dict) -> "HardwareProfile":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown hardware fields: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self) -> dict:
        return asdict(self)


# Reference photonic sampler paired with a 3.5 GHz single core.
SINGLE_CORE = HardwareProfile(name="single-core", a_tilde=10 ** -9.2, power_c=100.0)
# Same sampler against a Tianhe-2 class machine.
SUPERCOMPUTER = HardwareProfile(name="supercomputer", a_tilde=1.99e-15, a_tilde_per_photon=True, power_c=24e6)
PRESETS = {"single-core": SINGLE_CORE, "supercomputer": SUPERCOMPUTER}


def quantum_rate(hw: HardwareProfile, N: int, M: int) -> float:
    if N < 1:
        raise ConfigError("N must be at least 1")
    return (hw.eta_f * hw.eta_t**M) ** N * hw.R0 / (N * math.e)


def classical_rate(hw: HardwareProfile, N: int) -> float:
    if N < 1:
        raise ConfigError("N must be at least 1")
    return 1.0 / (hw.a_tilde_at(N) * 2 * N * 2.0**N)


def energy_per_sample(power_watts: float, rate_hz: float) -> float:
    if rate_hz <= 0:
        raise ConfigError("rate must be positive")
    return power_watts / rate_hz


def speedup(hw: HardwareProfile, N: int, M: int | None = None) -> float:
    M = N * N if M is None else M
    return quantum_rate(hw, N, M) / classical_rate(hw, N)


def crossover(hw: HardwareProfile, Ns: Sequence[int] = range(1, 61)) -> int | None:
    """Smallest N (with M = N^2) at which the quantum sampler is faster."""
    for N in Ns:
        if speedup(hw, N) > 1:
            return N
    return None


@dataclass
class PerfRow:
    N: int
    M: int
    R_q: float
    R_c: float
    speedup: float
    E_q: float
    E_c: float
    energy_ratio: float


def perf_table(hw: HardwareProfile, Ns: Sequence[int] = range(2, 31)) -> list[PerfRow]:
    rows = []
    for N in Ns:
        M = N * N
        rq, rc = quantum_rate(hw, N, M), classical_rate(hw, N)
        eq, ec = energy_per_sample(hw.power_q, rq), energy_per_sample(hw.power_c, rc)
        rows.append(PerfRow(N, M, rq, rc, rq / rc, eq, ec, ec / eq))
    return rows


@dataclass
class MiningTime:
    seconds: float
    N_mb: int
    N_sb: int
    R_q: float


def mining_time(N: int, M: int, d_mb: int, beta: float, d_sb: int, epsilon: float, hw: HardwareProfile,
                gamma: float = 1e-4, sb_mode: str = "hoeffding", scale: float = 1.0) -> MiningTime:
    """``max(N_mb, N_sb) / R_q``, with both counts multiplied by ``scale``."""
    if not 0 < scale <= 1:
        raise ConfigError("scale must lie in (0, 1]")
    n_mb = math.ceil(scale * required_samples_mode(N, d_mb, beta))
    n_sb = math.ceil(scale * required_samples_state(d_sb, epsilon, gamma, sb_mode))
    rq = quantum_rate(hw, N, M)
    return MiningTime(max(n_mb, n_sb) / rq, n_mb, n_sb, rq)


def quoted_mining_time_check(hw: HardwareProfile = SINGLE_CORE, d_sb: int = 2, epsilon: float = 0.1) -> MiningTime:
    """Recompute the N=25, d_mb=3, beta=0.1 mining time and log it next to the quoted figure."""
    mt = mining_time(25, 625, 3, 0.1, d_sb, epsilon, hw)
    log.info("T_mine at N=25, d_mb=3, beta=0.1: computed %.1f s (N_mb=%d, N_sb=%d, R_q=%.4g Hz); quoted %.1f s",
             mt.seconds, mt.N_mb, mt.N_sb, mt.R_q, QUOTED_T_MINE)
    return mt


@dataclass(frozen=True)
class EconomicsConfig:
    R: float
    P: float
    k: float
    k_classical: float
    p_honest: float = 0.9
    p_cheat: float = 0.1
    reward_mode: str = "split"
    A: float = 0.0
    winners: int = 1
    k_fixed: float | None = None
    k_variable: float | None = None
    tau: float | None = None
    check_assumptions: bool = True

    def __post_init__(self):
        if min(self.R, self.P, self.k, self.k_classical) < 0:
            raise ConfigError("R, P, k and k_classical must be non-negative")
        if self.reward_mode not in ("split", "block"):
            raise ConfigError(f"unknown reward mode {self.reward_mode!r}")
        if self.winners < 1:
            raise ConfigError("winner count must be at least 1")
        if self.check_assumptions:
            if not 0.75 < self.p_honest < 1:
                raise ConfigError(f"p_honest={self.p_honest} outside (0.75, 1)")
            if not 0 < self.p_cheat < 0.25:
                raise ConfigError(f"p_cheat={self.p_cheat} outside (0, 0.25)")
        elif not (0 <= self.p_honest <= 1 and 0 <= self.p_cheat <= 1):
            raise ConfigError("probabilities must lie in [0, 1]")

    @classmethod
    def from_json(cls, doc: dict) -> "EconomicsConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown economics fields: {sorted(unknown)}")
        try:
            cfg = cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        if cfg.k_variable is not None:
            cfg = replace(cfg, k=prospective_cost(cfg.k_variable, cfg.k_fixed, cfg.tau))
        return cfg

    def to_json(self) -> dict:
        return asdict(self)


def prospective_cost(k_variable: float, k_fixed: float | None = None, tau: float | None = None) -> float:
    """Per-sample cost for a new entrant: variable cost plus amortised capital."""
    if k_fixed is None:
        return k_variable
    if not tau or tau <= 0:
        raise ConfigError("tau (expected lifetime samples) must be positive when k_fixed is given")
    return k_variable + k_fixed / tau


def block_variance(n: float, R: float, p: float, winners: int) -> float:
    """Payout variance for one miner under the block lottery.

    The block pays ``T = winners * n * R`` to one of ``winners`` equally
    likely miners; a miner that passes with probability ``p`` collects it
    with probability ``q = p / winners``.
    """
    T = winners * n * R
    q = p / winners
    return T * T * q * (1 - q)


@dataclass
class Utilities:
    honest: float
    cheat: float
    classical: float
    nothing: float = 0.0


def utilities(econ: EconomicsConfig, n: float) -> Utilities:
    if n < 0:
        raise ConfigError("sample count must be non-negative")
    R, P, k, kc = econ.R, econ.P, econ.k, econ.k_classical
    ph, pc = econ.p_honest, econ.p_cheat
    u_h = n * (ph * R - k - (1 - ph) * P)
    u_c = n * (pc * R - (1 - pc) * P)
    u_k = n * (ph * R - kc - (1 - ph) * P)
    if econ.reward_mode == "block" and econ.A:
        u_h -= econ.A * block_variance(n, R, ph, econ.winners)
        u_c -= econ.A * block_variance(n, R, pc, econ.winners)
        u_k -= econ.A * block_variance(n, R, ph, econ.winners)
    return Utilities(u_h, u_c, u_k)


def no_penalty_counterexample(n: float, R: float, k: float, p_honest: float, p_cheat: float) -> tuple[float, float]:
    """Without a penalty a cheater inflating to ``n p_h / p_c`` samples out-earns an honest miner.

    Returns ``(u_honest, u_cheat)``.
    """
    n_cheat = n * p_honest / p_cheat
    return n * (p_honest * R - k), n_cheat * p_cheat * R


@dataclass
class Bounds:
    R_range: tuple[float, float]
    P_range: tuple[float, float]
    feasible: bool
    reasons: list[str] = field(default_factory=list)


def bounds(econ: EconomicsConfig) -> Bounds:
    """Sufficient ranges ``2k < R < k_classical`` and ``R/3 < P < R``."""
    lo, hi = 2 * econ.k, econ.k_classical
    reasons = []
    if not lo < hi:
        reasons.append(f"infeasible: 2k={lo} is not below k_classical={hi}")
    return Bounds((lo, hi), (econ.R / 3, econ.R), not reasons, reasons)


@dataclass
class NashVerdict:
    ok: bool
    reasons: list[str]
    utilities: Utilities
    P_window: tuple[float, float]
    worst_p_cheat: float


def nash_check(econ: EconomicsConfig, n: float = 1.0, scan: int = 1000) -> NashVerdict:
    """Check the honest-dominance conditions for the configured values.

    Besides the configured ``p_cheat``, ``u_cheat`` is scanned over the whole
    ``(0, 0.25)`` band so a penalty that only works for lucky ``p_cheat``
    values is rejected.
    """
    u = utilities(econ, n)
    reasons = []
    if not u.honest > 0:
        reasons.append(f"honest utility {u.honest:.6g} is not positive")
    if not u.cheat < 0:
        reasons.append(f"cheating utility {u.cheat:.6g} is not negative")
    # u_classical tends to R - k_classical as p_honest approaches 1
    if not u.classical < 0 or econ.R >= econ.k_classical:
        reasons.append("classical not excluded")
    ph, pc = econ.p_honest, econ.p_cheat
    lo = pc * econ.R / (1 - pc) if pc < 1 else math.inf
    hi = (ph * econ.R - econ.k) / (1 - ph) if ph < 1 else math.inf
    if not lo < econ.P < hi:
        reasons.append(f"P={econ.P} outside the window ({lo:.6g}, {hi:.6g})")
    grid = np.linspace(0, 0.25, scan + 1)[1:-1]
    worst = float(grid[-1])
    if np.any(grid * econ.R - (1 - grid) * econ.P >= 0):
        worst = float(grid[np.argmax(grid * econ.R - (1 - grid) * econ.P)])
        reasons.append(f"u_cheat >= 0 for some p_cheat in (0, 0.25), e.g. {worst:.4f}")
    b = bounds(econ)
    reasons.extend(b.reasons)
    return NashVerdict(not reasons, reasons, u, (lo, hi), worst)


def heterogeneous_k(costs: Sequence[float], m: float = 0) -> float:
    """The ``m``-th lower percentile (nearest rank) of the cost factors; ``m = 0`` is the minimum."""
    if len(costs) == 0:
        raise ConfigError("cost list is empty")
    if not 0 <= m <= 100:
        raise ConfigError("percentile must lie in [0, 100]")
    s = sorted(costs)
    rank = max(1, math.ceil(m / 100 * len(s)))
    return s[rank - 1]


def nash_grid(k: float, k_classical: float, size: int = 20, p_points: int = 10) -> list[tuple]:
    """Every (R, P, p_h, p_c) on an interior grid of the bounds where a condition fails.

    An empty list means the sufficient bounds held everywhere.
    """
    failures = []
    Rs = np.linspace(2 * k, k_classical, size + 2)[1:-1]
    phs = np.linspace(0.75, 1, p_points + 2)[1:-1]
    pcs = np.linspace(0, 0.25, p_points + 2)[1:-1]
    for R in Rs:
        for P in np.linspace(R / 3, R, size + 2)[1:-1]:
            for ph in phs:
                for pc in pcs:
                    econ = EconomicsConfig(R, P, k, k_classical, ph, pc)
                    u = utilities(econ, 1.0)
                    if not (u.honest > 0 > u.cheat and u.classical < 0):
                        failures.append((R, P, ph, pc))
    return failures
