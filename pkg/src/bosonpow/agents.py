"""Agent-based round driver.

A campaign mines ``blocks`` consecutive blocks. Every round derives its
randomness from ``master_seed``: transactions and beacons from the
``"tx"``/``"beacon"`` streams, each miner's samples and nonces from the
``"miner", id, height`` stream. Miners act independently and outcomes are
merged by miner id, so a campaign is a pure function of its inputs.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Sequence

import numpy as np

from .binning import AccuracyParams, required_samples_mode
from .chain import Chain, dumps
from .consensus import Ledger, Round, ValidationSettings, announce_block, append_record, make_commitments
from .economics import EconomicsConfig
from .errors import ConfigError
from .hashing import hash_to_permutation, sha256
from .linalg import matrix_to_json
from .params import ParameterSet, dec
from .rng import generator
from .sampler import exact_distribution, permuted_input

STRATEGIES = ("honest_quantum", "honest_classical", "cheat_uniform", "cheat_copycat", "abstain")


@dataclass(frozen=True)
class MinerProfile:
    """One miner. ``sample_budget`` overrides ``budget_factor`` times the scaled requirement."""

    id: str
    strategy: str
    k: float = 0.0
    sample_budget: int | None = None
    budget_factor: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.sample_budget is not None and self.sample_budget < 0:
            raise ConfigError("sample_budget must be non-negative")
        if self.k < 0 or self.budget_factor < 0:
            raise ConfigError("k and budget_factor must be non-negative")

    def budget(self, scaled_requirement: int) -> int:
        if self.strategy == "abstain":
            return 0
        if self.sample_budget is not None:
            return self.sample_budget
        return math.ceil(self.budget_factor * scaled_requirement)

    @classmethod
    def from_json(cls, doc: dict) -> "MinerProfile":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown miner fields: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def scaled_requirement(pm: ParameterSet, scale: float) -> int:
    """Mode-binned sample requirement shrunk to desk scale."""
    if not 0 < scale <= 1:
        raise ConfigError("desk scale factor must lie in (0, 1]")
    return max(1, math.ceil(scale * required_samples_mode(pm.N, pm.d_mb, pm.beta)))


@dataclass
class RoundView:
    """What a miner can see once the block is announced."""

    round: Round
    probs: np.ndarray
    stale_probs: np.ndarray
    requirement: int


@dataclass
class Submission:
    indices: np.ndarray
    nonces: list[bytes]
    commit_time: int
    digests: list[bytes]

    @property
    def n(self) -> int:
        return len(self.indices)


def act(profile: MinerProfile, view: RoundView, rng: np.random.Generator) -> Submission:
    """Produce a miner's committed sample set for the announced round."""
    rnd = view.round
    n = profile.budget(view.requirement)
    if n == 0:
        return Submission(np.zeros(0, dtype=np.int64), [], 0, [])
    if profile.strategy in ("honest_quantum", "honest_classical"):
        probs = view.probs
    elif profile.strategy == "cheat_copycat":
        probs = view.stale_probs
    else:
        probs = np.full(len(rnd.states), 1.0 / len(rnd.states))
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    idx = np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), len(probs) - 1)
    t = int(rng.integers(0, rnd.pm.T_mine))
    nonces = [rng.bytes(32) for _ in range(n)]
    return Submission(idx, nonces, t, make_commitments(rnd, idx, t, nonces))


@dataclass
class MinerOutcome:
    miner: str
    strategy: str
    committed: int
    validated: bool
    winner: bool
    slashed: str | None
    mu: float | None
    tv: float | None
    reward: Decimal
    penalty: Decimal
    cost: Decimal

    @property
    def utility(self) -> Decimal:
        return self.reward - self.cost - self.penalty

    def to_json(self) -> dict:
        return {"miner": self.miner, "strategy": self.strategy, "committed": self.committed,
                "validated": self.validated, "winner": self.winner, "slashed": self.slashed,
                "mu": self.mu, "tv": self.tv, "reward": str(self.reward), "penalty": str(self.penalty),
                "cost": str(self.cost), "utility": str(self.utility)}


@dataclass
class RoundReport:
    height: int
    mu_net: float | None
    aborted: bool
    miners: list[MinerOutcome]

    @property
    def slash_count(self) -> int:
        return sum(1 for m in self.miners if m.slashed)

    @property
    def tv(self) -> dict[str, float | None]:
        return {m.miner: m.tv for m in self.miners}

    def to_json(self) -> dict:
        return {"height": self.height, "mu_net": self.mu_net, "aborted": self.aborted,
                "slash_count": self.slash_count, "miners": [m.to_json() for m in self.miners]}


@dataclass
class CampaignSettings:
    scale: float = 1e-5
    validation: ValidationSettings | None = None
    reward_mode: str = "split"
    txs_per_block: int = 3
    initial_balance: Decimal = Decimal(100)


@dataclass
class CampaignResult:
    reports: list[RoundReport]
    ledger: Ledger
    chain: Chain
    meta: dict = field(default_factory=dict)


def _cost(profile: MinerProfile, n: int, econ: EconomicsConfig | None) -> Decimal:
    """Off-chain sampling cost; honest miners without an explicit ``k`` use the economics defaults."""
    k = dec(profile.k)
    if not k and econ is not None and profile.strategy.startswith("honest"):
        k = dec(econ.k_classical if profile.strategy == "honest_classical" else econ.k)
    return n * k


def _stale_input_digest(chain: Chain, master_seed: int) -> bytes:
    """Header digest of the previous block, or a seeded stand-in at genesis."""
    if chain.blocks:
        return chain.blocks[-1].header.digest()
    return sha256(b"stale-genesis" + int(master_seed).to_bytes(8, "big"))


def run_round(chain: Chain, pm: ParameterSet, U: np.ndarray, profiles: Sequence[MinerProfile],
              econ: EconomicsConfig | None, ledger: Ledger, master_seed: int,
              settings: CampaignSettings) -> RoundReport:
    height = chain.height
    tx_rng = generator(master_seed, "tx", height)
    txs = [tx_rng.bytes(32) for _ in range(settings.txs_per_block)]
    timestamp = (height + 1) * (pm.T_mine + 1)
    rnd = announce_block(chain, txs, pm, U, ledger, timestamp)

    probs = exact_distribution(U, rnd.input).probs
    stale_pi = hash_to_permutation(_stale_input_digest(chain, master_seed), pm.M, "A")
    stale_probs = exact_distribution(U, permuted_input(stale_pi, pm.N)).probs
    view = RoundView(rnd, probs, stale_probs, scaled_requirement(pm, settings.scale))

    subs = {}
    for p in sorted(profiles, key=lambda p: p.id):
        sub = act(p, view, generator(master_seed, "miner", p.id, p.seed, height))
        subs[p.id] = sub
        if sub.n:
            rnd.commit(p.id, sub.digests, sub.commit_time)
    rnd.close_commits()
    for mid, sub in subs.items():
        if sub.n:
            rnd.reveal(mid, sub.indices, sub.nonces)
    rnd.close_reveals()

    beacons = generator(master_seed, "beacon", height)
    validation = settings.validation or ValidationSettings(AccuracyParams(pm.beta, pm.epsilon))
    rnd.validate(beacons.bytes(32), validation)
    rnd.determine_success(beacons.bytes(32))
    payouts = {p.miner: p for p in rnd.settle(settings.reward_mode)}
    append_record(chain, rnd)

    outcomes = []
    for p in sorted(profiles, key=lambda p: p.id):
        n = subs[p.id].n
        cost = _cost(p, n, econ)
        po = payouts.get(p.id)
        if po is None:
            outcomes.append(MinerOutcome(p.id, p.strategy, 0, False, False, None, None, None,
                                         Decimal(0), Decimal(0), cost))
            continue
        st = rnd.miners[p.id]
        outcomes.append(MinerOutcome(p.id, p.strategy, n, st.slashed is None, st.winner, st.slashed,
                                     po.mu, po.tv, po.reward, po.forfeited, cost))
    return RoundReport(height, rnd.mu_net, rnd.aborted, outcomes)


def run_campaign(profiles: Sequence[MinerProfile], pm: ParameterSet, U: np.ndarray,
                 econ: EconomicsConfig | None, blocks: int, master_seed: int,
                 settings: CampaignSettings | None = None, meta: dict | None = None) -> CampaignResult:
    """Mine ``blocks`` rounds and return reports, the final ledger and the chain."""
    settings = settings or CampaignSettings()
    ids = [p.id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ConfigError("miner ids must be unique")
    if blocks < 0:
        raise ConfigError("block count must be non-negative")
    validation = settings.validation or ValidationSettings(AccuracyParams(pm.beta, pm.epsilon))
    settings.validation = validation
    acc = validation.accuracy
    chain_meta = {"pm": pm.to_json(), "U": matrix_to_json(np.asarray(U)), "semantics": validation.semantics,
                  "path": validation.path, "scale": settings.scale, "master_seed": master_seed,
                  "accuracy": {"beta": acc.beta, "epsilon": acc.epsilon, "gamma": acc.gamma,
                               "delta": acc.delta, "confidence": acc.confidence}}
    chain_meta.update(meta or {})
    chain = Chain(chain_meta)
    ledger = Ledger({p.id: settings.initial_balance for p in profiles})
    reports = [run_round(chain, pm, U, profiles, econ, ledger, master_seed, settings) for _ in range(blocks)]
    return CampaignResult(reports, ledger, chain, chain_meta)


REPORT_COLUMNS = ["height", "miner", "strategy", "committed", "validated", "winner", "slashed", "mu",
                  "tv", "mu_net", "reward", "penalty", "cost", "utility"]


def reports_to_csv(reports: Sequence[RoundReport], extra: dict | None = None) -> str:
    extra = extra or {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS + list(extra))
    for r in reports:
        for m in r.miners:
            d = m.to_json()
            row = [r.height] + [d[c] for c in REPORT_COLUMNS[1:9]] + [r.mu_net] + [d[c] for c in REPORT_COLUMNS[10:]]
            w.writerow(["" if v is None else v for v in row] + list(extra.values()))
    return buf.getvalue()


def reports_to_jsonl(reports: Sequence[RoundReport], extra: dict | None = None) -> str:
    return "".join(dumps({**r.to_json(), **(extra or {})}) + "\n" for r in reports)


def mean_utility(reports: Sequence[RoundReport], strategy_prefix: str) -> float:
    vals = [float(m.utility) for r in reports for m in r.miners if m.strategy.startswith(strategy_prefix)]
    return sum(vals) / len(vals) if vals else 0.0


def summary(result: CampaignResult) -> dict:
    by_strategy: dict[str, dict] = {}
    for r in result.reports:
        for m in r.miners:
            s = by_strategy.setdefault(m.strategy, {"rounds": 0, "slashed": 0, "wins": 0, "utility": Decimal(0)})
            if m.committed:
                s["rounds"] += 1
                s["slashed"] += bool(m.slashed)
                s["wins"] += m.winner
            s["utility"] += m.utility
    for s in by_strategy.values():
        s["utility"] = str(s["utility"])
    return {"blocks": len(result.reports), "balances": result.ledger.snapshot(),
            "minted": str(result.ledger.minted), "burned": str(result.ledger.burned),
            "conserved": result.ledger.conserved(), "by_strategy": by_strategy}

