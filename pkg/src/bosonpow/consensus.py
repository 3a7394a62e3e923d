"""One mining round as a phase machine.

Phases run strictly forward::

    COMMITTING -> REVEALING -> VALIDATING -> SETTLING -> RECORDED

``announce_block`` builds the header and opens the commit window. Miners
commit sample digests before ``T_mine``, reveal samples and nonces, are
validated against the beacon-chosen mode binning, scored by peak bin
probability under the beacon-chosen state binning, and paid out. Token
amounts are ``Decimal`` so the ledger balances exactly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Sequence

import numpy as np

from .binning import (AccuracyParams, BinnedDistribution, ModeBinning, StateBinning, binned_counts,
                      empirical_mode_binned, estimated_mode_binned, exact_mode_binned, pbp_from_indices,
                      photon_fractions, state_bins, tv_distance)
from .chain import Block, BlockHeader, BlockRecord, Chain
from .errors import ChainError, PhaseError, ProtocolError
from .hashing import canonical, commitment_digest_raw, hash_to_permutation, merkle_root, sha256
from .params import ParameterSet, dec, unitary_ref
from .rng import generator
from .sampler import InputSpec, enumerate_states, permuted_input


class Phase(enum.IntEnum):
    ANNOUNCED = 0
    COMMITTING = 1
    REVEALING = 2
    VALIDATING = 3
    SETTLING = 4
    RECORDED = 5


class LateCommitError(ProtocolError):
    pass


@dataclass(frozen=True)
class Commitment:
    digest: bytes
    miner_id: str
    commit_time: int


@dataclass
class ValidationSettings:
    """How the validator builds P-hat and compares miners against it.

    ``path``: ``estimated`` (Gurvits, the classical verifier) or ``exact``.
    ``semantics``: ``counts`` compares the distribution of per-sample binned
    count vectors with P-hat; ``fractions`` compares per-bin photon shares
    with the photon shares implied by P-hat.
    """

    accuracy: AccuracyParams
    path: str = "estimated"
    semantics: str = "counts"

    def __post_init__(self):
        if self.path not in ("estimated", "exact"):
            raise ValueError(f"unknown validation path {self.path!r}")
        if self.semantics not in ("counts", "fractions"):
            raise ValueError(f"unknown comparison semantics {self.semantics!r}")


class Ledger:
    """Token balances with minted/burned totals for the conservation check."""

    def __init__(self, balances: dict[str, Decimal] | None = None):
        self.balances: dict[str, Decimal] = {k: dec(v) for k, v in (balances or {}).items()}
        self.initial_total = sum(self.balances.values(), Decimal(0))
        self.minted = Decimal(0)
        self.burned = Decimal(0)
        self.escrow = Decimal(0)

    def balance(self, who: str) -> Decimal:
        return self.balances.get(who, Decimal(0))

    def _add(self, who: str, amount: Decimal):
        self.balances[who] = self.balance(who) + amount

    def lock(self, who: str, amount: Decimal):
        self._add(who, -amount)
        self.escrow += amount

    def release(self, who: str, amount: Decimal):
        self.escrow -= amount
        self._add(who, amount)

    def burn(self, amount: Decimal):
        self.escrow -= amount
        self.burned += amount

    def mint(self, who: str, amount: Decimal):
        self.minted += amount
        self._add(who, amount)

    def conserved(self) -> bool:
        total = sum(self.balances.values(), Decimal(0)) + self.escrow
        return total == self.initial_total + self.minted - self.burned

    def snapshot(self) -> dict[str, str]:
        return {k: str(v) for k, v in sorted(self.balances.items())}


@dataclass
class MinerState:
    commitments: list[Commitment] = field(default_factory=list)
    revealed: np.ndarray | None = None
    slashed: str | None = None
    tv: float | None = None
    mu: float | None = None
    winner: bool = False

    @property
    def committed(self) -> int:
        return len(self.commitments)


@dataclass
class Payout:
    miner: str
    committed: int
    status: str
    reward: Decimal
    stake_returned: Decimal
    forfeited: Decimal
    mu: float | None
    tv: float | None

    def to_json(self) -> dict:
        return {"miner": self.miner, "committed": self.committed, "status": self.status,
                "reward": str(self.reward), "stake_returned": str(self.stake_returned),
                "forfeited": str(self.forfeited), "mu": self.mu, "tv": self.tv}


def block_winner(beacon_sb: bytes, winners: Sequence[str]) -> str:
    """Uniform choice among sorted ``winners`` seeded by the state-binning beacon."""
    rng = generator(int.from_bytes(sha256(beacon_sb + b"block-winner")[:7], "big"))
    return sorted(winners)[int(rng.integers(len(winners)))]


def state_bytes(states: Sequence[tuple[int, ...]]) -> list[bytes]:
    """Canonical encoding of every state, indexed like ``states``."""
    return [canonical(*s) for s in states]


class Round:
    """State of one block's mining round. Create with :func:`announce_block`."""

    def __init__(self, pm: ParameterSet, U: np.ndarray, header: BlockHeader, txs: list[bytes],
                 ledger: Ledger, used_beacons: set[bytes]):
        self.pm = pm
        self.U = np.asarray(U, dtype=complex)
        self.header = header
        self.txs = txs
        self.ledger = ledger
        self.used_beacons = used_beacons
        self.phase = Phase.ANNOUNCED
        self.Pi = hash_to_permutation(header.digest(), pm.M, "A")
        self.input: InputSpec = permuted_input(self.Pi, pm.N)
        self.states = enumerate_states(pm.M, pm.N)
        self.state_index = {s: i for i, s in enumerate(self.states)}
        self._state_bytes: list[bytes] | None = None
        self.miners: dict[str, MinerState] = {}
        self.beacon_mb: bytes | None = None
        self.beacon_sb: bytes | None = None
        self.pi_mb: list[int] | None = None
        self.pi_sb: list[int] | None = None
        self.P_hat: BinnedDistribution | None = None
        self.validated = False
        self.mu_net: float | None = None
        self.aborted = False
        self.payouts: list[Payout] | None = None

    def _require(self, *phases: Phase):
        if self.phase not in phases:
            raise PhaseError(f"operation not allowed in phase {self.phase.name}")

    @property
    def state_encodings(self) -> list[bytes]:
        if self._state_bytes is None:
            self._state_bytes = state_bytes(self.states)
        return self._state_bytes

    # -- commit / reveal -------------------------------------------------

    def commit(self, miner: str, digests: Sequence[bytes], time: int) -> None:
        """Record sample digests; the first commit locks the miner's stake.

        Only commits strictly before ``T_mine`` count.
        """
        self._require(Phase.COMMITTING)
        if not 0 <= time < self.pm.T_mine:
            raise LateCommitError(f"commit at t={time} is outside [0, T_mine={self.pm.T_mine})")
        st = self.miners.get(miner)
        if st is None:
            st = self.miners[miner] = MinerState()
            self.ledger.lock(miner, self.pm.stake)
        st.commitments.extend(Commitment(bytes(d), miner, int(time)) for d in digests)

    def close_commits(self) -> None:
        self._require(Phase.COMMITTING)
        self.phase = Phase.REVEALING

    def reveal(self, miner: str, samples: Sequence, nonces: Sequence[bytes]) -> bool:
        """Open a miner's commitments; returns False (and slashes) on any mismatch.

        ``samples`` may be occupation tuples or state indices.
        """
        self._require(Phase.REVEALING)
        st = self.miners.get(miner)
        if st is None:
            raise ProtocolError(f"miner {miner!r} never committed")
        if st.revealed is not None or st.slashed == "commitment mismatch":
            raise ProtocolError(f"miner {miner!r} already revealed")
        idx = self._as_indices(samples)
        if idx is None or len(idx) != st.committed or len(nonces) != st.committed:
            self._slash(st, "commitment mismatch")
            return False
        enc = self.state_encodings
        for k, (c, nonce) in enumerate(zip(st.commitments, nonces)):
            if commitment_digest_raw(enc[idx[k]], c.commit_time, bytes(nonce)) != c.digest:
                self._slash(st, "commitment mismatch")
                return False
        st.revealed = idx
        return True

    def _as_indices(self, samples) -> np.ndarray | None:
        arr = np.asarray(samples)
        if arr.ndim == 1 and np.issubdtype(arr.dtype, np.integer):
            if arr.size and (arr.min() < 0 or arr.max() >= len(self.states)):
                return None
            return arr.astype(np.int64)
        out = np.empty(len(samples), dtype=np.int64)
        for k, y in enumerate(samples):
            i = self.state_index.get(tuple(int(v) for v in y))
            if i is None:
                return None
            out[k] = i
        return out

    def _slash(self, st: MinerState, reason: str):
        if st.slashed is None:
            st.slashed = reason

    def close_reveals(self) -> None:
        self._require(Phase.REVEALING)
        for st in self.miners.values():
            if st.revealed is None:
                self._slash(st, "no reveal")
        self.phase = Phase.VALIDATING

    # -- validation and success -----------------------------------------

    def _take_beacon(self, beacon: bytes) -> bytes:
        beacon = bytes(beacon)
        if len(beacon) != 32:
            raise ProtocolError("beacons are 32-byte strings")
        if beacon in self.used_beacons or beacon in (self.beacon_mb, self.beacon_sb):
            raise ProtocolError("beacon was already used")
        return beacon

    def validate(self, beacon_mb: bytes, settings: ValidationSettings) -> None:
        """Slash every miner whose sample statistic is at least ``2 beta`` from P-hat."""
        self._require(Phase.VALIDATING)
        if self.validated:
            raise PhaseError("round already validated")
        self.beacon_mb = self._take_beacon(beacon_mb)
        self.pi_mb = hash_to_permutation(self.beacon_mb, self.pm.M, "G")
        b = ModeBinning.from_permutation(self.pi_mb, self.pm.d_mb)
        if settings.path == "exact":
            self.P_hat = exact_mode_binned(self.U, self.input, b)
        else:
            seed = int.from_bytes(sha256(self.beacon_mb + b"gurvits")[:7], "big")
            self.P_hat = estimated_mode_binned(self.U, self.input, b, settings.accuracy, seed)

        Y = np.asarray(self.states, dtype=np.int64)
        if settings.semantics == "counts":
            pos = {l: i for i, l in enumerate(self.P_hat.labels)}
            state_label = np.array([pos[binned_counts(y, b)] for y in self.states])
            target = self.P_hat.probs
        else:
            target = photon_fractions(self.P_hat)

        for st in self.miners.values():
            if st.slashed is not None:
                continue
            if len(st.revealed) == 0:
                self._slash(st, "empty sample set")
                continue
            if settings.semantics == "counts":
                h = np.bincount(state_label[st.revealed], minlength=len(target))
                stat = h / h.sum()
            else:
                stat = empirical_mode_binned(Y[st.revealed], b).probs
            st.tv = tv_distance(target, stat)
            if st.tv >= 2 * self.pm.beta:
                self._slash(st, "failed mode-binned validation")
        self.validated = True

    def valid_miners(self) -> list[str]:
        return [m for m, st in self.miners.items() if st.slashed is None]

    def determine_success(self, beacon_sb: bytes) -> list[str]:
        """Compute mu_net over validated samples and return the winners.

        A miner wins when ``|mu_i - mu_net| <= epsilon``. With no validated
        miners the round aborts and stakes are returned at settlement.
        """
        self._require(Phase.VALIDATING)
        if not self.validated:
            raise PhaseError("validate the round first")
        self.beacon_sb = self._take_beacon(beacon_sb)
        self.pi_sb = hash_to_permutation(self.beacon_sb, self.pm.state_count, "F")
        sb: StateBinning = state_bins(self.pi_sb, self.pm.state_count, self.pm.d_sb)
        self.phase = Phase.SETTLING
        valid = self.valid_miners()
        if not valid:
            self.aborted = True
            return []
        pooled = np.concatenate([self.miners[m].revealed for m in valid])
        self.mu_net, _ = pbp_from_indices(pooled, sb)
        winners = []
        for m in valid:
            st = self.miners[m]
            st.mu, _ = pbp_from_indices(st.revealed, sb)
            if abs(st.mu - self.mu_net) <= self.pm.epsilon:
                st.winner = True
                winners.append(m)
        return winners

    def settle(self, reward_mode: str = "split") -> list[Payout]:
        """Pay winners, return stakes to validated miners and burn slashed stakes.

        ``split`` pays every winner ``|s_i| R``; ``block`` pays the whole
        ``sum |s_i| R`` over winners to one winner chosen uniformly with
        randomness drawn from the state-binning beacon.
        """
        self._require(Phase.SETTLING)
        if self.payouts is not None:
            raise PhaseError("round already settled")
        if reward_mode not in ("split", "block"):
            raise ValueError(f"unknown reward mode {reward_mode!r}")
        R, stake = self.pm.R, self.pm.stake
        winners = sorted(m for m, st in self.miners.items() if st.winner)
        rewards = {m: Decimal(0) for m in self.miners}
        if winners and reward_mode == "split":
            for m in winners:
                rewards[m] = self.miners[m].committed * R
        elif winners:
            total = sum((self.miners[m].committed * R for m in winners), Decimal(0))
            rewards[block_winner(self.beacon_sb, winners)] = total

        payouts = []
        for m in sorted(self.miners):
            st = self.miners[m]
            if st.slashed is not None and not self.aborted:
                self.ledger.burn(stake)
                payouts.append(Payout(m, st.committed, "slashed", Decimal(0), Decimal(0), stake, st.mu, st.tv))
                continue
            self.ledger.release(m, stake)
            if rewards[m]:
                self.ledger.mint(m, rewards[m])
            status = "aborted" if self.aborted else ("winner" if st.winner else "validated")
            payouts.append(Payout(m, st.committed, status, rewards[m], stake, Decimal(0), st.mu, st.tv))
        if not self.ledger.conserved():
            raise ProtocolError("token conservation violated")
        self.payouts = payouts
        return payouts

    def record(self) -> BlockRecord:
        return BlockRecord(self.Pi, self.pi_mb, self.pi_sb, self.P_hat, self.mu_net,
                           self.beacon_mb, self.beacon_sb)


def announce_block(chain: Chain, txs: Sequence[bytes], pm: ParameterSet, U, ledger: Ledger,
                   timestamp: int) -> Round:
    """Build the next header on ``chain`` and open the commit window."""
    if unitary_ref(U) != pm.U_ref:
        raise ChainError("interferometer does not match the parameter set's U_ref")
    if chain.blocks and chain.blocks[-1].header.pm_hash != pm.digest():
        raise ChainError("chain tip was mined under a different parameter set")
    if chain.blocks and timestamp <= chain.blocks[-1].header.timestamp:
        raise ChainError("timestamps must increase along the chain")
    prev_header, prev_record = chain.tip_hashes()
    txs = [bytes(t) for t in txs]
    header = BlockHeader(chain.height, prev_header, prev_record, merkle_root(txs), pm.digest(), int(timestamp))
    rnd = Round(pm, U, header, txs, ledger, chain.used_beacons())
    rnd.phase = Phase.COMMITTING
    return rnd


def append_record(chain: Chain, rnd: Round) -> Block:
    if rnd.payouts is None:
        raise PhaseError("settle the round before recording it")
    if rnd.phase != Phase.SETTLING:
        raise PhaseError(f"cannot record a round in phase {rnd.phase.name}")
    if rnd.header.prev_header_hash != chain.tip_hashes()[0]:
        raise ChainError("round was announced on a different chain tip")
    block = Block(rnd.header, rnd.record(), [p.to_json() for p in rnd.payouts], rnd.txs)
    chain.blocks.append(block)
    rnd.phase = Phase.RECORDED
    return block


def make_commitments(rnd: Round, indices: np.ndarray, commit_time: int, nonces: Sequence[bytes]) -> list[bytes]:
    """Miner-side digests for samples given as state indices."""
    enc = rnd.state_encodings
    return [commitment_digest_raw(enc[i], commit_time, n) for i, n in zip(indices, nonces)]

