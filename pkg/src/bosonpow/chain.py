"""Blocks, chain files and chain verification."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .binning import (AccuracyParams, BinnedDistribution, ModeBinning, estimated_mode_binned,
                      exact_mode_binned, pbp_from_indices, required_samples_state, state_bins,
                      tv_distance)
from .errors import ChainError
from .hashing import ZERO_DIGEST, canonical, hash_to_permutation, merkle_root, sha256
from .linalg import matrix_from_json
from .params import ParameterSet, unitary_ref
from .rng import generator
from .sampler import draw_indices, exact_distribution, permuted_input

FORMAT = "bosonpow-chain/1"


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class BlockHeader:
    height: int
    prev_header_hash: bytes
    prev_record_hash: bytes
    tx_root: bytes
    pm_hash: bytes
    timestamp: int

    def digest(self) -> bytes:
        return sha256(canonical(self.height, self.prev_header_hash, self.prev_record_hash,
                                self.tx_root, self.pm_hash, self.timestamp))

    def to_json(self) -> dict:
        return {"height": self.height, "prev_header_hash": self.prev_header_hash.hex(),
                "prev_record_hash": self.prev_record_hash.hex(), "tx_root": self.tx_root.hex(),
                "pm_hash": self.pm_hash.hex(), "timestamp": self.timestamp}

    @classmethod
    def from_json(cls, doc: dict) -> "BlockHeader":
        return cls(int(doc["height"]), bytes.fromhex(doc["prev_header_hash"]),
                   bytes.fromhex(doc["prev_record_hash"]), bytes.fromhex(doc["tx_root"]),
                   bytes.fromhex(doc["pm_hash"]), int(doc["timestamp"]))


@dataclass
class BlockRecord:
    """What a block appends to prove its round: permutations, P-hat and mu_net."""

    Pi: list[int]
    pi_mb: list[int]
    pi_sb: list[int]
    P_hat: BinnedDistribution
    mu_net: float | None
    beacon_mb: bytes
    beacon_sb: bytes

    def to_json(self) -> dict:
        return {"Pi": self.Pi, "pi_mb": self.pi_mb, "pi_sb": self.pi_sb, "P_hat": self.P_hat.to_json(),
                "mu_net": self.mu_net, "beacon_mb": self.beacon_mb.hex(), "beacon_sb": self.beacon_sb.hex()}

    @classmethod
    def from_json(cls, doc: dict) -> "BlockRecord":
        return cls([int(v) for v in doc["Pi"]], [int(v) for v in doc["pi_mb"]], [int(v) for v in doc["pi_sb"]],
                   BinnedDistribution.from_json(doc["P_hat"]), doc["mu_net"],
                   bytes.fromhex(doc["beacon_mb"]), bytes.fromhex(doc["beacon_sb"]))

    def digest(self) -> bytes:
        return sha256(dumps(self.to_json()).encode())


@dataclass
class Block:
    header: BlockHeader
    record: BlockRecord
    payouts: list[dict]
    txs: list[bytes]

    def to_json(self) -> dict:
        return {"header": self.header.to_json(), "record": self.record.to_json(),
                "payouts": self.payouts, "txs": [t.hex() for t in self.txs]}

    @classmethod
    def from_json(cls, doc: dict) -> "Block":
        return cls(BlockHeader.from_json(doc["header"]), BlockRecord.from_json(doc["record"]),
                   list(doc["payouts"]), [bytes.fromhex(t) for t in doc["txs"]])


@dataclass
class Chain:
    meta: dict = field(default_factory=dict)
    blocks: list[Block] = field(default_factory=list)

    def __len__(self):
        return len(self.blocks)

    @property
    def height(self) -> int:
        return len(self.blocks)

    def tip_hashes(self) -> tuple[bytes, bytes]:
        if not self.blocks:
            return ZERO_DIGEST, ZERO_DIGEST
        tip = self.blocks[-1]
        return tip.header.digest(), tip.record.digest()

    def used_beacons(self) -> set[bytes]:
        return {b for blk in self.blocks for b in (blk.record.beacon_mb, blk.record.beacon_sb)}

    def dumps(self) -> str:
        lines = [dumps({"meta": self.meta})] + [dumps(b.to_json()) for b in self.blocks]
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Chain":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ChainError("chain file is empty")
        try:
            first = json.loads(lines[0])
            if "meta" not in first:
                raise ChainError("chain file must start with a meta line")
            blocks = [Block.from_json(json.loads(ln)) for ln in lines[1:]]
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise ChainError(f"malformed chain file: {exc}") from None
        return cls(first["meta"], blocks)

    @classmethod
    def load(cls, path) -> "Chain":
        return cls.loads(Path(path).read_text())

    def unitary(self) -> np.ndarray:
        return matrix_from_json(self.meta["U"])

    def params(self) -> ParameterSet:
        return ParameterSet.from_json(self.meta["pm"])


@dataclass
class BlockVerdict:
    height: int
    reasons: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.reasons


@dataclass
class VerificationReport:
    verdicts: list[BlockVerdict]

    @property
    def ok(self) -> bool:
        return all(v.ok for v in self.verdicts)

    @property
    def flagged(self) -> list[int]:
        return [v.height for v in self.verdicts if not v.ok]

    def to_json(self) -> dict:
        return {"ok": self.ok, "flagged": self.flagged,
                "blocks": [{"height": v.height, "ok": v.ok, "reasons": v.reasons} for v in self.verdicts]}


def verify_chain(chain: Chain, mode: str = "classical", recompute: str = "exact",
                 seed: int = 0, oracle_samples: int | None = None) -> VerificationReport:
    """Re-derive every block from its contents and check the stored record.

    Each header is rebuilt from the block's transactions and the *rebuilt*
    parent hashes, so altering any transaction flags that block and every
    descendant. ``recompute`` chooses how the verifier rebuilds P-hat: the
    exact DFT (desk-scale oracle) or a fresh Gurvits estimate. ``quantum``
    mode also re-estimates the peak bin probability by fresh sampling.
    """
    if mode not in ("classical", "quantum"):
        raise ValueError(f"unknown verification mode {mode!r}")
    if not chain.blocks:
        raise ChainError("cannot verify an empty chain")
    try:
        pm = chain.params()
        U = chain.unitary()
    except (KeyError, ValueError, TypeError) as exc:
        raise ChainError(f"chain meta is unusable: {exc}") from None
    acc = AccuracyParams(**chain.meta.get("accuracy", {"beta": pm.beta}))
    pm_hash = pm.digest()
    if unitary_ref(U) != pm.U_ref:
        raise ChainError("meta unitary does not match the parameter set's U_ref")
    if oracle_samples is None:
        oracle_samples = required_samples_state(pm.d_sb, pm.epsilon)

    verdicts = []
    prev_header, prev_record = ZERO_DIGEST, ZERO_DIGEST
    for height, blk in enumerate(chain.blocks):
        v = BlockVerdict(height)
        h = blk.header
        rebuilt = replace(h, height=height, prev_header_hash=prev_header, prev_record_hash=prev_record,
                          tx_root=merkle_root(blk.txs), pm_hash=pm_hash)
        if h.height != height:
            v.reasons.append(f"height {h.height} out of sequence")
        if h.prev_header_hash != prev_header:
            v.reasons.append("previous header hash mismatch")
        if h.prev_record_hash != prev_record:
            v.reasons.append("previous record hash mismatch")
        if h.tx_root != rebuilt.tx_root:
            v.reasons.append("transaction root mismatch")
        if h.pm_hash != pm_hash:
            v.reasons.append("parameter-set hash mismatch")

        rec = blk.record
        Pi = hash_to_permutation(rebuilt.digest(), pm.M, "A")
        if rec.Pi != Pi:
            v.reasons.append("input permutation does not follow from the header")
        if rec.pi_mb != hash_to_permutation(rec.beacon_mb, pm.M, "G"):
            v.reasons.append("mode binning does not follow from its beacon")
        if rec.pi_sb != hash_to_permutation(rec.beacon_sb, pm.state_count, "F"):
            v.reasons.append("state binning does not follow from its beacon")

        inp = permuted_input(Pi, pm.N)
        b = ModeBinning.from_permutation(rec.pi_mb, pm.d_mb)
        if recompute == "exact":
            fresh = exact_mode_binned(U, inp, b)
        else:
            fresh = estimated_mode_binned(U, inp, b, acc, seed=int.from_bytes(sha256(rec.beacon_mb + b"verify")[:7], "big") ^ seed)
        if fresh.labels != rec.P_hat.labels:
            v.reasons.append("stored P-hat has the wrong support")
        elif tv_distance(fresh, rec.P_hat) > 2 * pm.beta:
            v.reasons.append(f"stored P-hat is {tv_distance(fresh, rec.P_hat):.4f} from the recomputed one (> 2 beta)")

        if mode == "quantum" and rec.mu_net is not None and len(rec.pi_sb) == pm.state_count:
            dist = exact_distribution(U, inp)
            rng = generator(seed, "oracle", height)
            idx = draw_indices(dist.probs, oracle_samples, rng)
            mu, _ = pbp_from_indices(idx, state_bins(rec.pi_sb, pm.state_count, pm.d_sb))
            if abs(mu - rec.mu_net) > pm.epsilon:
                v.reasons.append(f"mu_net={rec.mu_net:.4f} disagrees with fresh sampling ({mu:.4f}) beyond epsilon")

        verdicts.append(v)
        prev_header, prev_record = rebuilt.digest(), rec.digest()
    return VerificationReport(verdicts)


def mutate_transaction(chain: Chain, height: int, tx_index: int, byte_index: int, xor: int) -> Chain:
    """Copy of ``chain`` with one transaction byte XOR-ed by ``xor`` (non-zero)."""
    if not 1 <= xor <= 255:
        raise ValueError("xor mask must be in 1..255")
    clone = Chain.loads(chain.dumps())
    tx = bytearray(clone.blocks[height].txs[tx_index])
    tx[byte_index] ^= xor
    clone.blocks[height].txs[tx_index] = bytes(tx)
    return clone


def random_mutation(chain: Chain, seed: int) -> tuple[Chain, int]:
    """Flip one random byte of one random transaction; returns ``(chain, height)``."""
    rng = generator(seed, "tamper")
    candidates = [(h, i) for h, blk in enumerate(chain.blocks) for i, t in enumerate(blk.txs) if t]
    if not candidates:
        raise ChainError("chain has no transaction bytes to mutate")
    h, i = candidates[int(rng.integers(len(candidates)))]
    pos = int(rng.integers(len(chain.blocks[h].txs[i])))
    return mutate_transaction(chain, h, i, pos, int(rng.integers(1, 256))), h


def config_digest(doc) -> str:
    return sha256(dumps(doc).encode()).hex()

