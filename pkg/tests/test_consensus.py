import math
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from bosonpow.binning import AccuracyParams, state_bins
from bosonpow.chain import Chain
from bosonpow.consensus import (LateCommitError, Ledger, Phase, Round, ValidationSettings, announce_block,
                                append_record, block_winner, make_commitments)
from bosonpow.errors import ChainError, PhaseError, ProtocolError
from bosonpow.hashing import ZERO_DIGEST, hash_to_permutation, sha256
from bosonpow.linalg import haar_unitary
from bosonpow.params import ParameterSet, unitary_ref
from bosonpow.sampler import exact_distribution

EXACT = ValidationSettings(AccuracyParams(0.05), path="exact")


def beacon(i):
    return sha256(b"beacon" + i.to_bytes(4, "big"))


def new_round(pm, U, txs=(b"tx0", b"tx1"), ledger=None, chain=None, timestamp=1):
    chain = chain if chain is not None else Chain()
    ledger = ledger or Ledger({m: 100 for m in ("a", "b", "c", "x")})
    return announce_block(chain, list(txs), pm, U, ledger, timestamp), chain, ledger


def honest(rnd, miner, n, seed, t=0):
    rng = np.random.default_rng(seed)
    probs = exact_distribution(rnd.U, rnd.input).probs
    idx = rng.choice(len(probs), size=n, p=probs)
    nonces = [rng.bytes(32) for _ in range(n)]
    rnd.commit(miner, make_commitments(rnd, idx, t, nonces), t)
    return idx, nonces


def full_round(pm, U, miners, settings=EXACT, mode="split", k=0):
    rnd, chain, ledger = new_round(pm, U)
    opened = {m: honest(rnd, m, n, seed) for m, (n, seed) in miners.items()}
    rnd.close_commits()
    for m, (idx, nonces) in opened.items():
        rnd.reveal(m, idx, nonces)
    rnd.close_reveals()
    rnd.validate(beacon(2 * k), settings)
    rnd.determine_success(beacon(2 * k + 1))
    rnd.settle(mode)
    return rnd, chain, ledger


def test_genesis_header(pm6, U6):
    rnd, _, _ = new_round(pm6, U6)
    assert rnd.header.height == 0
    assert rnd.header.prev_header_hash == ZERO_DIGEST == rnd.header.prev_record_hash
    assert rnd.phase == Phase.COMMITTING
    assert rnd.Pi == hash_to_permutation(rnd.header.digest(), 6, "A")


def test_different_txs_give_different_headers(pm6, U6):
    a, _, _ = new_round(pm6, U6, txs=[b"one"])
    b, _, _ = new_round(pm6, U6, txs=[b"two"])
    assert a.header.digest() != b.header.digest()


def test_tx_byte_flip_changes_input_permutation():
    U = haar_unitary(8, 0)
    pm = ParameterSet(2, 8, 2, 4, unitary_ref(U), 10, 0.05, 0.05, 1, "0.5", 1)
    changed = 0
    for s in range(100):
        rng = np.random.default_rng(s)
        tx = bytearray(rng.bytes(16))
        a, _, _ = new_round(pm, U, txs=[bytes(tx)])
        tx[int(rng.integers(16))] ^= int(rng.integers(1, 256))
        b, _, _ = new_round(pm, U, txs=[bytes(tx)])
        changed += a.Pi != b.Pi
    assert changed >= 99


def test_announce_rejects_wrong_unitary(pm6):
    with pytest.raises(ChainError):
        new_round(pm6, haar_unitary(6, 99))


def test_honest_round_pays_split_rewards(pm6, U6):
    rnd, _, ledger = full_round(pm6, U6, {"a": (2000, 1), "b": (2000, 2)})
    assert all(st.slashed is None for st in rnd.miners.values())
    for m in ("a", "b"):
        assert rnd.miners[m].winner
        assert ledger.balance(m) == 100 + 2000 * pm6.R
    assert ledger.conserved() and ledger.escrow == 0


def test_altered_sample_is_slashed(pm6, U6):
    rnd, _, ledger = new_round(pm6, U6)
    idx, nonces = honest(rnd, "a", 20, 1)
    rnd.close_commits()
    idx = idx.copy()
    idx[3] = (idx[3] + 1) % 21
    assert not rnd.reveal("a", idx, nonces)
    assert rnd.miners["a"].slashed == "commitment mismatch"
    rnd.close_reveals()
    rnd.validate(beacon(0), EXACT)
    assert rnd.determine_success(beacon(1)) == []
    assert rnd.aborted


def test_commit_deadline_is_strict(pm6, U6):
    rnd, _, _ = new_round(pm6, U6)
    with pytest.raises(LateCommitError):
        rnd.commit("a", [bytes(32)], pm6.T_mine)
    rnd.commit("a", [bytes(32)], pm6.T_mine - 1)


def test_duplicate_reveal_and_out_of_phase(pm6, U6):
    rnd, _, _ = new_round(pm6, U6)
    idx, nonces = honest(rnd, "a", 5, 1)
    with pytest.raises(PhaseError):
        rnd.reveal("a", idx, nonces)
    rnd.close_commits()
    with pytest.raises(PhaseError):
        rnd.commit("a", [bytes(32)], 0)
    assert rnd.reveal("a", idx, nonces)
    with pytest.raises(ProtocolError):
        rnd.reveal("a", idx, nonces)
    with pytest.raises(ProtocolError):
        rnd.reveal("nobody", idx, nonces)


def test_unrevealed_miner_is_slashed(pm6, U6):
    rnd, _, ledger = new_round(pm6, U6)
    honest(rnd, "a", 2000, 1)
    idx, nonces = honest(rnd, "b", 2000, 2)
    rnd.close_commits()
    rnd.reveal("b", idx, nonces)
    rnd.close_reveals()
    assert rnd.miners["a"].slashed == "no reveal"
    rnd.validate(beacon(0), EXACT)
    rnd.determine_success(beacon(1))
    rnd.settle()
    assert ledger.balance("a") == 100 - pm6.stake


def test_reused_beacon_rejected(pm6, U6):
    _, chain, ledger = full_round(pm6, U6, {"a": (500, 1)})
    used = chain.used_beacons()
    rnd = Round(pm6, U6, new_round(pm6, U6)[0].header, [], ledger, {beacon(0)} | used)
    rnd.phase = Phase.VALIDATING
    with pytest.raises(ProtocolError):
        rnd.validate(beacon(0), EXACT)
    rnd.validate(beacon(7), EXACT)
    with pytest.raises(ProtocolError):
        rnd.determine_success(beacon(7))


def test_beta_one_slashes_nobody(U6):
    pm = ParameterSet(2, 6, 3, 7, unitary_ref(U6), 100, 0.05, 1.0, "0.01", "0.006", "20")
    rnd, _, _ = new_round(pm, U6)
    rng = np.random.default_rng(0)
    idx = rng.integers(0, 21, 300)
    nonces = [rng.bytes(32) for _ in idx]
    rnd.commit("x", make_commitments(rnd, idx, 0, nonces), 0)
    rnd.close_commits()
    rnd.reveal("x", idx, nonces)
    rnd.close_reveals()
    rnd.validate(beacon(0), ValidationSettings(AccuracyParams(1.0), path="exact"))
    assert rnd.valid_miners() == ["x"]


def test_single_validated_miner_always_wins(pm6, U6):
    rnd, _, _ = full_round(pm6, U6, {"a": (50, 3)})
    assert rnd.miners["a"].mu == rnd.mu_net and rnd.miners["a"].winner


def test_identical_sample_sets_have_identical_mu(pm6, U6):
    rnd, _, _ = full_round(pm6, U6, {"a": (2000, 3), "b": (2000, 3), "c": (2000, 4)})
    assert rnd.miners["a"].mu == rnd.miners["b"].mu


def test_mu_net_recount(pm6, U6):
    rnd, _, _ = full_round(pm6, U6, {"a": (1500, 5), "b": (1700, 6)})
    pooled = np.concatenate([rnd.miners[m].revealed for m in ("a", "b")])
    bins = [set(b) for b in state_bins(rnd.pi_sb, 21, 7).bins]
    counts = [sum(1 for i in pooled if i in b) for b in bins]
    assert rnd.mu_net == max(counts) / len(pooled)


def test_slashed_miner_loses_exactly_stake(pm6, U6):
    rnd, _, ledger = new_round(pm6, U6)
    a_idx, a_nonces = honest(rnd, "a", 2000, 1)
    rng = np.random.default_rng(1)
    idx = np.full(2000, 20)  # every photon bunched in the last mode
    nonces = [rng.bytes(32) for _ in idx]
    rnd.commit("x", make_commitments(rnd, idx, 0, nonces), 0)
    rnd.close_commits()
    rnd.reveal("a", a_idx, a_nonces)
    rnd.reveal("x", idx, nonces)
    rnd.close_reveals()
    rnd.validate(beacon(0), EXACT)
    assert rnd.miners["x"].slashed == "failed mode-binned validation"
    rnd.determine_success(beacon(1))
    rnd.settle()
    assert ledger.balance("x") == 100 - pm6.stake
    assert ledger.burned == pm6.stake and ledger.conserved()


def test_empty_winner_set_returns_stakes(pm6, U6):
    rnd, _, ledger = new_round(pm6, U6)
    rng = np.random.default_rng(1)
    idx = np.full(500, 20)
    nonces = [rng.bytes(32) for _ in idx]
    rnd.commit("x", make_commitments(rnd, idx, 0, nonces), 0)
    rnd.close_commits()
    rnd.reveal("x", idx, nonces)
    rnd.close_reveals()
    rnd.validate(beacon(0), EXACT)
    assert rnd.determine_success(beacon(1)) == [] and rnd.aborted
    payouts = rnd.settle()
    assert payouts[0].status == "aborted" and ledger.balance("x") == 100


def test_double_settle_and_record(pm6, U6):
    rnd, chain, _ = full_round(pm6, U6, {"a": (100, 1)})
    with pytest.raises(PhaseError):
        rnd.settle()
    block = append_record(chain, rnd)
    assert rnd.phase == Phase.RECORDED and chain.height == 1
    assert block.record.Pi == rnd.Pi and block.record.mu_net == rnd.mu_net
    with pytest.raises(PhaseError):
        append_record(chain, rnd)


def test_block_mode_pays_one_winner(pm6, U6):
    rnd, _, ledger = full_round(pm6, U6, {"a": (2000, 1), "b": (2000, 2)}, mode="block")
    rewards = sorted(ledger.balance(m) - 100 for m in ("a", "b"))
    assert rewards == [0, 4000 * pm6.R]


def test_block_winner_is_fair():
    trials = 10_000
    wins = sum(block_winner(sha256(i.to_bytes(4, "big")), ["a", "b"]) == "a" for i in range(trials))
    assert abs(wins - trials / 2) <= 3 * math.sqrt(trials / 4)


def test_estimated_validation_path(pm6, U6):
    settings = ValidationSettings(AccuracyParams(0.05), path="estimated")
    rnd, _, _ = full_round(pm6, U6, {"a": (2000, 1)}, settings=settings)
    assert rnd.P_hat.kind == "mode" and rnd.miners["a"].slashed is None


def test_fraction_semantics(pm6, U6):
    settings = ValidationSettings(AccuracyParams(0.05), path="exact", semantics="fractions")
    rnd, _, _ = full_round(pm6, U6, {"a": (2000, 1)}, settings=settings)
    assert rnd.miners["a"].slashed is None
    with pytest.raises(ValueError):
        ValidationSettings(AccuracyParams(0.05), semantics="bogus")


OPS = ["commit", "close_commits", "reveal", "close_reveals", "validate", "determine_success", "settle", "record"]
ALLOWED = {"commit": Phase.COMMITTING, "close_commits": Phase.COMMITTING, "reveal": Phase.REVEALING,
           "close_reveals": Phase.REVEALING, "validate": Phase.VALIDATING,
           "determine_success": Phase.VALIDATING, "settle": Phase.SETTLING, "record": Phase.SETTLING}


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(OPS), max_size=14))
@example(["commit", "close_commits", "reveal", "close_reveals", "validate", "determine_success", "settle", "settle"])
def test_phase_machine_only_moves_forward(pm6, U6, ops):
    rnd, chain, ledger = new_round(pm6, U6)
    rng = np.random.default_rng(0)
    idx = rng.integers(0, 21, 30)
    nonces = [rng.bytes(32) for _ in idx]
    digests = make_commitments(rnd, idx, 0, nonces)
    k = 0
    for op in ops:
        before = rnd.phase
        try:
            if op == "commit":
                rnd.commit("a", digests, 0)
            elif op == "reveal":
                rnd.reveal("a", idx, nonces)
            elif op in ("validate", "determine_success"):
                k += 1
                getattr(rnd, op)(beacon(k), EXACT) if op == "validate" else rnd.determine_success(beacon(k))
            elif op == "record":
                append_record(chain, rnd)
            else:
                getattr(rnd, op)()
        except PhaseError:
            settled_twice = op == "settle" and rnd.payouts is not None
            assert before != ALLOWED[op] or settled_twice or op in ("validate", "determine_success", "record")
            assert rnd.phase == before
            continue
        except ProtocolError:
            assert rnd.phase == before
            continue
        assert before == ALLOWED[op]
        assert rnd.phase >= before
    assert ledger.conserved()
