import json
import math

import numpy as np
import pytest

from bosonpow.errors import CapacityError, DimensionError, ParameterError
from bosonpow.linalg import beamsplitter, haar_unitary
from bosonpow.sampler import (InputSpec, enumerate_states, exact_distribution, output_amplitude, permuted_input,
                              sample, samples_to_jsonl, state_count)


def test_state_count_and_enumeration():
    assert state_count(6, 2) == math.comb(7, 2) == 21
    states = enumerate_states(6, 2)
    assert len(states) == 21 and states == sorted(states)
    assert all(sum(s) == 2 for s in states)
    with pytest.raises(CapacityError):
        enumerate_states(40, 10, cap=1000)


def test_input_spec_validation():
    assert InputSpec(4, 2, (3, 1)).photon_modes == (1, 3)
    assert InputSpec.first_modes(4, 2).occupation == (1, 1, 0, 0)
    with pytest.raises(ParameterError):
        InputSpec(4, 2, (1, 1))
    with pytest.raises(ParameterError):
        InputSpec(4, 2, (0, 4))


def test_hong_ou_mandel_dip():
    dist = exact_distribution(beamsplitter(), InputSpec(2, 2, (0, 1)))
    p = dist.index()
    assert abs(dist.probs[p[(1, 1)]]) <= 1e-12
    assert dist.probs[p[(2, 0)]] == pytest.approx(0.5)


def test_distribution_normalised_and_single_photon_marginal():
    U = haar_unitary(5, 3)
    dist = exact_distribution(U, InputSpec.first_modes(5, 2))
    assert dist.probs.sum() == pytest.approx(1, abs=1e-12)
    one = exact_distribution(U, InputSpec(5, 1, (2,)))
    # a lone photon in mode 2 exits mode j with probability |U[2, j]|^2
    assert np.allclose(one.probs[::-1], np.abs(U[2]) ** 2)


def test_amplitude_dimension_check():
    with pytest.raises(DimensionError):
        output_amplitude(haar_unitary(3, 0), InputSpec.first_modes(3, 1), (1, 0))


def test_warns_below_quadratic_modes(caplog):
    exact_distribution(haar_unitary(3, 0), InputSpec.first_modes(3, 2))
    assert "collision" in caplog.text


def test_sampling_is_seeded_and_lossy():
    U = haar_unitary(6, 1)
    inp = InputSpec.first_modes(6, 2)
    a = sample(U, inp, 50, seed=7)
    assert a.samples == sample(U, inp, 50, seed=7).samples and a.discarded == 0
    lossy = sample(U, inp, 2000, seed=7, eta=0.5)
    # attempts follow a negative binomial with success probability eta^N = 1/4
    assert 4 * 2000 * 0.8 < lossy.attempts < 4 * 2000 * 1.2
    with pytest.raises(ParameterError):
        sample(U, inp, 10, 0, eta=0.0)


def test_sampler_fidelity():
    U = haar_unitary(6, 11)
    inp = InputSpec.first_modes(6, 2)
    dist = exact_distribution(U, inp)
    draw = sample(U, inp, 100_000, seed=1, dist=dist)
    freq = np.bincount(draw.indices, minlength=len(dist.states)) / 100_000
    assert 0.5 * np.abs(freq - dist.probs).sum() <= 0.05


def test_permuted_input_and_jsonl():
    inp = permuted_input([3, 0, 2, 1], 2)
    assert inp.photon_modes == (0, 3)
    with pytest.raises(ParameterError):
        permuted_input([0, 0, 1], 1)
    lines = samples_to_jsonl([(1, 0, 1), (0, 2, 0)]).splitlines()
    assert json.loads(lines[1]) == {"y": [0, 2, 0]}


def test_distribution_json():
    dist = exact_distribution(beamsplitter(), InputSpec(2, 1, (0,)))
    doc = dist.to_json()
    assert len(doc["states"]) == len(doc["probs"]) == 2
