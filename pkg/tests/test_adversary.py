"""Trace recovery: MAP search against brute force, beams, baselines."""

import math

import numpy as np
import pytest

from privhvac.adversary import (AttackConfig, ImpossibleObservationError,
                                InferenceResult, StateSpaceError,
                                constant_outside_attack, inference_accuracy,
                                map_infer_beam, map_infer_bruteforce,
                                trace_log_posterior)
from privhvac.distortion import identity_scheme, multinomial_scheme
from privhvac.occupancy import (FhmmModel, LocationTrace, ZoneSet,
                                occupancy_from_traces, random_office_model,
                                sample_traces)

from conftest import small_model, two_state_chain


def _instance(seed, M=2, N=1, K=4, noisy=True):
    rng = np.random.default_rng(seed)
    model = random_office_model(M, N, rng)
    traces = sample_traces(model, K, rng)
    series = occupancy_from_traces(traces, model.zone_set)
    if not noisy:
        return model, traces, series.counts
    channel = multinomial_scheme(0.8, M)
    reported = np.array([[int(np.searchsorted(np.cumsum(channel.rows[y]),
                                              rng.random(), side="right"))
                          for y in row] for row in series.counts])
    return model, traces, np.minimum(reported, M)


# ---------------------------------------------------------------------------
# posterior scoring (checked against an explicit product of probabilities)


def test_trace_log_posterior_hand_computed():
    zs = ZoneSet.with_interior(1)
    chain = two_state_chain(0.9, 0.8)
    model = FhmmModel.from_chains(zs, [chain])
    traces = [LocationTrace("occ1", np.array([1, 1, 0]))]
    reported = np.array([[1], [1], [0]])
    got = trace_log_posterior(traces, model, identity_scheme(1), reported)
    # start at the stationary law (about 1/3 inside), stay, leave; identity
    # emissions contribute log 1 = 0
    expected = (math.log(model.initial[0, 1]) + math.log(0.8) + math.log(0.2))
    assert got == pytest.approx(expected, abs=1e-12)
    assert model.initial[0, 1] == pytest.approx(1.0 / 3.0, abs=1e-12)


def test_trace_log_posterior_counts_noisy_emissions():
    zs = ZoneSet.with_interior(1)
    model = FhmmModel.from_chains(zs, [two_state_chain(0.9, 0.8)])
    flip = np.array([[0.9, 0.1], [0.1, 0.9]])
    traces = [LocationTrace("occ1", np.array([1, 0]))]
    reported = np.array([[0], [0]])
    got = trace_log_posterior(traces, model, flip, reported)
    expected = (math.log(model.initial[0, 1]) + math.log(0.2) +
                math.log(0.1) + math.log(0.9))
    assert got == pytest.approx(expected, abs=1e-12)


def test_impossible_report_raises_with_step():
    zs = ZoneSet.with_interior(1)
    model = FhmmModel.from_chains(zs, [two_state_chain()])
    kill = np.array([[1.0, 0.0], [1.0, 0.0]])  # report 1 can never happen
    with pytest.raises(ImpossibleObservationError) as err:
        map_infer_beam(np.array([[0], [1]]), model, kill)
    assert err.value.step == 1


# ---------------------------------------------------------------------------
# beam against brute force


def test_beam_equals_bruteforce_tiny_instances():
    for seed in range(12):
        model, _, reported = _instance(seed)
        beam = map_infer_beam(reported, model, multinomial_scheme(0.8, 2))
        brute = map_infer_bruteforce(reported, model, multinomial_scheme(0.8, 2))
        assert beam.log_posterior == pytest.approx(brute.log_posterior,
                                                   abs=1e-12)
        for a, b in zip(beam.traces, brute.traces):
            np.testing.assert_array_equal(a.steps, b.steps)


def test_beam_posterior_monotone_in_width():
    model, _, reported = _instance(3, M=3, N=2, K=5)
    channel = multinomial_scheme(0.8, 3)
    last = -np.inf
    for width in (1, 4, 16, 64, 27 ** 3):
        res = map_infer_beam(reported, model, channel,
                             AttackConfig(beam_width=width))
        assert res.log_posterior >= last - 1e-12
        last = res.log_posterior


def test_result_posterior_rescored_from_traces():
    model, _, reported = _instance(5, M=2, N=2, K=4)
    channel = multinomial_scheme(0.8, 2)
    res = map_infer_beam(reported, model, channel)
    assert isinstance(res, InferenceResult)
    rescored = trace_log_posterior(res.traces, model, channel, reported)
    assert res.log_posterior == rescored


def test_bruteforce_cap_enforced():
    model, _, reported = _instance(0, M=3, N=2, K=3)
    with pytest.raises(StateSpaceError):
        map_infer_bruteforce(reported, model, identity_scheme(3), cap=10)


def test_narrow_beam_survives_exact_count_emissions():
    """With noiseless count reports a narrow staged beam must still find
    report-consistent traces: branches that cannot complete any observable
    count vector are pruned, not scored and dropped."""
    rng = np.random.default_rng(21)
    model = random_office_model(8, 3, rng)
    traces = sample_traces(model, 6, rng)
    series = occupancy_from_traces(traces, model.zone_set)
    res = map_infer_beam(series.counts, model, identity_scheme(8),
                         AttackConfig(beam_width=200))
    recovered = occupancy_from_traces(list(res.traces), model.zone_set)
    np.testing.assert_array_equal(recovered.counts, series.counts)


def test_clean_reports_recover_high_accuracy():
    model, traces, reported = _instance(9, M=2, N=2, K=12, noisy=False)
    res = map_infer_beam(reported, model, identity_scheme(2))
    # recovered traces must reproduce the observed counts exactly
    rec = occupancy_from_traces(list(res.traces), model.zone_set)
    np.testing.assert_array_equal(rec.counts, reported)
    assert inference_accuracy(res.traces, traces) >= 0.5


# ---------------------------------------------------------------------------
# accuracy metric and baselines


def test_inference_accuracy_counts_matching_steps():
    a = [LocationTrace("x", np.array([0, 1, 2, 0]))]
    b = [LocationTrace("x", np.array([0, 2, 2, 0]))]
    assert inference_accuracy(a, b) == pytest.approx(0.75)
    assert inference_accuracy(a, a) == 1.0


def test_inference_accuracy_accepts_plain_arrays():
    assert inference_accuracy([np.array([0, 1])], [np.array([1, 1])]) == 0.5


def test_inference_accuracy_shape_mismatch():
    with pytest.raises(ValueError):
        inference_accuracy([np.array([0, 1])], [np.array([0, 1, 2])])


def test_constant_outside_attack_stays_outside():
    model, traces, reported = _instance(2, M=2, N=1, K=6)
    res = constant_outside_attack(reported, model, multinomial_scheme(0.8, 2))
    for t in res.traces:
        assert np.all(t.steps == 0)
    outside_frac = np.mean([np.mean(t.steps == 0) for t in traces])
    assert inference_accuracy(res.traces, traces) == pytest.approx(outside_frac)


def test_attack_config_validation():
    with pytest.raises(ValueError):
        AttackConfig(beam_width=0)
    with pytest.raises(ValueError):
        AttackConfig(tie_rule="random")
