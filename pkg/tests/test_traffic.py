import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from nocqos.traffic import (
    ArrivalEnvelope,
    LeakyBucketShaper,
    TrafficTrace,
    conforms,
    envelope_bound,
    greedy_source,
    read_trace_csv,
    shape,
    write_trace_csv,
)

from oracles import naive_conforms


@st.composite
def traces(draw, max_events=40):
    n = draw(st.integers(0, max_events))
    gaps = draw(st.lists(st.integers(0, 5), min_size=n, max_size=n))
    amounts = draw(st.lists(st.integers(1, 20), min_size=n, max_size=n))
    times = np.cumsum(gaps).tolist()
    return TrafficTrace(tuple(zip(map(float, times), map(float, amounts))))


envelopes = st.builds(
    ArrivalEnvelope,
    sigma=st.integers(0, 40).map(float),
    rho=st.integers(0, 10).map(float),
)


@pytest.mark.parametrize("sigma,rho,dt,expected", [(0, 0, 5, 0), (7, 3, 0, 7), (4, 2, 3, 10)])
def test_envelope_bound(sigma, rho, dt, expected):
    assert envelope_bound(ArrivalEnvelope(sigma, rho), dt) == expected


def test_envelope_rejects_negative_window_and_parameters():
    with pytest.raises(ValueError):
        envelope_bound(ArrivalEnvelope(1, 1), -0.1)
    with pytest.raises(ValueError):
        ArrivalEnvelope(-1, 0)


@given(envelopes, st.floats(0, 1e6), st.floats(0, 1e6))
def test_envelope_monotone(env, a, b):
    lo, hi = sorted((a, b))
    assert envelope_bound(env, lo) <= envelope_bound(env, hi)


def test_trace_validation():
    with pytest.raises(ValueError):
        TrafficTrace(((1.0, 1.0), (0.5, 1.0)))
    with pytest.raises(ValueError):
        TrafficTrace(((0.0, 0.0),))
    tr = TrafficTrace(((0.0, 2.0), (0.0, 3.0), (2.0, 1.0)))
    assert tr.cumulative(-1) == 0
    assert tr.cumulative(0) == 5
    assert tr.arrivals(0, 2) == 6


def test_conforms_basic_cases():
    assert conforms(TrafficTrace(), ArrivalEnvelope(0, 0))
    assert not conforms(TrafficTrace(((0.0, 6.0),)), ArrivalEnvelope(5, 0))
    # filling the bucket exactly to sigma is allowed
    assert conforms(TrafficTrace(((0.0, 5.0),)), ArrivalEnvelope(5, 0))


def test_conforms_same_time_events_are_pooled():
    tr = TrafficTrace(((1.0, 3.0), (1.0, 3.0)))
    assert not conforms(tr, ArrivalEnvelope(5, 100))
    assert conforms(tr, ArrivalEnvelope(6, 0))


@settings(max_examples=300)
@given(traces(), envelopes)
def test_conforms_matches_window_enumeration(tr, env):
    assert conforms(tr, env) == naive_conforms(tr.times, [a for _, a in tr], env.sigma, env.rho)


def test_shape_passes_conformant_trace_unchanged():
    tr = TrafficTrace(((0.0, 4.0), (1.0, 2.0), (3.0, 2.0)))
    env = ArrivalEnvelope(4, 2)
    assert conforms(tr, env)
    assert shape(LeakyBucketShaper(env), tr) == tr


def test_shape_burst_released_at_rate():
    sigma, rho = 10.0, 5.0
    out = shape(LeakyBucketShaper(ArrivalEnvelope(sigma, rho)), TrafficTrace(((0.0, 3 * sigma),)))
    assert out.events[0] == (0.0, sigma)
    assert math.isclose(out.events[-1][0], 2 * sigma / rho)
    assert math.isclose(out.total, 3 * sigma)
    assert conforms(out, ArrivalEnvelope(sigma, rho))
    # remainder leaves in one-byte chunks spaced 1/rho apart
    gaps = np.diff([t for t, _ in out.events[1:]])
    assert np.allclose(gaps, 1 / rho)


def test_shape_zero_sigma_is_rate_staircase():
    rho = 4.0
    tr = TrafficTrace(((0.0, 8.0), (0.5, 4.0)))
    shaper = LeakyBucketShaper(ArrivalEnvelope(0, rho), quantum=2.0)
    out = shape(shaper, tr)
    assert math.isclose(out.total, tr.total)
    assert all(a <= 2.0 for _, a in out)
    assert conforms(out, shaper.effective_envelope)
    # steady output rate rho: 12 bytes in 2-byte quanta take 5 spacings of 0.5 s
    assert math.isclose(out.events[-1][0], 2.5)


def test_shape_zero_rate_overflow_rejected():
    with pytest.raises(ValueError):
        shape(LeakyBucketShaper(ArrivalEnvelope(2, 0)), TrafficTrace(((0.0, 3.0),)))


def _byte_release_times(tr):
    out = []
    for t, a in tr:
        out.extend([t] * int(round(a)))
    return out


@settings(max_examples=200, deadline=None)
@given(traces(), st.integers(1, 40).map(float), st.integers(1, 10).map(float))
def test_shape_properties(tr, sigma, rho):
    env = ArrivalEnvelope(sigma, rho)
    shaper = LeakyBucketShaper(env)
    out = shape(shaper, tr)
    assert conforms(out, env)
    assert math.isclose(out.total, tr.total, abs_tol=1e-9)
    # FCFS: the k-th byte leaves no earlier than it arrived
    inp, outp = _byte_release_times(tr), _byte_release_times(out)
    assert len(inp) == len(outp)
    assert all(o >= i - 1e-9 for i, o in zip(inp, outp))
    again = shape(shaper, out)
    assert len(again) == len(out)
    for (t1, a1), (t2, a2) in zip(again, out):
        assert math.isclose(t1, t2, rel_tol=1e-9, abs_tol=1e-9) and math.isclose(a1, a2)


def test_greedy_source_example():
    out = greedy_source(ArrivalEnvelope(8, 4), duration=2, granularity=4)
    assert out.events == ((0.0, 8.0), (1.0, 4.0), (2.0, 4.0))


def test_greedy_source_trivial_cases():
    assert len(greedy_source(ArrivalEnvelope(0, 0), 10, 1)) == 0
    with pytest.raises(ValueError):
        greedy_source(ArrivalEnvelope(1, 1), 1, 0)
    with pytest.raises(ValueError):
        greedy_source(ArrivalEnvelope(0, 1), 1, 1)
    # chunks shrink to the burst allowance so every event fits the bucket
    out = greedy_source(ArrivalEnvelope(2, 1), 4, 3)
    assert all(a <= 2 for _, a in out)


@settings(max_examples=100)
@given(envelopes, st.integers(1, 20).map(float), st.integers(1, 8).map(float))
def test_greedy_source_is_tight(env, duration, gran):
    assume(env.sigma > 0 or env.rho == 0)
    tr = greedy_source(env, duration, gran)
    assert conforms(tr, env)
    # meets the envelope to within one granule at every event instant
    for t, _ in tr:
        assert env.sigma + env.rho * t - tr.cumulative(t) <= gran + 1e-9
    bumped = TrafficTrace(((0.0, 1.0),) + tr.events)
    assert not conforms(bumped, env)


def test_trace_csv_roundtrip(tmp_path):
    tr = TrafficTrace(((0.0, 8.0), (0.25, 4.0)))
    text = write_trace_csv(tr, tmp_path / "t.csv")
    assert text.splitlines()[0] == "time_s,bytes"
    assert read_trace_csv(tmp_path / "t.csv") == tr
    assert read_trace_csv(text) == tr
