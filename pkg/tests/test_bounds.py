import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nocqos.bounds import (
    UNBOUNDED,
    DelayBound,
    MuxSpec,
    ServerSpec,
    backlog,
    mux_bracket,
    mux_delay_bound,
    path_delay_bound,
    queue_delay_bound,
    switch_delay_bound,
)
from nocqos.traffic import ArrivalEnvelope, TrafficTrace, greedy_source

from oracles import fifo_backlog_at, fifo_delays, mux_oracle, numeric_mux_max, switch_oracle

E = ArrivalEnvelope


def test_spec_rejects_slow_input_link():
    with pytest.raises(ValueError):
        ServerSpec(c_in=1, c_out=2)
    with pytest.raises(ValueError):
        MuxSpec(c_1=1, c_2=5, c_out=2)


def test_backlog_simple_cases():
    assert backlog(TrafficTrace(), 5, 3) == 0
    assert backlog(TrafficTrace(((0.0, 10.0),)), 5, 1) == 5
    with pytest.raises(ValueError):
        backlog(TrafficTrace(), 0, 1)


@settings(max_examples=200)
@given(
    st.lists(st.tuples(st.integers(0, 4), st.integers(1, 30)), max_size=40),
    st.integers(1, 20),
    st.floats(0, 1),
)
def test_backlog_matches_fifo_drain(steps, c_out, frac):
    times = np.cumsum([g for g, _ in steps]).tolist()
    events = tuple((float(t), float(a)) for t, (_, a) in zip(times, steps))
    tr = TrafficTrace(events)
    horizon = (times[-1] if times else 0) + 5
    for t in np.linspace(0, horizon, 17).tolist() + [frac * horizon]:
        assert math.isclose(backlog(tr, c_out, t), fifo_backlog_at(events, c_out, t), abs_tol=1e-9)


def test_backlog_empties_after_idle_period():
    env = E(30, 2)
    c_out = 5.0
    tr = greedy_source(env, 40, 1)
    idle = env.sigma / (c_out - env.rho)
    assert backlog(tr, c_out, 0) == 30
    assert backlog(tr, c_out, idle + 1) <= 1 + 1e-9  # at most the last granule in flight


def test_queue_delay_bound_examples():
    assert queue_delay_bound(E(100, 50), ServerSpec(100, 100, 0)).value == 1.0
    assert queue_delay_bound(E(100, 150), ServerSpec(100, 100, 0)) is UNBOUNDED
    # a long packet drives the raw expression negative; the bound clamps at 0
    assert queue_delay_bound(E(1, 0), ServerSpec(100, 100, 1000)).value == 0


@given(
    st.floats(0, 100), st.floats(0, 100), st.floats(0, 50), st.floats(0, 50),
    st.floats(1, 100), st.floats(0, 10),
)
def test_queue_delay_bound_monotone(s1, s2, r1, r2, c_out, l):
    server = ServerSpec(c_out * 2, c_out, l)
    lo = queue_delay_bound(E(min(s1, s2), min(r1, r2)), server).value
    hi = queue_delay_bound(E(max(s1, s2), max(r1, r2)), server).value
    assert lo <= hi + 1e-12
    faster = ServerSpec(c_out * 4, c_out * 2, l)
    assert queue_delay_bound(E(s1, r1), faster).value <= queue_delay_bound(E(s1, r1), server).value + 1e-12


def test_mux_delay_bound_examples():
    mux = MuxSpec(10, 10, 10, 0)
    assert mux_delay_bound(E(0, 1), E(0, 1), mux).value == 0
    assert mux_delay_bound(E(0, 6), E(0, 6), mux) is UNBOUNDED


@settings(max_examples=300)
@given(
    st.floats(0, 100), st.floats(0, 100), st.floats(0.01, 0.99), st.floats(0, 1),
    st.floats(1, 100), st.floats(1, 4), st.floats(0, 20),
)
def test_mux_closed_form_matches_grid_maximum(s1, s2, load, split, c_out, c2_ratio, l):
    r1, r2 = c_out * load * split, c_out * load * (1 - split)
    c2 = c_out * c2_ratio
    mux = MuxSpec(c_out, c2, c_out, l)
    closed = mux_delay_bound(E(s1, r1), E(s2, r2), mux).value
    horizon = 10 * (s1 + s2 + l + 1) / c_out
    grid = numeric_mux_max(s1, r1, s2, r2, c2, c_out, l, horizon, points=2001)
    assert math.isclose(closed, grid, rel_tol=1e-6, abs_tol=1e-12)


def test_mux_bracket_is_the_grid_integrand():
    mux = MuxSpec(4, 4, 2, 3)
    assert mux_bracket(E(1, 0.5), E(2, 0.5), mux, 0) == pytest.approx(1 + 2 + 0.5 * 3 / 4)


@given(st.floats(0, 50), st.floats(0, 50), st.floats(0, 50))
def test_mux_monotone_in_bursts(a, b, c):
    mux = MuxSpec(10, 10, 10, 2)
    lo, hi = sorted((a, b))
    assert mux_delay_bound(E(lo, 1), E(c, 1), mux).value <= mux_delay_bound(E(hi, 1), E(c, 1), mux).value
    assert mux_delay_bound(E(c, 1), E(lo, 1), mux).value <= mux_delay_bound(E(c, 1), E(hi, 1), mux).value


@given(st.floats(0, 3), st.floats(0, 3), st.floats(0, 20), st.floats(0, 20))
def test_unbounded_iff_unstable(r1, r2, s1, s2):
    mux = MuxSpec(2, 2, 2, 1)
    server = ServerSpec(2, 2, 1)
    d = switch_delay_bound(E(s1, r1), E(s2, r2), server, mux)
    assert (not d.bounded) == (r1 + r2 > 2)


def test_switch_delay_bound_is_sum():
    server = ServerSpec(10, 10, 0)
    mux = MuxSpec(10, 10, 10, 0)
    assert switch_delay_bound(E(0, 1), E(0, 1), server, mux).value == 0
    # queue: 2/10, mux: (2 + 1)/10
    d = switch_delay_bound(E(2, 1), E(1, 1), server, mux)
    assert d.value == pytest.approx(0.2 + 0.3)
    assert (DelayBound(0.3) + DelayBound(0.2)).value == pytest.approx(0.5)


def test_path_single_hop_equals_switch():
    server, mux = ServerSpec(20, 10, 2), MuxSpec(10, 10, 10, 2)
    env, cross = E(5, 2), E(3, 1)
    single = switch_delay_bound(env, cross, server, mux)
    assert path_delay_bound(["E"], env, [cross], [(server, mux)]) == single


def test_path_unloaded_hops_add_up():
    server, mux = ServerSpec(10, 10, 4), MuxSpec(10, 10, 10, 4)
    env, none = E(0, 3), E(0, 0)
    one = path_delay_bound(["E"], env, [none], [(server, mux)])
    two = path_delay_bound(["E", "L"], env, [none, none], [(server, mux)] * 2)
    assert two.value == pytest.approx(2 * one.value)


def test_path_burst_propagates():
    server, mux = ServerSpec(10, 10, 0), MuxSpec(10, 10, 10, 0)
    env = E(4, 2)
    d1 = switch_delay_bound(env, E(0, 0), server, mux).value
    d2 = switch_delay_bound(E(4 + 2 * d1, 2), E(0, 0), server, mux).value
    got = path_delay_bound(["E", "E"], env, [E(0, 0)] * 2, [(server, mux)] * 2).value
    assert got == pytest.approx(d1 + d2)


def test_path_errors_and_unbounded():
    server, mux = ServerSpec(10, 10, 0), MuxSpec(10, 10, 10, 0)
    with pytest.raises(ValueError):
        path_delay_bound(["E", "L"], E(1, 1), [E(0, 0)], [(server, mux)] * 2)
    hot = path_delay_bound(["E", "L"], E(1, 5), [E(0, 0), E(0, 6)], [(server, mux)] * 2)
    assert hot is UNBOUNDED


def _random_queue_case(rng):
    sigma = int(rng.integers(1, 121))
    c_out = float(rng.uniform(100, 1e4))
    c_in = c_out * float(rng.uniform(1, 4))
    rho = c_out * float(rng.uniform(0, 0.95))
    l = float(rng.uniform(0, sigma))
    return E(sigma, rho), ServerSpec(c_in, c_out, l)


def test_queue_bound_sound_against_byte_fifo():
    rng = np.random.default_rng(11)
    for _ in range(40):
        env, server = _random_queue_case(rng)
        dur = 2 * env.sigma / (server.c_out - env.rho) + 10 / server.c_out
        delays, _, _ = fifo_delays(greedy_source(env, dur, 1).events, server.c_in, server.c_out)
        assert delays.max() <= queue_delay_bound(env, server).value + 1 / server.c_out


def test_queue_bound_needs_packets_within_burst():
    # a packet much longer than the burst allowance breaks the bound's premise
    env, server = E(100, 0), ServerSpec(200, 100, 1000)
    delays, _, _ = fifo_delays(greedy_source(env, 5, 1).events, 200, 100)
    assert queue_delay_bound(env, server).value == 0
    assert delays.max() > 0.4


def test_mux_bound_sound_against_byte_mux():
    rng = np.random.default_rng(12)
    for _ in range(40):
        s1, s2 = (int(x) for x in rng.integers(1, 100, 2))
        c_out = float(rng.uniform(100, 1e4))
        c1, c2 = (c_out * float(x) for x in rng.uniform(1, 4, 2))
        load, split = rng.uniform(0, 0.95), rng.uniform()
        e1, e2 = E(s1, c_out * load * split), E(s2, c_out * load * (1 - split))
        dur = 2 * (s1 + s2) / (c_out * (1 - load)) + 10 / c_out
        d1, d2 = mux_oracle(greedy_source(e1, dur, 1).events, greedy_source(e2, dur, 1).events, c1, c2, c_out)
        bound = mux_delay_bound(e1, e2, MuxSpec(c1, c2, c_out, float(rng.uniform(0, 10)))).value
        assert max(d1.max(), d2.max()) <= bound + 1 / c_out


def test_switch_bound_sound_against_byte_switch():
    rng = np.random.default_rng(13)
    for _ in range(20):
        sf, sc = (int(x) for x in rng.integers(1, 100, 2))
        c_out = float(rng.uniform(100, 1e4))
        c_q = c_out * float(rng.uniform(1, 3))
        c_in = c_q * float(rng.uniform(1, 3))
        c2 = c_out * float(rng.uniform(1, 4))
        load, split = rng.uniform(0, 0.95), rng.uniform()
        ef, ec = E(sf, c_out * load * split), E(sc, c_out * load * (1 - split))
        l = float(rng.uniform(0, min(sf, sc)))
        dur = 2 * (sf + sc) / (c_out * (1 - load)) + 10 / c_out
        d = switch_oracle(greedy_source(ef, dur, 1).events, greedy_source(ec, dur, 1).events,
                          c_in, c_q, c2, c_out)
        bound = switch_delay_bound(ef, ec, ServerSpec(c_in, c_q, l), MuxSpec(c_q, c2, c_out, l)).value
        assert d.max() <= bound + 1 / c_q + 1 / c_out
