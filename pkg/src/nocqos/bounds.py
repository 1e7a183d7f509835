"""Deterministic delay and backlog bounds for (sigma, rho) flows through FIFO elements.

A switch is modelled as an input FIFO queue followed by a FIFO multiplexer
onto the output link; routing (the demultiplexer) is instantaneous and adds
nothing.  Rates are in bytes/second, data in bytes, delays in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .traffic import ArrivalEnvelope, TrafficTrace

__all__ = [
    "ServerSpec",
    "MuxSpec",
    "DelayBound",
    "UNBOUNDED",
    "backlog",
    "queue_delay_bound",
    "mux_delay_bound",
    "mux_bracket",
    "switch_delay_bound",
    "path_delay_bound",
    "aggregate",
]


@dataclass(frozen=True)
class ServerSpec:
    """FIFO queue with input link ``c_in``, output link ``c_out`` and max packet length."""

    c_in: float
    c_out: float
    max_packet_l: float = 0.0

    def __post_init__(self):
        if not (self.c_in > 0 and self.c_out > 0):
            raise ValueError("link capacities must be > 0")
        if self.c_in < self.c_out:
            raise ValueError(f"FIFO requires c_in >= c_out, got {self.c_in} < {self.c_out}")
        if self.max_packet_l < 0:
            raise ValueError("max_packet_l must be >= 0")


@dataclass(frozen=True)
class MuxSpec:
    """Two-input cut-through FIFO multiplexer."""

    c_1: float
    c_2: float
    c_out: float
    max_packet_l: float = 0.0

    def __post_init__(self):
        if not (self.c_1 > 0 and self.c_2 > 0 and self.c_out > 0):
            raise ValueError("link capacities must be > 0")
        if self.c_1 < self.c_out or self.c_2 < self.c_out:
            raise ValueError("cut-through multiplexing requires c_1, c_2 >= c_out")
        if self.max_packet_l < 0:
            raise ValueError("max_packet_l must be >= 0")


@dataclass(frozen=True)
class DelayBound:
    """A delay bound in seconds; ``value = inf`` stands for UNBOUNDED."""

    value: float

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError(f"delay bound must be >= 0, got {self.value}")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.value)

    def cycles(self, cycle_time: float) -> float:
        return self.value / cycle_time

    def __add__(self, other: "DelayBound") -> "DelayBound":
        return DelayBound(self.value + other.value)

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        return "UNBOUNDED" if not self.bounded else f"{self.value:.6g}s"


UNBOUNDED = DelayBound(math.inf)


def aggregate(envs: Sequence[ArrivalEnvelope]) -> ArrivalEnvelope:
    """Sum of envelopes, used to fold several competitors into one mux input."""
    return ArrivalEnvelope(math.fsum(e.sigma for e in envs), math.fsum(e.rho for e in envs))


def backlog(trace: TrafficTrace, c_out: float, t: float) -> float:
    """Bytes held in a rate-``c_out`` FIFO at time ``t``.

    ``max_{s <= t} [A[s, t] - c_out (t - s)]`` with ``s`` ranging over event
    instants, clamped at zero.
    """
    if not c_out > 0:
        raise ValueError("c_out must be > 0")
    best = 0.0
    tail = 0.0
    # walk backwards so A[t_i, t] accumulates
    for s, a in reversed(trace.events):
        if s > t:
            continue
        tail += a
        best = max(best, tail - c_out * (t - s))
    return best


def queue_delay_bound(env: ArrivalEnvelope, server: ServerSpec) -> DelayBound:
    """Delay bound of any bit crossing a FIFO queue.

    ``(sigma - (c_out - rho) L / c_in) / c_out``, clamped at zero, or UNBOUNDED
    when ``rho > c_out``.

    >>> queue_delay_bound(ArrivalEnvelope(100, 50), ServerSpec(100, 100, 0)).value
    1.0
    """
    if env.rho > server.c_out:
        return UNBOUNDED
    d = (env.sigma - (server.c_out - env.rho) / server.c_in * server.max_packet_l) / server.c_out
    return DelayBound(max(0.0, d))


def mux_bracket(env1: ArrivalEnvelope, env2: ArrivalEnvelope, mux: MuxSpec, t: float) -> float:
    """``b1(t) + b2(t + L/c_2) - c_out t`` with both backlogs at their envelope."""
    return (env1.bound(t) + env2.bound(t + mux.max_packet_l / mux.c_2) - mux.c_out * t)


def mux_delay_bound(env1: ArrivalEnvelope, env2: ArrivalEnvelope, mux: MuxSpec) -> DelayBound:
    """Delay bound through a FIFO multiplexer.

    The bracket of :func:`mux_bracket` is affine in ``t`` with slope
    ``rho1 + rho2 - c_out``; under stability it peaks at ``t = 0``.
    """
    if env1.rho + env2.rho > mux.c_out:
        return UNBOUNDED
    top = env1.sigma + env2.sigma + env2.rho * mux.max_packet_l / mux.c_2
    return DelayBound(top / mux.c_out)


def switch_delay_bound(
    env_flow: ArrivalEnvelope,
    env_cross: ArrivalEnvelope,
    server: ServerSpec,
    mux: MuxSpec,
) -> DelayBound:
    """Input-queue bound plus multiplexer bound for one switch traversal."""
    dq = queue_delay_bound(env_flow, server)
    dm = mux_delay_bound(env_flow, env_cross, mux)
    if not (dq.bounded and dm.bounded):
        return UNBOUNDED
    return dq + dm


def path_delay_bound(
    route: Sequence,
    env: ArrivalEnvelope,
    per_hop_cross: Sequence[ArrivalEnvelope],
    servers: Sequence[tuple[ServerSpec, MuxSpec]],
) -> DelayBound:
    """Sum of per-switch bounds along ``route``.

    After each hop the flow's burst grows to ``sigma + rho * D_hop`` before it
    meets the next switch.
    """
    if not (len(route) == len(per_hop_cross) == len(servers)):
        raise ValueError(
            f"route, per_hop_cross and servers must have equal lengths "
            f"({len(route)}, {len(per_hop_cross)}, {len(servers)})"
        )
    total = DelayBound(0.0)
    cur = env
    for cross, (server, mux) in zip(per_hop_cross, servers):
        d = switch_delay_bound(cur, cross, server, mux)
        if not d.bounded:
            return UNBOUNDED
        total = total + d
        cur = ArrivalEnvelope(cur.sigma + cur.rho * d.value, cur.rho)
    return total
