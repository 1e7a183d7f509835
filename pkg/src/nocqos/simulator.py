"""Cycle-based flit-level simulation of an n x n mesh NoC.

Each switch has five input ports (Local, N, E, S, W), each with a bounded FIFO
of flits.  Every cycle:

1. shaped sources release packets into their switch's network interface,
   which pushes at most one flit per cycle into the Local input FIFO;
2. the head flit of every input FIFO requests the output port chosen by XY
   routing;
3. each output port grants one requester, oldest arrival first, ties broken
   in port order Local, N, E, S, W;
4. granted flits cross the link into the neighbour's input FIFO (or leave the
   network through the Local output);
5. a flit that meets a full FIFO gets its whole packet dropped.

Buffer space is claimed a packet at a time: a head flit enters a FIFO only if
the FIFO can also hold the rest of its packet, and the slots stay reserved
until the body flits arrive.  A FIFO is therefore "full" for a head flit when
fewer than ``flits_per_packet`` slots are free, and body flits never meet a
full FIFO.  Dropped packets leave no stray flits downstream of the drop point.

Rows grow southwards and columns eastwards; a flit crosses one link per cycle.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .traffic import ArrivalEnvelope, LeakyBucketShaper, TrafficTrace, shape

__all__ = [
    "PORTS",
    "MeshConfig",
    "FlowSpec",
    "Packet",
    "Flit",
    "SimStats",
    "CycleSnapshot",
    "EedSummary",
    "NoSamplesError",
    "route_xy",
    "route_switches",
    "run",
    "eed_stats",
    "drop_rate",
    "zero_load_eed",
]

# port order doubles as the arbitration tie-break priority
PORTS = ("L", "N", "E", "S", "W")
LOCAL, NORTH, EAST, SOUTH, WEST = range(5)
_OPPOSITE = {NORTH: SOUTH, SOUTH: NORTH, EAST: WEST, WEST: EAST}
_STEP = {NORTH: (-1, 0), SOUTH: (1, 0), EAST: (0, 1), WEST: (0, -1)}

Coord = tuple[int, int]


class NoSamplesError(ValueError):
    """Raised when a statistic is requested over an empty sample set."""


@dataclass(frozen=True)
class MeshConfig:
    n: int = 4
    buffer_size: int = 16  # flits per input port
    link_capacity: float = 2e9  # bytes/s
    flit_size: int = 8  # bits
    flits_per_packet: int = 4

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("mesh dimension n must be >= 2")
        if self.buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")
        if self.flits_per_packet < 1:
            raise ValueError("flits_per_packet must be >= 1")
        if self.buffer_size < self.flits_per_packet:
            raise ValueError("buffer_size must hold at least one packet")
        if not self.link_capacity > 0 or self.flit_size <= 0:
            raise ValueError("link_capacity and flit_size must be > 0")

    @property
    def flit_bytes(self) -> float:
        return self.flit_size / 8

    @property
    def packet_bytes(self) -> float:
        return self.flits_per_packet * self.flit_bytes

    @property
    def cycle_time(self) -> float:
        """Seconds for one flit to cross one link at full capacity."""
        return self.flit_bytes / self.link_capacity


@dataclass(frozen=True)
class FlowSpec:
    source: Coord
    dest: Coord
    envelope: ArrivalEnvelope

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        object.__setattr__(self, "dest", tuple(self.dest))
        if self.source == self.dest:
            raise ValueError(f"flow source and dest coincide at {self.source}")


@dataclass
class Packet:
    id: int
    flow: int
    inject_time: int
    n_flits: int
    dest: int  # switch index
    source: int
    sent: int = 0  # flits pushed into the network so far
    dropped: bool = False


class Flit(NamedTuple):
    packet_id: int
    seq: int
    arrival: int  # cycle the flit entered its current FIFO

    def is_head(self) -> bool:
        return self.seq == 0


class CycleSnapshot(NamedTuple):
    cycle: int
    injected: int
    delivered: int
    dropped: int
    in_flight: int
    max_occupancy: int


@dataclass
class SimStats:
    packets_injected: int = 0
    packets_delivered: int = 0
    packets_dropped: int = 0
    flits_dropped: int = 0
    # (packet id, flow index, delay in cycles)
    eed_samples: list[tuple[int, int, int]] = field(default_factory=list)
    cycles_run: int = 0
    cycle_time: float = 0.0
    max_occupancy: int = 0

    @property
    def packets_in_flight(self) -> int:
        return self.packets_injected - self.packets_delivered - self.packets_dropped

    def delays(self, flow: int | None = None) -> list[int]:
        return [d for _, f, d in self.eed_samples if flow is None or f == flow]


@dataclass(frozen=True)
class EedSummary:
    count: int
    mean_cycles: float
    max_cycles: int
    p99_cycles: int
    cycle_time: float

    @property
    def mean_s(self) -> float:
        return self.mean_cycles * self.cycle_time

    @property
    def max_s(self) -> float:
        return self.max_cycles * self.cycle_time

    @property
    def p99_s(self) -> float:
        return self.p99_cycles * self.cycle_time


def _check_coord(c: Coord, n: int) -> None:
    r, k = c
    if not (0 <= r < n and 0 <= k < n):
        raise ValueError(f"coordinate {c} outside {n}x{n} grid")


def route_xy(src: Coord, dst: Coord, n: int = 4) -> list[str]:
    """Output ports taken at each switch: columns first, then rows, then Local.

    >>> route_xy((0, 0), (3, 3))
    ['E', 'E', 'E', 'S', 'S', 'S', 'L']
    """
    _check_coord(src, n)
    _check_coord(dst, n)
    (r0, c0), (r1, c1) = src, dst
    ports = ["E" if c1 > c0 else "W"] * abs(c1 - c0)
    ports += ["S" if r1 > r0 else "N"] * abs(r1 - r0)
    return ports + ["L"]


def route_switches(src: Coord, dst: Coord, n: int = 4) -> list[tuple[Coord, str]]:
    """``(switch, output port)`` pairs visited along the XY route."""
    out = []
    cur = tuple(src)
    for p in route_xy(src, dst, n):
        out.append((cur, p))
        if p != "L":
            dr, dc = _STEP[PORTS.index(p)]
            cur = (cur[0] + dr, cur[1] + dc)
    return out


def zero_load_eed(config: MeshConfig, src: Coord, dst: Coord) -> int:
    """Contention-free latency in cycles: one cycle per port traversal plus serialisation."""
    return len(route_xy(src, dst, config.n)) + config.flits_per_packet - 1


def _next_port_table(n: int) -> list[list[int]]:
    table = [[LOCAL] * (n * n) for _ in range(n * n)]
    for s in range(n * n):
        r0, c0 = divmod(s, n)
        for d in range(n * n):
            r1, c1 = divmod(d, n)
            if c1 > c0:
                table[s][d] = EAST
            elif c1 < c0:
                table[s][d] = WEST
            elif r1 > r0:
                table[s][d] = SOUTH
            elif r1 < r0:
                table[s][d] = NORTH
    return table


def _release_cycles(flow: FlowSpec, config: MeshConfig, duration: int, rng) -> list[int]:
    """Packet release cycles of a Bernoulli source shaped to the flow envelope.

    The shaper bucket is at least one packet deep so packets are never split.
    """
    pkt = config.packet_bytes
    rho = flow.envelope.rho * config.cycle_time  # bytes per cycle
    p = min(1.0, rho / pkt)
    if p <= 0:
        return []
    raw = np.flatnonzero(rng.random(duration) < p)
    trace = TrafficTrace(tuple((float(c), pkt) for c in raw))
    env = ArrivalEnvelope(max(flow.envelope.sigma, pkt), rho)
    shaped = shape(LeakyBucketShaper(env, quantum=pkt), trace)
    return [math.ceil(t - 1e-9) for t, _ in shaped.events]


def run(
    config: MeshConfig,
    flows: Sequence[FlowSpec],
    duration: int,
    seed: int = 0,
    *,
    drain: bool = True,
    observer: Callable[[CycleSnapshot], None] | None = None,
    release_cycles: Sequence[Sequence[int]] | None = None,
) -> SimStats:
    """Simulate ``duration`` cycles of packet generation.

    With ``drain`` the network keeps running without new releases until it is
    empty; otherwise packets still queued are reported as in flight.
    ``release_cycles`` replaces the random shaped sources with explicit
    per-flow release cycles.
    """
    if duration <= 0:
        raise ValueError("duration must be > 0 cycles")
    n = config.n
    for fl in flows:
        _check_coord(fl.source, n)
        _check_coord(fl.dest, n)

    if release_cycles is None:
        seqs = np.random.SeedSequence(seed).spawn(len(flows))
        release_cycles = [
            _release_cycles(fl, config, duration, np.random.default_rng(ss))
            for fl, ss in zip(flows, seqs)
        ]
    elif len(release_cycles) != len(flows):
        raise ValueError("release_cycles needs one entry per flow")

    nf = config.flits_per_packet
    cap = config.buffer_size
    nsw = n * n
    next_port = _next_port_table(n)
    neighbour = [[-1] * 5 for _ in range(nsw)]
    for s in range(nsw):
        r, c = divmod(s, n)
        for p, (dr, dc) in _STEP.items():
            rr, cc = r + dr, c + dc
            if 0 <= rr < n and 0 <= cc < n:
                neighbour[s][p] = rr * n + cc

    # packets in global release order; ties by flow index
    releases = sorted(
        (int(cyc), fi) for fi, cycles in enumerate(release_cycles) for cyc in cycles
        if 0 <= cyc < duration
    )
    packets: list[Packet] = []
    for cyc, fi in releases:
        fl = flows[fi]
        packets.append(Packet(
            id=len(packets), flow=fi, inject_time=int(cyc), n_flits=nf,
            dest=fl.dest[0] * n + fl.dest[1], source=fl.source[0] * n + fl.source[1],
        ))

    fifos = [[deque() for _ in range(5)] for _ in range(nsw)]
    # slots held for body flits still on their way: packet id -> count, per FIFO
    held: list[list[dict[int, int]]] = [[{} for _ in range(5)] for _ in range(nsw)]
    rni = [deque() for _ in range(nsw)]
    stats = SimStats(cycle_time=config.cycle_time)
    occupied = 0  # flits inside FIFOs

    def admit(s: int, p: int, flit: Flit, pkt: Packet) -> bool:
        """Append ``flit`` unless it is a head that cannot reserve a whole packet."""
        nonlocal occupied
        q, h = fifos[s][p], held[s][p]
        if flit.seq == 0:
            if len(q) + sum(h.values()) + pkt.n_flits > cap:
                return False
            if pkt.n_flits > 1:
                h[pkt.id] = pkt.n_flits - 1
        else:
            left = h.pop(pkt.id) - 1
            if left:
                h[pkt.id] = left
        q.append(flit)
        occupied += 1
        return True

    def drop(pkt: Packet) -> None:
        nonlocal occupied
        pkt.dropped = True
        stats.packets_dropped += 1
        stats.flits_dropped += pkt.n_flits
        for sw, hs in zip(fifos, held):
            for q, h in zip(sw, hs):
                h.pop(pkt.id, None)
                if any(f.packet_id == pkt.id for f in q):
                    kept = [f for f in q if f.packet_id != pkt.id]
                    occupied -= len(q) - len(kept)
                    q.clear()
                    q.extend(kept)

    nxt = 0
    cycle = 0
    while True:
        if cycle >= duration:
            if not drain or (occupied == 0 and not any(rni) and nxt >= len(packets)):
                break
        # 1. releases and injection
        while nxt < len(packets) and packets[nxt].inject_time <= cycle:
            pkt = packets[nxt]
            rni[pkt.source].append(pkt)
            stats.packets_injected += 1
            nxt += 1
        for s in range(nsw):
            q = rni[s]
            while q and q[0].dropped:
                q.popleft()
            if not q:
                continue
            pkt = q[0]
            if not admit(s, LOCAL, Flit(pkt.id, pkt.sent, cycle), pkt):
                q.popleft()
                drop(pkt)
                continue
            pkt.sent += 1
            if pkt.sent == pkt.n_flits:
                q.popleft()

        # 2-3. requests and output arbitration
        moves = []
        for s in range(nsw):
            sw = fifos[s]
            winners: dict[int, tuple[int, int]] = {}
            for p in range(5):
                q = sw[p]
                if not q:
                    continue
                head = q[0]
                out = next_port[s][packets[head.packet_id].dest]
                best = winners.get(out)
                if best is None or head.arrival < sw[best[1]][0].arrival:
                    winners[out] = (out, p)
            for out, p in sorted(winners.values()):
                moves.append((s, p, out))

        # 4. traversal
        arrivals = []
        for s, p, out in moves:
            flit = fifos[s][p].popleft()
            occupied -= 1
            pkt = packets[flit.packet_id]
            if out == LOCAL:
                if flit.seq == pkt.n_flits - 1:
                    stats.packets_delivered += 1
                    stats.eed_samples.append((pkt.id, pkt.flow, cycle + 1 - pkt.inject_time))
            else:
                arrivals.append((neighbour[s][out], _OPPOSITE[out], flit))

        # 5. buffer admission
        for dst, port, flit in arrivals:
            pkt = packets[flit.packet_id]
            if pkt.dropped:
                continue
            if not admit(dst, port, Flit(flit.packet_id, flit.seq, cycle + 1), pkt):
                drop(pkt)

        cycle += 1
        occ = max(len(q) for sw in fifos for q in sw) if occupied else 0
        if occ > stats.max_occupancy:
            stats.max_occupancy = occ
        if observer is not None:
            observer(CycleSnapshot(
                cycle, stats.packets_injected, stats.packets_delivered,
                stats.packets_dropped, stats.packets_in_flight, occ,
            ))

    stats.cycles_run = cycle
    return stats


def eed_stats(stats: SimStats, flow: int | None = None) -> EedSummary:
    """Mean, max and nearest-rank p99 end-to-end delay over delivered packets."""
    d = stats.delays(flow)
    if not d:
        raise NoSamplesError("no delivered packets")
    arr = np.asarray(d)
    p99 = int(np.percentile(arr, 99, method="inverted_cdf"))
    return EedSummary(len(d), float(arr.mean()), int(arr.max()), p99, stats.cycle_time)


def drop_rate(stats: SimStats) -> float:
    """Percentage of injected packets that were dropped."""
    if stats.packets_injected == 0:
        raise NoSamplesError("no injected packets")
    return 100.0 * stats.packets_dropped / stats.packets_injected
