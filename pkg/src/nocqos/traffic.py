"""(sigma, rho) arrival envelopes, event traces, conformance and leaky-bucket shaping.

Time is in seconds and data in bytes throughout this module.  A trace is a
sequence of instantaneous arrivals ``(time, amount)``; cumulative arrivals are
therefore step functions and every supremum over windows is attained at event
instants.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

__all__ = [
    "ArrivalEnvelope",
    "TrafficTrace",
    "LeakyBucketShaper",
    "envelope_bound",
    "conforms",
    "max_excess",
    "shape",
    "greedy_source",
    "read_trace_csv",
    "write_trace_csv",
]

# relative slack used when comparing floating-point byte counts
REL_TOL = 1e-9


def _slack(scale: float) -> float:
    return REL_TOL * max(1.0, abs(scale))


@dataclass(frozen=True)
class ArrivalEnvelope:
    """Affine arrival constraint ``b(t) = sigma + rho * t``.

    >>> ArrivalEnvelope(sigma=4, rho=2).bound(3)
    10.0
    """

    sigma: float
    rho: float

    def __post_init__(self):
        if not (self.sigma >= 0 and self.rho >= 0):
            raise ValueError(f"envelope needs sigma >= 0 and rho >= 0, got {self}")
        if math.isinf(self.sigma) or math.isinf(self.rho):
            raise ValueError("envelope parameters must be finite")

    def bound(self, dt: float) -> float:
        return envelope_bound(self, dt)

    def __add__(self, other: "ArrivalEnvelope") -> "ArrivalEnvelope":
        return ArrivalEnvelope(self.sigma + other.sigma, self.rho + other.rho)


ZERO_ENVELOPE = ArrivalEnvelope(0.0, 0.0)


@dataclass(frozen=True)
class TrafficTrace:
    """Ordered arrival events ``(time_s, bytes)``.

    Event times are nondecreasing and amounts strictly positive.  Several events
    may share a timestamp.
    """

    events: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        evs = tuple((float(t), float(a)) for t, a in self.events)
        prev = -math.inf
        for t, a in evs:
            if not math.isfinite(t):
                raise ValueError(f"non-finite event time {t}")
            if t < prev:
                raise ValueError("event times must be nondecreasing")
            if not a > 0:
                raise ValueError(f"event amount must be > 0, got {a}")
            prev = t
        object.__setattr__(self, "events", evs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[float, float]]) -> "TrafficTrace":
        return cls(tuple(pairs))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self.events]

    @property
    def total(self) -> float:
        return math.fsum(a for _, a in self.events)

    def cumulative(self, t: float) -> float:
        """Bytes arrived in ``[-inf, t]`` (right-continuous step function)."""
        return math.fsum(a for s, a in self.events if s <= t)

    def arrivals(self, start: float, end: float) -> float:
        """Bytes arrived in the closed window ``[start, end]``."""
        return math.fsum(a for s, a in self.events if start <= s <= end)


def envelope_bound(env: ArrivalEnvelope, dt: float) -> float:
    """Maximum data an ``env``-constrained flow may send in a window of length ``dt``."""
    if dt < 0:
        raise ValueError(f"window length must be >= 0, got {dt}")
    return env.sigma + env.rho * dt


def max_excess(trace: TrafficTrace, env: ArrivalEnvelope) -> float:
    """Largest ``arrivals[x, y] - (sigma + rho (y - x))`` over event-time windows.

    Runs in one pass: for a window ending at event ``j`` the best start is the
    event ``i <= j`` maximising ``rho * t_i - A_{i-1}``, where ``A`` is the
    running byte count.  Returns ``-inf`` for an empty trace.
    """
    best = -math.inf
    before = 0.0  # bytes strictly before event i
    start_term = -math.inf
    for t, a in trace.events:
        start_term = max(start_term, env.rho * t - before)
        before += a
        best = max(best, before - env.rho * t + start_term - env.sigma)
    return best


def conforms(trace: TrafficTrace, env: ArrivalEnvelope) -> bool:
    """True iff every window ``[x, y]`` carries at most ``sigma + rho (y - x)`` bytes.

    The comparison is non-strict so a bucket filled exactly to ``sigma`` is
    conformant.
    """
    excess = max_excess(trace, env)
    return excess <= _slack(env.sigma + trace.total)


@dataclass(frozen=True)
class LeakyBucketShaper:
    """Delay-based leaky-bucket regulator.

    The bucket holds ``bucket_level`` bytes at ``last_update`` and leaks at
    ``envelope.rho``.  Data leaves as soon as pouring it in would not overflow
    the bucket.  When the bucket must be refilled gradually, data is released
    in chunks of at most ``quantum`` bytes.  A zero-depth bucket cannot pass
    any instantaneous event, so ``sigma = 0`` is treated as one quantum deep
    and the output is a rate-``rho`` staircase of quantum-sized events.
    """

    envelope: ArrivalEnvelope
    bucket_level: float = 0.0
    last_update: float = 0.0
    quantum: float = 1.0

    def __post_init__(self):
        if not self.quantum > 0:
            raise ValueError("quantum must be > 0")
        if not 0 <= self.bucket_level <= self.depth + _slack(self.depth):
            raise ValueError(f"bucket_level {self.bucket_level} outside [0, {self.depth}]")

    @property
    def depth(self) -> float:
        return self.envelope.sigma if self.envelope.sigma > 0 else self.quantum

    @property
    def effective_envelope(self) -> ArrivalEnvelope:
        """Envelope the shaped output is guaranteed to respect."""
        return ArrivalEnvelope(self.depth, self.envelope.rho)

    def shape(self, trace: TrafficTrace) -> TrafficTrace:
        return shape(self, trace)


def shape(shaper: LeakyBucketShaper, trace: TrafficTrace) -> TrafficTrace:
    """Delay non-conformant data until the bucket has room for it.

    Bytes keep their FCFS order, never leave before they arrive and are never
    dropped.  Input events are never merged, so a trace that already conforms
    is returned unchanged.
    """
    if not trace.events:
        return trace
    depth = shaper.depth
    rho = shaper.envelope.rho
    q = min(shaper.quantum, depth)
    if trace.events[0][0] < shaper.last_update:
        raise ValueError("trace starts before the shaper's last_update")
    if rho == 0 and shaper.bucket_level + trace.total > depth + _slack(depth):
        raise ValueError("a zero-rate bucket cannot release more than its depth")

    level = shaper.bucket_level
    now = shaper.last_update
    out: list[tuple[float, float]] = []
    for t_arr, amount in trace.events:
        if t_arr > now:
            level = max(0.0, level - rho * (t_arr - now))
            now = t_arr
        remaining = amount
        while remaining > 0:
            room = depth - level
            chunk = min(remaining, q)
            if remaining <= room + _slack(depth):
                chunk = remaining
            elif room >= chunk - _slack(depth):
                chunk = min(remaining, max(chunk, room))
            else:
                # wait for the bucket to leak enough for one chunk
                wait = (chunk - room) / rho
                now += wait
                level = depth - chunk
            if chunk >= remaining - _slack(remaining):
                chunk = remaining
            out.append((now, chunk))
            level = min(depth, level + chunk)
            remaining -= chunk
    return TrafficTrace(tuple(out))


def greedy_source(env: ArrivalEnvelope, duration: float, granularity: float) -> TrafficTrace:
    """Worst-case source: ``sigma`` at ``t = 0``, then rate ``rho`` in ``granularity``-byte events.

    Events are never larger than ``sigma``, since an instantaneous event
    must fit in the burst allowance; a zero-burst envelope with positive rate
    therefore has no event-based realisation and is rejected.

    >>> greedy_source(ArrivalEnvelope(8, 4), duration=2, granularity=4).events
    ((0.0, 8.0), (1.0, 4.0), (2.0, 4.0))
    """
    if not granularity > 0:
        raise ValueError("granularity must be > 0")
    if not duration > 0:
        raise ValueError("duration must be > 0")
    events: list[tuple[float, float]] = []
    if env.sigma > 0:
        events.append((0.0, env.sigma))
    if env.rho > 0:
        if env.sigma == 0:
            raise ValueError("sigma = 0 admits no instantaneous arrivals at rate rho > 0")
        chunk = min(granularity, env.sigma)
        k = 1
        while True:
            t = k * chunk / env.rho
            if t > duration * (1 + REL_TOL):
                break
            events.append((t, chunk))
            k += 1
    return TrafficTrace(tuple(events))


def write_trace_csv(trace: TrafficTrace, path: str | Path | None = None) -> str:
    """Serialise as ``time_s,bytes`` CSV; also writes ``path`` when given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_s", "bytes"])
    for t, a in trace.events:
        w.writerow([repr(t), repr(a)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_trace_csv(source: str | Path | Sequence[str]) -> TrafficTrace:
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        lines = Path(source).read_text().splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = list(source)
    rows = csv.DictReader(line for line in lines if line and not line.startswith("#"))
    if rows.fieldnames is None or set(rows.fieldnames) < {"time_s", "bytes"}:
        raise ValueError("trace CSV needs a `time_s,bytes` header")
    return TrafficTrace(tuple((float(r["time_s"]), float(r["bytes"])) for r in rows))
