"""Prioritisation-weighted QoS score over min-max normalised performance parameters."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

__all__ = [
    "Direction",
    "QosParameter",
    "QosConfig",
    "QosReport",
    "WeightViolation",
    "validate_weights",
    "normalize",
    "qos_score",
    "qos_curve",
    "report_csv",
]

WEIGHT_TOL = 1e-9


class Direction(str, enum.Enum):
    """Trend of a parameter as the control variable (buffer size) grows."""

    INCREASING = "increasing"
    DECREASING = "decreasing"


@dataclass(frozen=True)
class QosParameter:
    name: str
    direction: Direction
    alpha: float
    samples: tuple[tuple[float, float], ...] = ()  # (control value, parameter value)

    def __post_init__(self):
        object.__setattr__(self, "direction", Direction(self.direction))
        object.__setattr__(self, "samples", tuple((float(c), float(v)) for c, v in self.samples))

    @property
    def controls(self) -> list[float]:
        return [c for c, _ in self.samples]

    @property
    def values(self) -> list[float]:
        return [v for _, v in self.samples]


@dataclass(frozen=True)
class QosConfig:
    k: float
    parameters: tuple[QosParameter, ...]

    def __post_init__(self):
        object.__setattr__(self, "parameters", tuple(self.parameters))


class WeightViolation(ValueError):
    """A QosConfig breaks the weight or efficiency-coefficient constraints."""


def validate_weights(config: QosConfig) -> None:
    """Raise :class:`WeightViolation` naming the broken constraint; return None if ok."""
    if not config.k >= 1:
        raise WeightViolation(f"efficiency coefficient k must be >= 1, got {config.k}")
    for p in config.parameters:
        if not 0 <= p.alpha <= 1:
            raise WeightViolation(f"weight of {p.name!r} must lie in [0, 1], got {p.alpha}")
    total = math.fsum(p.alpha for p in config.parameters)
    if abs(total - 1) > WEIGHT_TOL:
        raise WeightViolation(f"weights must sum to 1, got {total:.12g}")


def normalize(param: QosParameter, k: float) -> list[float]:
    """Min-max normalise ``param.samples`` into ``[0, 1/k]``.

    Increasing parameters map their minimum to 0, decreasing ones their
    maximum.  A constant series carries no information and maps to all zeros.
    """
    if not param.samples:
        raise ValueError(f"parameter {param.name!r} has no samples")
    if not k >= 1:
        raise ValueError(f"k must be >= 1, got {k}")
    vals = param.values
    lo, hi = min(vals), max(vals)
    span = hi - lo
    if span == 0:
        return [0.0] * len(vals)
    if param.direction is Direction.INCREASING:
        return [abs(v - lo) / (k * span) for v in vals]
    return [abs(hi - v) / (k * span) for v in vals]


def _value_at(param: QosParameter, norm: list[float], control: float) -> float:
    for (c, _), x in zip(param.samples, norm):
        if c == control:
            return x
    raise ValueError(f"parameter {param.name!r} has no sample at control value {control}")


def qos_score(config: QosConfig, control: float) -> float:
    """Weighted sum of normalised parameters at one control value."""
    validate_weights(config)
    return math.fsum(
        p.alpha * _value_at(p, normalize(p, config.k), control) for p in config.parameters
    )


@dataclass(frozen=True)
class QosReport:
    controls: tuple[float, ...]
    q: tuple[float, ...]
    normalized: dict[str, tuple[float, ...]] = field(default_factory=dict)
    degenerate: tuple[str, ...] = ()  # parameters with a constant series


def qos_curve(config: QosConfig) -> QosReport:
    """Evaluate the score at every control value shared by all parameters."""
    validate_weights(config)
    if not config.parameters:
        raise ValueError("no parameters configured")
    grid = config.parameters[0].controls
    for p in config.parameters[1:]:
        if sorted(p.controls) != sorted(grid):
            raise ValueError(f"parameter {p.name!r} uses a different control grid")
    norms = {p.name: normalize(p, config.k) for p in config.parameters}
    controls = sorted(grid)
    q = []
    series: dict[str, list[float]] = {p.name: [] for p in config.parameters}
    for c in controls:
        terms = []
        for p in config.parameters:
            x = _value_at(p, norms[p.name], c)
            series[p.name].append(x)
            terms.append(p.alpha * x)
        q.append(math.fsum(terms))
    degenerate = tuple(p.name for p in config.parameters if len(set(p.values)) == 1)
    return QosReport(
        tuple(controls), tuple(q), {k: tuple(v) for k, v in series.items()}, degenerate
    )


def report_csv(report: QosReport, prefix: Sequence[tuple[str, object]] = ()) -> list[list[str]]:
    """Rows ``[*prefix values, control_value, Q, <param>_norm...]`` (no header)."""
    rows = []
    for i, c in enumerate(report.controls):
        row = [str(v) for _, v in prefix] + [repr(c), repr(report.q[i])]
        row += [repr(report.normalized[name][i]) for name in report.normalized]
        rows.append(row)
    return rows


def report_header(report: QosReport, prefix: Sequence[tuple[str, object]] = ()) -> list[str]:
    return [k for k, _ in prefix] + ["control_value", "Q"] + [f"{n}_norm" for n in report.normalized]


def write_report(report: QosReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(report_header(report))
    w.writerows(report_csv(report))
    return buf.getvalue()
