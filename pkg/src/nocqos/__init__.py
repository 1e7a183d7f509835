"""Network-calculus bounds, mesh NoC simulation and a weighted QoS metric."""

from .traffic import (
    ArrivalEnvelope, LeakyBucketShaper, TrafficTrace, conforms, envelope_bound,
    greedy_source, shape,
)
from .bounds import (
    UNBOUNDED, DelayBound, MuxSpec, ServerSpec, backlog, mux_delay_bound,
    path_delay_bound, queue_delay_bound, switch_delay_bound,
)
from .simulator import FlowSpec, MeshConfig, SimStats, drop_rate, eed_stats, route_xy, run

__version__ = "0.1.0"
