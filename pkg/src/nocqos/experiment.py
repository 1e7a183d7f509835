"""Experiment configuration and the bound / simulate / sweep / qos commands.

Configuration is an INI file read with :mod:`configparser`::

    [run]
    seed = 1
    duration_cycles = 20000

    [mesh]
    n = 4
    link_capacity = 2e9        ; bytes/s
    flit_size = 8              ; bits
    flits_per_packet = 4

    [bound]
    max_packet_bytes = 4       ; L; defaults to one packet

    [flow.tagged]              ; the first flow is the measured one
    source = 0, 0
    dest = 3, 3
    sigma = 4                  ; bytes; defaults to one packet
                               ; no `rate` -> follows the swept application rate
    [flow.background]
    source = 0, 1
    dest = 3, 3
    rate = 0.2e9

    [sweep]
    buffer_sizes = 4, 8, 16, 32, 64          ; flits
    application_rates = 0.25e9, 0.5e9, 1e9, 1.5e9, 1.9e9

    [qos]
    k = 1.1
    parameters = drop_pct:decreasing, eed_mean_cycles:decreasing
    alphas = 0.5 0.5; 0.8 0.2  ; one weight mix per `;`
    rates = 1.9e9              ; optional subset of the swept rates

Every command returns plain rows; :func:`render_csv` adds the header and a
``# config_sha256=...`` provenance line.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from . import bounds
from .bounds import DelayBound, MuxSpec, ServerSpec
from .qos import Direction, QosConfig, QosParameter, qos_curve, report_csv
from .simulator import (
    FlowSpec, MeshConfig, NoSamplesError, SimStats, drop_rate, eed_stats, route_switches, run,
)
from .traffic import ArrivalEnvelope

__all__ = [
    "ConfigError",
    "FlowTemplate",
    "QosSection",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "BOUND_COLUMNS",
    "SIM_COLUMNS",
    "bound_row",
    "cmd_bound",
    "cmd_simulate",
    "cmd_sweep",
    "cmd_qos",
    "sim_row",
    "render_csv",
]

DEFAULT_BUFFERS = (4, 8, 16, 32, 64)
DEFAULT_RATES = (0.25e9, 0.5e9, 1.0e9, 1.5e9, 1.9e9)

BOUND_COLUMNS = [
    "rate_bytes_s",
    "d_queue_s", "d_mux_s", "d_noc_s", "d_path_s",
    "d_queue_cycles", "d_mux_cycles", "d_noc_cycles", "d_path_cycles",
]
SIM_COLUMNS = [
    "buffer_flits", "rate_bytes_s", "injected", "delivered", "dropped", "drop_pct",
    "eed_mean_cycles", "eed_max_cycles",
    "flits_dropped", "eed_p99_cycles", "bound_cycles",
]


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name
        self.message = message


@dataclass(frozen=True)
class FlowTemplate:
    name: str
    source: tuple[int, int]
    dest: tuple[int, int]
    sigma: float
    rate: float | None = None  # None -> swept application rate


@dataclass(frozen=True)
class QosSection:
    k: float = 1.1
    parameters: tuple[tuple[str, str], ...] = (
        ("drop_pct", "decreasing"),
        ("eed_mean_cycles", "decreasing"),
    )
    alphas: tuple[tuple[float, ...], ...] = ((0.5, 0.5),)
    rates: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    mesh: MeshConfig = field(default_factory=MeshConfig)
    flows: tuple[FlowTemplate, ...] = ()
    buffer_sizes: tuple[int, ...] = DEFAULT_BUFFERS
    application_rates: tuple[float, ...] = DEFAULT_RATES
    max_packet_bytes: float | None = None
    qos: QosSection = field(default_factory=QosSection)
    duration: int = 20000
    seed: int = 1

    @property
    def packet_l(self) -> float:
        return self.mesh.packet_bytes if self.max_packet_bytes is None else self.max_packet_bytes

    def flows_at(self, rate: float) -> list[FlowSpec]:
        return [
            FlowSpec(f.source, f.dest, ArrivalEnvelope(f.sigma, rate if f.rate is None else f.rate))
            for f in self.flows
        ]

    def mesh_with(self, buffer_flits: int) -> MeshConfig:
        return dataclasses.replace(self.mesh, buffer_size=int(buffer_flits))

    def digest(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


# ---------------------------------------------------------------- parsing

def _floats(text: str, field_name: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError as e:
        raise ConfigError(field_name, f"expected numbers, got {text!r}") from e
    if not vals:
        raise ConfigError(field_name, "list must not be empty")
    return vals


def _coord(text: str, field_name: str) -> tuple[int, int]:
    vals = _floats(text, field_name)
    if len(vals) != 2 or any(v != int(v) for v in vals):
        raise ConfigError(field_name, f"expected `row, col`, got {text!r}")
    return int(vals[0]), int(vals[1])


def _get(section, key, conv, field_name, default=None):
    if key not in section:
        return default
    try:
        return conv(section[key])
    except (TypeError, ValueError) as e:
        raise ConfigError(field_name, str(e)) from e


def parse_config(text: str, seed: int | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError("config", str(e)) from e

    m = cp["mesh"] if cp.has_section("mesh") else {}
    try:
        mesh = MeshConfig(
            n=_get(m, "n", int, "mesh.n", 4),
            buffer_size=_get(m, "buffer_size", int, "mesh.buffer_size", 16),
            link_capacity=_get(m, "link_capacity", float, "mesh.link_capacity", 2e9),
            flit_size=_get(m, "flit_size", int, "mesh.flit_size", 8),
            flits_per_packet=_get(m, "flits_per_packet", int, "mesh.flits_per_packet", 4),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError("mesh", str(e)) from e

    flows = []
    for name in cp.sections():
        if not name.startswith("flow."):
            continue
        s = cp[name]
        for key in ("source", "dest"):
            if key not in s:
                raise ConfigError(f"{name}.{key}", "missing")
        src = _coord(s["source"], f"{name}.source")
        dst = _coord(s["dest"], f"{name}.dest")
        for key, c in (("source", src), ("dest", dst)):
            if not all(0 <= v < mesh.n for v in c):
                raise ConfigError(f"{name}.{key}", f"{c} outside {mesh.n}x{mesh.n} grid")
        if src == dst:
            raise ConfigError(name, "source and dest coincide")
        sigma = _get(s, "sigma", float, f"{name}.sigma", mesh.packet_bytes)
        rate = _get(s, "rate", float, f"{name}.rate", None)
        if sigma < 0:
            raise ConfigError(f"{name}.sigma", "must be >= 0")
        if rate is not None and not 0 <= rate <= mesh.link_capacity:
            raise ConfigError(f"{name}.rate", "must lie in [0, link_capacity]")
        flows.append(FlowTemplate(name[len("flow."):], src, dst, sigma, rate))
    if not flows:
        raise ConfigError("flow", "at least one [flow.<name>] section is required")

    sw = cp["sweep"] if cp.has_section("sweep") else {}
    buffers = _floats(sw["buffer_sizes"], "sweep.buffer_sizes") if "buffer_sizes" in sw else DEFAULT_BUFFERS
    if any(b < 1 or b != int(b) for b in buffers):
        raise ConfigError("sweep.buffer_sizes", "entries must be positive integers")
    rates = (_floats(sw["application_rates"], "sweep.application_rates")
             if "application_rates" in sw else DEFAULT_RATES)
    if any(not 0 <= r <= mesh.link_capacity for r in rates):
        raise ConfigError("sweep.application_rates", "rates must lie in [0, link_capacity]")

    b = cp["bound"] if cp.has_section("bound") else {}
    max_l = _get(b, "max_packet_bytes", float, "bound.max_packet_bytes", None)
    if max_l is not None and max_l < 0:
        raise ConfigError("bound.max_packet_bytes", "must be >= 0")

    q = cp["qos"] if cp.has_section("qos") else {}
    qos = QosSection()
    if q:
        params = qos.parameters
        if "parameters" in q:
            params = []
            for item in q["parameters"].split(","):
                name, _, direction = item.strip().partition(":")
                if direction.strip().lower() not in ("increasing", "decreasing"):
                    raise ConfigError("qos.parameters", f"bad direction in {item.strip()!r}")
                params.append((name.strip(), direction.strip().lower()))
            params = tuple(params)
        alphas = qos.alphas
        if "alphas" in q:
            alphas = tuple(_floats(mix, "qos.alphas") for mix in q["alphas"].split(";") if mix.strip())
        for mix in alphas:
            if len(mix) != len(params):
                raise ConfigError("qos.alphas", f"mix {mix} needs {len(params)} weights")
        qos = QosSection(
            k=_get(q, "k", float, "qos.k", 1.1),
            parameters=params,
            alphas=alphas,
            rates=_floats(q["rates"], "qos.rates") if "rates" in q else None,
        )
        if qos.k < 1:
            raise ConfigError("qos.k", "must be >= 1")

    r = cp["run"] if cp.has_section("run") else {}
    duration = _get(r, "duration_cycles", int, "run.duration_cycles", 20000)
    if duration <= 0:
        raise ConfigError("run.duration_cycles", "must be > 0")
    cfg_seed = _get(r, "seed", int, "run.seed", 1)

    return ExperimentConfig(
        mesh=mesh,
        flows=tuple(flows),
        buffer_sizes=tuple(int(x) for x in buffers),
        application_rates=tuple(rates),
        max_packet_bytes=max_l,
        qos=qos,
        duration=duration,
        seed=cfg_seed if seed is None else seed,
    )


def load_config(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError("config", str(e)) from e
    return parse_config(text, seed)


# ---------------------------------------------------------------- bounds

def _cross_per_hop(flows: Sequence[FlowSpec], n: int) -> tuple[list, list[ArrivalEnvelope]]:
    """Route of the first flow and, per hop, the aggregate of flows sharing its output port."""
    route = route_switches(flows[0].source, flows[0].dest, n)
    others = [set(route_switches(f.source, f.dest, n)) for f in flows[1:]]
    cross = []
    for hop in route:
        cross.append(bounds.aggregate([f.envelope for f, r in zip(flows[1:], others) if hop in r]))
    return route, cross


@dataclass(frozen=True)
class BoundRow:
    rate: float
    d_queue: DelayBound
    d_mux: DelayBound
    d_noc: DelayBound
    d_path: DelayBound


def bound_row(cfg: ExperimentConfig, rate: float) -> BoundRow:
    """Bounds for the measured (first) flow at one application rate.

    The single-switch columns describe its first switch; the path column sums
    every switch it crosses, ejection included.
    """
    cap = cfg.mesh.link_capacity
    flows = cfg.flows_at(rate)
    route, cross = _cross_per_hop(flows, cfg.mesh.n)
    server = ServerSpec(cap, cap, cfg.packet_l)
    mux = MuxSpec(cap, cap, cap, cfg.packet_l)
    env = flows[0].envelope
    return BoundRow(
        rate=rate,
        d_queue=bounds.queue_delay_bound(env, server),
        d_mux=bounds.mux_delay_bound(env, cross[0], mux),
        d_noc=bounds.switch_delay_bound(env, cross[0], server, mux),
        d_path=bounds.path_delay_bound(route, env, cross, [(server, mux)] * len(route)),
    )


def _fmt_bound(d: DelayBound, scale: float = 1.0) -> str:
    return repr(d.value / scale) if d.bounded else "UNBOUNDED"


def cmd_bound(cfg: ExperimentConfig) -> list[list[str]]:
    ct = cfg.mesh.cycle_time
    rows = []
    for rate in cfg.application_rates:
        b = bound_row(cfg, rate)
        ds = (b.d_queue, b.d_mux, b.d_noc, b.d_path)
        rows.append([repr(rate)] + [_fmt_bound(d) for d in ds] + [_fmt_bound(d, ct) for d in ds])
    return rows


# ---------------------------------------------------------------- simulation

def sim_row(cfg: ExperimentConfig, buffer_flits: int, rate: float, stats: SimStats) -> list[str]:
    try:
        e = eed_stats(stats, flow=0)
        eed = [repr(e.mean_cycles), str(e.max_cycles)]
        p99 = str(e.p99_cycles)
    except NoSamplesError:
        eed, p99 = ["", ""], ""
    try:
        pct = repr(drop_rate(stats))
    except NoSamplesError:
        pct = ""
    bound = bound_row(cfg, rate).d_path
    return [
        str(buffer_flits), repr(rate), str(stats.packets_injected), str(stats.packets_delivered),
        str(stats.packets_dropped), pct, *eed, str(stats.flits_dropped), p99,
        _fmt_bound(bound, cfg.mesh.cycle_time),
    ]


def simulate_point(cfg: ExperimentConfig, buffer_flits: int, rate: float) -> SimStats:
    return run(cfg.mesh_with(buffer_flits), cfg.flows_at(rate), cfg.duration, cfg.seed)


def _point_job(args) -> tuple[tuple[int, float], list[str]]:
    cfg, b, r = args
    try:
        return (b, r), sim_row(cfg, b, r, simulate_point(cfg, b, r))
    except Exception as e:  # noqa: BLE001 - re-raised with the failing point attached
        raise RuntimeError(f"sweep point buffer={b} rate={r!r} failed: {e}") from e


def cmd_simulate(cfg: ExperimentConfig) -> list[list[str]]:
    b, r = cfg.buffer_sizes[0], cfg.application_rates[0]
    return [_point_job((cfg, b, r))[1]]


def cmd_sweep(cfg: ExperimentConfig, jobs: int = 1) -> list[list[str]]:
    points = [(cfg, b, r) for b in cfg.buffer_sizes for r in cfg.application_rates]
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_point_job, points))
    else:
        results = [_point_job(p) for p in points]
    results.sort(key=lambda kv: kv[0])
    return [row for _, row in results]


# ---------------------------------------------------------------- qos

def read_csv_rows(text: str) -> list[dict[str, str]]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def qos_header(cfg: ExperimentConfig) -> list[str]:
    names = [name for name, _ in cfg.qos.parameters]
    return ["rate_bytes_s", "alphas", "control_value", "Q"] + [f"{n}_norm" for n in names]


def cmd_qos(cfg: ExperimentConfig, sweep_csv: str) -> list[list[str]]:
    """Score every buffer size of a sweep for each configured weight mix and rate."""
    rows = read_csv_rows(sweep_csv)
    if not rows:
        raise ConfigError("sweep_csv", "no data rows")
    for name, _ in cfg.qos.parameters:
        if name not in rows[0]:
            raise ConfigError("qos.parameters", f"sweep CSV has no column {name!r}")
    for col in ("buffer_flits", "rate_bytes_s"):
        if col not in rows[0]:
            raise ConfigError("sweep_csv", f"missing column {col!r}")
    rates = sorted({float(r["rate_bytes_s"]) for r in rows})
    wanted = rates if cfg.qos.rates is None else [r for r in rates if r in set(cfg.qos.rates)]
    if cfg.qos.rates is not None and len(wanted) != len(set(cfg.qos.rates)):
        missing = sorted(set(cfg.qos.rates) - set(rates))
        raise ConfigError("qos.rates", f"rates {missing} absent from the sweep CSV")
    out = []
    for rate in wanted:
        at_rate = [r for r in rows if float(r["rate_bytes_s"]) == rate]
        for mix in cfg.qos.alphas:
            params = []
            for (name, direction), alpha in zip(cfg.qos.parameters, mix):
                samples = []
                for r in at_rate:
                    if r[name] == "":
                        raise ConfigError(
                            name, f"no value at buffer_flits={r['buffer_flits']} rate={rate!r}")
                    samples.append((float(r["buffer_flits"]), float(r[name])))
                params.append(QosParameter(name, Direction(direction), alpha, tuple(samples)))
            report = qos_curve(QosConfig(cfg.qos.k, tuple(params)))
            prefix = [("rate_bytes_s", repr(rate)), ("alphas", " ".join(repr(a) for a in mix))]
            out.extend(report_csv(report, prefix))
    return out


# ---------------------------------------------------------------- output

def render_csv(cfg: ExperimentConfig, header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    buf.write(f"# config_sha256={cfg.digest()}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()
