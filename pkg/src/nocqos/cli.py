"""Command-line front end: ``nocqos {bound,simulate,sweep,qos} --config FILE``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiment as ex
from .qos import WeightViolation


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nocqos", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("bound", "analytic delay bounds per application rate"),
        ("simulate", "one simulation at the first sweep point"),
        ("sweep", "simulate every (buffer size, rate) point"),
        ("qos", "score a sweep CSV with the configured weight mixes"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="experiment INI file")
        sp.add_argument("--out", help="output CSV path (default: stdout)")
        sp.add_argument("--seed", type=int, help="override run.seed")
        sp.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")
        if name == "qos":
            sp.add_argument("--sweep", required=True, help="CSV produced by `nocqos sweep`")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ex.load_config(args.config, seed=args.seed)
        if args.command == "bound":
            text = ex.render_csv(cfg, ex.BOUND_COLUMNS, ex.cmd_bound(cfg))
        elif args.command == "simulate":
            text = ex.render_csv(cfg, ex.SIM_COLUMNS, ex.cmd_simulate(cfg))
        elif args.command == "sweep":
            text = ex.render_csv(cfg, ex.SIM_COLUMNS, ex.cmd_sweep(cfg, jobs=args.jobs))
        else:
            try:
                sweep_text = Path(args.sweep).read_text()
            except OSError as e:
                raise ex.ConfigError("sweep", str(e)) from e
            text = ex.render_csv(cfg, ex.qos_header(cfg), ex.cmd_qos(cfg, sweep_text))
    except ex.ConfigError as e:
        sys.stderr.write(json.dumps({"error": "config", "field": e.field, "message": e.message}) + "\n")
        return 2
    except WeightViolation as e:
        sys.stderr.write(json.dumps({"error": "qos", "field": "qos.alphas", "message": str(e)}) + "\n")
        return 2
    except RuntimeError as e:
        sys.stderr.write(json.dumps({"error": "sweep", "message": str(e)}) + "\n")
        return 1
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
