"""Command line entry point.

Exit codes: 0 ok, 1 invalid input or configuration, 2 I/O error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from .. import _backend
from ..errors import InvariantViolation, TraceFormatError
from ..lbq import Variant
from ..lqe_sim import Model, SimParams, better_model, decide_model, simulate
from . import bench
from .pcap import PcapStats, load_pcap
from .pipeline import PipelineConfig, run_pipeline
from .report import emit_report, load_report, to_json
from .trace import TrafficMixConfig, gen_trace, httperf_preset, load_trace

log = logging.getLogger("pktaccel")

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_INVARIANT = 0, 1, 2, 3


def _coerce(text: str):
    try:
        return json.loads(text)
    except ValueError:
        return text


def read_config(path) -> dict:
    """Load a JSON object, or ``key = value`` lines (``#`` starts a comment)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        d = json.loads(text)
        if not isinstance(d, dict):
            raise ValueError("config must be a JSON object")
        return d
    d = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key=value")
        k, v = line.split("=", 1)
        d[k.strip()] = _coerce(v.strip())
    return d


def _settings(args) -> dict:
    d = read_config(args.config) if args.config else {}
    for item in args.set or ():
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        d[k.strip()] = _coerce(v.strip())
    return d


def _write(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _sim_params(args) -> SimParams:
    d = _settings(args)
    d.setdefault("seed", args.seed)
    return SimParams.from_dict(d)


def cmd_decide(args) -> int:
    p = _sim_params(args)
    _write(args, json.dumps(decide_model(p).as_dict()) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    p = _sim_params(args)
    if args.model == "both":
        winner, dt, lq = better_model(p, args.event_list)
        out = {"DT": dt.as_dict(), "LQE": lq.as_dict(), "lower_loss": winner.value,
               "decide": decide_model(p).as_dict()}
        for r in (dt, lq):
            _check_sim(r)
    else:
        r = simulate(p, Model(args.model), args.event_list)
        _check_sim(r)
        out = r.as_dict()
    _write(args, json.dumps(out) + "\n")
    return EXIT_OK


def _check_sim(r) -> None:
    if r.arrived != r.processed + r.dropped_lsr + r.dropped_usq + r.in_flight:
        raise InvariantViolation("simulation counters do not balance")


def cmd_gen_trace(args) -> int:
    d = _settings(args)
    d.setdefault("seed", args.seed)
    if args.packets is not None:
        d["max_packets"] = args.packets
    if args.preset == "httperf":
        rate = d.pop("packet_rate", 40_000.0)
        cfg = httperf_preset(rate, **d)
    else:
        cfg = TrafficMixConfig.from_dict(d)
    if not args.out:
        raise ValueError("gen-trace needs --out")
    n = gen_trace(cfg, args.out)
    log.info("wrote %d packets to %s", n, args.out)
    print(json.dumps({"packets": n, "path": args.out}))
    return EXIT_OK


def _open_trace(path: str):
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head in (b"\xd4\xc3\xb2\xa1", b"\xa1\xb2\xc3\xd4", b"\x4d\x3c\xb2\xa1", b"\xa1\xb2\x3c\x4d"):
        return load_pcap(path, PcapStats())
    return load_trace(path)


def cmd_run(args) -> int:
    d = _settings(args)
    d.setdefault("seed", args.seed)
    cfg = PipelineConfig.from_dict(d)
    cfg.validate()
    rep = run_pipeline(cfg, _open_trace(args.trace))
    if args.out:
        emit_report(rep, args.format, args.out, include_wall=args.wall)
    elif args.format == "json":
        sys.stdout.write(to_json(rep, include_wall=args.wall))
    else:
        raise ValueError("csv output needs --out")
    return EXIT_OK


def cmd_report(args) -> int:
    rep = load_report(args.input)
    rep.check()
    if args.out:
        emit_report(rep, args.format, args.out, include_wall=rep.wall_s is not None)
    else:
        sys.stdout.write(to_json(rep, include_wall=rep.wall_s is not None))
    return EXIT_OK


def cmd_bench_lfn(args) -> int:
    r = bench.lfn_throughput(args.slots, args.ops, seed=args.seed)
    _write(args, json.dumps(r) + "\n")
    return EXIT_OK


def cmd_bench_mrpq(args) -> int:
    r = bench.mrpq_scaling(args.small, args.large, args.ops, args.seed)
    _write(args, json.dumps(r) + "\n")
    return EXIT_OK


def cmd_bench_lbq(args) -> int:
    r = bench.lbq_throughput(args.packets, args.toggles, Variant[args.variant.upper()])
    _write(args, json.dumps(r) + "\n")
    return EXIT_OK if r["ok"] else EXIT_INVARIANT


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    g = argparse.ArgumentParser(add_help=False)
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g.add_argument("--seed", type=int, default=default(0), help="RNG seed (default 0)")
    g.add_argument("--config", default=default(None), help="JSON object or key=value file")
    g.add_argument("--set", action="append", default=default(None), metavar="KEY=VALUE",
                   help="override one config key")
    g.add_argument("--out", default=default(None), help="output path (default stdout)")
    return g


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pktaccel", parents=[_global_flags(False)],
                                 description="Packet-path acceleration toolkit: models, structures, pipeline.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)
    # global flags are accepted after the subcommand too, without clobbering earlier values
    common = _global_flags(True)

    p = sub.add_parser("decide", parents=[common], help="pick DT or LQE for given rates")
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("simulate", parents=[common], help="discrete-event run of one or both models")
    p.add_argument("--model", choices=["DT", "LQE", "both"], default="both")
    p.add_argument("--event-list", choices=["mrpq", "heap"], default="mrpq")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("gen-trace", parents=[common], help="write a synthetic CSV trace")
    p.add_argument("--preset", choices=["mix", "httperf"], default="mix")
    p.add_argument("--packets", type=int, help="stop after this many packets")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("run", parents=[common], help="replay a trace (CSV or pcap) through the pipeline")
    p.add_argument("trace")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--wall", action="store_true", help="include wall-clock seconds in the report")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", parents=[common], help="validate a JSON run report and re-emit it")
    p.add_argument("input")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("bench-lfn", parents=[common], help="LFN table throughput")
    p.add_argument("--slots", type=int, default=1 << 20)
    p.add_argument("--ops", type=int, default=1_000_000)
    p.set_defaults(func=cmd_bench_lfn)

    p = sub.add_parser("bench-mrpq", parents=[common], help="MRPQ vs heap scaling")
    p.add_argument("--small", type=int, default=10_000)
    p.add_argument("--large", type=int, default=1_000_000)
    p.add_argument("--ops", type=int, default=200_000)
    p.set_defaults(func=cmd_bench_mrpq)

    p = sub.add_parser("bench-lbq", parents=[common], help="LBQ two-thread stress throughput")
    p.add_argument("--packets", type=int, default=1_000_000)
    p.add_argument("--toggles", type=int, default=100)
    p.add_argument("--variant", choices=["cas", "handshake"], default="cas")
    p.set_defaults(func=cmd_bench_lbq)
    return ap


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    log.debug("backend: %s", _backend.name())
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (TraceFormatError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
