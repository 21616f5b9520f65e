"""Command-line entry points.

Exit codes: 0 success, 1 other failure, 2 invalid script or config,
3 audit verification failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import signal
import sys
import threading
import urllib.request

import yaml

from . import iqfile, sensing
from .audit import verify_file
from .paws.wsdb import BindFailure, WsdbState, serve_wsdb
from .scenario import ScriptInvalid, emit_report, load_script, run_scenario
from .spectrum import CLASS_ORDER, ChannelPlan, PlanError
from .waveforms import SynthConfig, synth_channel

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_AUDIT = 3


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_run_scenario(args) -> int:
    try:
        script = load_script(args.script)
        if args.seed is not None:
            script = dataclasses.replace(script, seed=args.seed)
        if args.oracle:
            script = dataclasses.replace(
                script, sensing=dataclasses.replace(script.sensing, classifier="oracle"))
    except ScriptInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    model = sensing.read_model(args.model) if args.model else None
    report = run_scenario(script, model=model, audit_path=args.audit_log)
    _write(args.report, emit_report(report, args.format, include_timing=args.timing))
    return EXIT_OK


def cmd_scan(args) -> int:
    model = (sensing.read_model(args.model) if args.model
             else sensing.default_model(args.seed))
    items = iqfile.load(args.dataset)
    verdicts = []
    hits = labeled = 0
    for i, item in enumerate(items):
        v = sensing.sense_channel(item.buffer, model, args.theta, channel=i)
        verdicts.append(v)
        if item.label is not None:
            labeled += 1
            hits += v.signal_class is item.label
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w")
    try:
        sensing.write_verdicts(out, verdicts, include_timing=args.timing)
    finally:
        if out is not sys.stdout:
            out.close()
    if labeled:
        print(f"accuracy {hits / labeled:.4f} over {labeled} labeled buffers", file=sys.stderr)
    return EXIT_OK


def cmd_synth_dataset(args) -> int:
    items = []
    k = 0
    for cls in CLASS_ORDER:
        for _ in range(args.per_class):
            cfg = SynthConfig(cls, args.snr, args.duration, args.seed * 1_000_003 + k)
            items.append(iqfile.LabeledBuffer(synth_channel(cfg), cls,
                                              args.snr if cls.occupied else float("nan")))
            k += 1
    n = iqfile.save(args.out, items)
    print(f"wrote {n} buffers to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_train_model(args) -> int:
    model = sensing.default_model(args.seed, args.per_class, args.snr, args.duration)
    sensing.save_model(model, args.out)
    print(f"wrote model ({model.descriptor}) to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_serve_wsdb(args) -> int:
    try:
        with open(args.config) as fh:
            doc = yaml.safe_load(fh) or {}
        plan = ChannelPlan.from_config(doc.get("plan"))
        wsdb_doc = dict(doc.get("wsdb", doc))
        wsdb_doc.pop("deadline_s", None)
        state = WsdbState.from_config(wsdb_doc)
    except (OSError, yaml.YAMLError, PlanError, ValueError, TypeError, AttributeError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        server = serve_wsdb(state, plan, args.host, args.port, outage_hold_s=args.outage_hold)
    except BindFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(server.url, flush=True)
    done = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: done.set())
    try:
        done.wait()
    except KeyboardInterrupt:
        pass
    server.stop()
    return EXIT_OK


def _admin_call(url: str, payload: dict) -> dict:
    req = urllib.request.Request(url.rstrip("/") + "/admin", data=json.dumps(payload).encode(),
                                 headers={"Content-Type": "application/json"}, method="POST")
    with urllib.request.urlopen(req, timeout=5) as resp:
        return json.loads(resp.read())


def cmd_wsdb_admin(args) -> int:
    if args.op == "set-outage":
        payload = {"op": "set-outage", "value": args.value == "on"}
    elif args.op == "set-latency":
        payload = {"op": "set-latency", "value": args.seconds}
    elif args.op == "set-availability":
        payload = {"op": "set-availability", "channels": args.channels,
                   "available": not args.unavailable}
    elif args.op == "set-null-ruleset":
        payload = {"op": "set-null-ruleset", "value": args.value == "on"}
    else:
        payload = {"op": "get-state"}
    try:
        print(json.dumps(_admin_call(args.url, payload), sort_keys=True))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def cmd_verify_audit(args) -> int:
    try:
        result = verify_file(args.logfile, args.public_key)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if result.ok:
        print(f"OK {result.entries} entries")
        return EXIT_OK
    print(f"FAIL entry {result.failed_index} at byte offset {result.failed_offset}: "
          f"{result.reason} ({result.entries} entries verified before it)")
    return EXIT_AUDIT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvws-backhaul", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run-scenario", help="run a scenario script and print its report")
    p.add_argument("script")
    p.add_argument("--seed", type=int)
    p.add_argument("--report", help="output file (default stdout)")
    p.add_argument("--format", choices=("text", "structured"), default="text")
    p.add_argument("--audit-log", help="also persist the signed audit log here")
    p.add_argument("--model", help="classifier model file (default: train the reference model)")
    p.add_argument("--oracle", action="store_true", help="substitute the ground-truth classifier")
    p.add_argument("--timing", action="store_true", help="include wall-clock latency fields")
    p.set_defaults(func=cmd_run_scenario)

    p = sub.add_parser("scan", help="classify every buffer of an IQ container")
    p.add_argument("dataset")
    p.add_argument("--model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--theta", type=float, default=sensing.THETA_SENSE)
    p.add_argument("--out", help="verdict stream file (default stdout)")
    p.add_argument("--timing", action="store_true", help="include per-verdict latency")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("synth-dataset", help="write labeled synthetic buffers to an IQ container")
    p.add_argument("out")
    p.add_argument("--per-class", type=int, default=25)
    p.add_argument("--snr", type=float, default=15.0)
    p.add_argument("--duration", type=float, default=0.002)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth_dataset)

    p = sub.add_parser("train-model", help="train and save the reference classifier")
    p.add_argument("out")
    p.add_argument("--per-class", type=int, default=500)
    p.add_argument("--snr", type=float, default=15.0)
    p.add_argument("--duration", type=float, default=0.002)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_model)

    p = sub.add_parser("serve-wsdb", help="run the mock whitespace database")
    p.add_argument("config")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=0)
    p.add_argument("--outage-hold", type=float, default=2.0)
    p.set_defaults(func=cmd_serve_wsdb)

    p = sub.add_parser("wsdb-admin", help="fault injection against a running mock database")
    p.add_argument("url")
    ops = p.add_subparsers(dest="op", required=True)
    o = ops.add_parser("set-outage")
    o.add_argument("value", choices=("on", "off"))
    o = ops.add_parser("set-latency")
    o.add_argument("seconds", type=float)
    o = ops.add_parser("set-availability")
    o.add_argument("channels", type=int, nargs="+")
    o.add_argument("--unavailable", action="store_true")
    o = ops.add_parser("set-null-ruleset")
    o.add_argument("value", choices=("on", "off"))
    ops.add_parser("get-state")
    p.set_defaults(func=cmd_wsdb_admin)

    p = sub.add_parser("verify-audit", help="check an audit log's hash chain and signatures")
    p.add_argument("logfile")
    p.add_argument("--public-key", help="hex Ed25519 key every entry must carry")
    p.set_defaults(func=cmd_verify_audit)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
