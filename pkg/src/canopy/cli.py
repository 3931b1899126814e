"""Operations CLI: seed a scenario, run headless simulations, replay traces,
export ledgers, and serve the HTTP API.

Exit codes: 0 success, 1 runtime failure (diagnostic on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import CanopyError
from .model import save_inventory
from .pipeline import SimulationPipeline, replay_trace
from .raster import save_snapshot_text
from .scenario import Scenario, default_scenario

SCENARIO_FILE = "scenario.json"
TRACE_FILE = "trace.hex"
REPORT_FILE = "run-report.json"


def _data_dir(args) -> Path:
    path = Path(args.data_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_scenario(args) -> Scenario:
    path = Path(args.scenario) if getattr(args, "scenario", None) else Path(args.data_dir) / SCENARIO_FILE
    if not path.exists():
        raise CanopyError(f"scenario file not found: {path} (run `canopy seed` first)")
    return Scenario.from_json(path.read_text())


def cmd_seed(args) -> int:
    data_dir = _data_dir(args)
    target = data_dir / SCENARIO_FILE
    if target.exists() and not args.force:
        raise CanopyError(f"{target} already exists; pass --force to overwrite")
    scenario = default_scenario(seed=args.seed)
    target.write_text(scenario.to_json())
    (data_dir / "inventory.lines").write_text(save_inventory(scenario.trees))
    print(f"seeded scenario (seed={scenario.seed}) with {len(scenario.devices)} devices, "
          f"{len(scenario.trees)} trees, {len(scenario.zones)} zones -> {target}")
    return 0


def cmd_simulate(args) -> int:
    data_dir = _data_dir(args)
    scenario = _load_scenario(args)
    pipeline = SimulationPipeline(scenario)
    pipeline.advance(args.ticks)

    trace_path = Path(args.out) if args.out else data_dir / TRACE_FILE
    trace_path.write_text(pipeline.trace_text())
    store_dir = data_dir / "store"
    pipeline.store.export_snapshot(store_dir)
    (data_dir / "alerts.jsonl").write_text(pipeline.engine.export_jsonl())
    (data_dir / "tasks-audit.jsonl").write_text(pipeline.tasks.export_audit_jsonl())
    raster_dir = data_dir / "raster"
    raster_dir.mkdir(exist_ok=True)
    for snap in pipeline.raster.snapshots:
        (raster_dir / f"{snap.snapshot_id}.grid").write_text(save_snapshot_text(snap))

    report = pipeline.run_report(args.ticks)
    (data_dir / REPORT_FILE).write_text(json.dumps(report, indent=2) + "\n")
    print(f"simulated {args.ticks} ticks: {report['store_points']} points, "
          f"{report['alerts_total']} alerts ({report['alerts_open']} open), "
          f"{report['snapshots']} snapshots")
    print(f"trace  digest {report['trace_digest']}")
    print(f"store  digest {report['store_digest']}")
    print(f"reconciliation {'ok' if report['reconciliation_ok'] else 'FAILED'}")
    return 0 if report["reconciliation_ok"] else 1


def cmd_replay(args) -> int:
    data_dir = Path(args.data_dir)
    scenario = _load_scenario(args)
    trace_path = Path(args.trace) if args.trace else data_dir / TRACE_FILE
    if not trace_path.exists():
        raise CanopyError(f"trace file not found: {trace_path}")
    ticks = args.ticks
    if ticks is None:
        report_path = data_dir / REPORT_FILE
        if not report_path.exists():
            raise CanopyError("pass --ticks or run `canopy simulate` first (run report missing)")
        ticks = json.loads(report_path.read_text())["ticks"]
    result = replay_trace(scenario, trace_path.read_text(), ticks)
    digest = result.store.digest()
    print(f"replayed {result.frames} frames over {ticks} ticks")
    print(f"store  digest {digest}")
    if args.expect_digest and args.expect_digest != digest:
        print(f"digest mismatch: expected {args.expect_digest}", file=sys.stderr)
        return 1
    return 0


def cmd_export(args) -> int:
    data_dir = Path(args.data_dir)
    src = {"store": data_dir / "store", "alerts": data_dir / "alerts.jsonl",
           "tasks": data_dir / "tasks-audit.jsonl"}[args.what]
    if not src.exists():
        raise CanopyError(f"nothing to export: {src} missing (run `canopy simulate` first)")
    out = Path(args.out)
    if src.is_dir():
        out.mkdir(parents=True, exist_ok=True)
        n = 0
        for f in sorted(src.glob("*.series")):
            (out / f.name).write_text(f.read_text())
            n += 1
        print(f"exported {n} series files -> {out}")
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(src.read_text())
        print(f"exported {src.name} -> {out}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    scenario = _load_scenario(args)
    pipeline = SimulationPipeline(scenario)
    store_dir = Path(args.data_dir) / "store"
    if store_dir.exists() and not args.fresh:
        pipeline.store.import_snapshot(store_dir)
        last = pipeline.store.max_tick()
        if last is not None:
            # line the clock up behind the imported data so queries default to
            # the right window and demo advances append after it
            pipeline.sim.clock.advance(last + 1)
            pipeline.engine.run_rules(pipeline.store.time_of(last))
    demo = args.demo or os.environ.get("CANOPY_DEMO_MODE", "") == "1"
    static_dir = args.static or os.environ.get("CANOPY_STATIC_DIR") or None
    print(f"serving on http://{args.host}:{args.port} (demo_mode={'on' if demo else 'off'})")
    serve(pipeline, host=args.host, port=args.port, demo_mode=demo, static_dir=static_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="canopy", description=__doc__)
    parser.add_argument("--data-dir", default=os.environ.get("CANOPY_DATA_DIR", "./canopy-data"),
                        help="directory for scenario and run artifacts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("seed", help="write the default scenario and inventory")
    p.add_argument("--seed", type=int, default=20240301)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_seed)

    p = sub.add_parser("simulate", help="run a headless simulation")
    p.add_argument("--scenario", help="scenario file (defaults to <data-dir>/scenario.json)")
    p.add_argument("--ticks", type=int, required=True)
    p.add_argument("--out", help="trace output path (defaults to <data-dir>/trace.hex)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("replay", help="re-ingest a trace and print the store digest")
    p.add_argument("--scenario")
    p.add_argument("--trace", help="trace file (defaults to <data-dir>/trace.hex)")
    p.add_argument("--ticks", type=int, help="tick count of the original run")
    p.add_argument("--expect-digest", help="fail unless the store digest matches")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("export", help="copy a ledger out of the data directory")
    p.add_argument("--what", choices=("store", "alerts", "tasks"), required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("serve", help="serve the HTTP API (and dashboard, if built)")
    p.add_argument("--scenario")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(os.environ.get("CANOPY_PORT", "8800")))
    p.add_argument("--demo", action="store_true", help="enable simulation-control endpoints")
    p.add_argument("--static", help="directory with the built dashboard")
    p.add_argument("--fresh", action="store_true", help="ignore any stored snapshot")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CanopyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
