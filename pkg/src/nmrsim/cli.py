"""Command line front end: ``nmrsim run|sweep|check|list``.

Exit status: 0 when every checker passes on every seed, 1 when some checker
fails, 2 when the scenario or trace cannot be used.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

from . import checkers as ck
from . import scenario as sc
from . import trace as tr
from .lcm_protocols import default_start
from .robot_world import ConfigurationError
from .topology import GraphError

EXIT_OK, EXIT_FAIL, EXIT_BAD_INPUT = 0, 1, 2
OUT_ENV = "NMRSIM_OUT"


def _out_dir(flag: str | None) -> Path:
    return Path(flag or os.environ.get(OUT_ENV) or "nmrsim-out")


def _apply_overrides(scn: sc.Scenario, args) -> None:
    if getattr(args, "seed", None) is not None:
        scn.seeds = [args.seed]
    if getattr(args, "seeds", None):
        seeds = sc.parse_seeds(args.seeds)
        if seeds == "all":
            seeds = list(range(sc.count_enumerated(scn)))
        scn.seeds = seeds
    if not scn.seeds:
        raise sc.ScenarioError("the seed set is empty")
    if getattr(args, "horizon", None) is not None:
        if args.horizon < 1:
            raise sc.ScenarioError("horizon must be positive")
        scn.horizon = args.horizon
    if getattr(args, "checkers", None):
        names = [c for c in args.checkers.split(",") if c]
        unknown = [c for c in names if c not in ck.CHECKERS]
        if unknown:
            raise sc.ScenarioError(f"unknown checkers {unknown}")
        scn.checkers = names


def _fmt_stab(t: float | None) -> str:
    return "never" if t is None else f"{t:g}"


def _row(summary: dict) -> str:
    late = sum(v[0] for v in summary["violations"].values())
    events = summary.get("events", {})
    tail = " ".join(f"{k}={events[k]}" for k in ("PULSE", "ENTER_CS", "LOOK", "MOVE_START") if k in events)
    if "states" in summary:
        tail = f"states={summary['states']} branches={summary['branches']}"
    verdict = "PASS" if summary["pass"] else "FAIL"
    return f"{summary['label']:>10}  {verdict}  stab={_fmt_stab(summary['stabilization']):>7}  late={late:<4} {tail}"


def cmd_run(args) -> int:
    scn = sc.load(args.scenario)
    _apply_overrides(scn, args)
    base = _out_dir(args.out) / scn.name
    trace_dir = base / "traces"
    if not args.no_trace:
        trace_dir.mkdir(parents=True, exist_ok=True)
    base.mkdir(parents=True, exist_ok=True)
    rows = []
    for seed in scn.seeds:
        label = sc._label(scn, seed)
        if args.no_trace or scn.exhaustive:
            outcome = sc.run_seed(scn, seed)
        else:
            # stream events to disk as they are produced
            with open(trace_dir / f"{label}.jsonl", "w") as fh:
                outcome = sc.run_seed(scn, seed, sink=fh)
        summary = outcome.summary()
        summary["verdicts"] = [v.to_dict() for v in outcome.verdicts]
        rows.append(summary)
        print(_row(summary))
        if args.verbose:
            for v in outcome.verdicts:
                for bad in v.late_violations[:10]:
                    print(f"{'':12}{v.name}: {bad.rule} at t={bad.time:g} subjects={list(bad.subjects)}")
    ok = all(r["pass"] for r in rows)
    report = {"scenario": scn.name, "protocol": scn.protocol, "horizon": scn.horizon, "pass": ok, "runs": rows}
    (base / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    print(f"{scn.name}: {sum(r['pass'] for r in rows)}/{len(rows)} runs pass -> {base}")
    return EXIT_OK if ok else EXIT_FAIL


def _sweep_one(job: tuple[sc.Scenario, int]) -> dict:
    scn, seed = job
    return sc.run_seed(scn, seed).summary()


def aggregate(name: str, rows: Sequence[dict]) -> dict:
    if not rows:
        raise sc.ScenarioError("the seed set is empty")
    stabs = [r["stabilization"] for r in rows if r["stabilization"] is not None]
    return {
        "scenario": name,
        "runs": len(rows),
        "pass_rate": sum(r["pass"] for r in rows) / len(rows),
        "max_stabilization": max(stabs) if stabs else None,
        "mean_stabilization": round(statistics.fmean(stabs), 9) if stabs else None,
        "never_stabilized": len(rows) - len(stabs),
        "failures": [r["label"] for r in rows if not r["pass"]],
    }


def sweep(scn: sc.Scenario, jobs: int = 1) -> tuple[dict, list[dict]]:
    work = [(scn, s) for s in scn.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_one, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        rows = [_sweep_one(w) for w in work]
    return aggregate(scn.name, rows), rows


def cmd_sweep(args) -> int:
    scn = sc.load(args.scenario)
    _apply_overrides(scn, args)
    report, rows = sweep(scn, args.jobs)
    if args.verbose:
        for r in rows:
            print(_row(r))
    base = _out_dir(args.out) / scn.name
    base.mkdir(parents=True, exist_ok=True)
    tag = f"{scn.seeds[0]}-{scn.seeds[-1]}"
    (base / f"sweep-{tag}.json").write_text(json.dumps({"aggregate": report, "runs": rows}, indent=1,
                                                       sort_keys=True) + "\n")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK if report["pass_rate"] == 1.0 else EXIT_FAIL


def cmd_check(args) -> int:
    try:
        trace = tr.Trace.read(args.trace)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise tr.TraceError(f"cannot read trace {args.trace}: {exc}") from None
    names = [c for c in args.checkers.split(",") if c] if args.checkers else None
    start = args.start if args.start is not None else default_start(trace)
    verdicts = ck.run_checkers(trace, names, start=start)
    for v in verdicts:
        print(json.dumps(v.to_dict(), sort_keys=True))
    return EXIT_OK if all(v.passed for v in verdicts) else EXIT_FAIL


def cmd_list(args) -> int:
    for name in sc.bundled_names():
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nmrsim", description="Pulse-driven NMR and LCM robot simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("scenario", help="scenario file or bundled scenario name")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--seed", type=int)
        g.add_argument("--seeds", help="A:B (half open) or 'all' in enumerate mode")
        p.add_argument("--horizon", type=int)
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./nmrsim-out)")
        p.add_argument("--checkers", help="comma separated checker names")
        p.add_argument("-v", "--verbose", action="store_true")

    run = sub.add_parser("run", help="run a scenario and write traces plus a verdict report")
    common(run)
    run.add_argument("--no-trace", action="store_true", help="skip writing trace files")
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="aggregate pass rate and stabilization over many seeds")
    common(sw)
    sw.add_argument("--jobs", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)

    chk = sub.add_parser("check", help="run checkers over a JSONL trace")
    chk.add_argument("trace")
    chk.add_argument("--checkers")
    chk.add_argument("--start", type=float)
    chk.set_defaults(func=cmd_check)

    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (sc.ScenarioError, ConfigurationError, GraphError, tr.TraceError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
