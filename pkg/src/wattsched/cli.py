"""Command-line interface: validate, schedule, simulate, sweep, oracle, gen.

Exit codes follow one contract everywhere: 0 success, 2 workflow rejected
as infeasible, 1 hard error (I/O, parse, bad arguments).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .dynamic import SimConfig, run_dynamic, run_monte_carlo
from .oracle import enumerate_optimal
from .platform import CatalogError, Platform, load_platform, platform_to_json
from .scheduling import (
    Schedule,
    asmfr_schedule,
    bcp_schedule,
    check_constraints,
    ldd_schedule,
    lef_schedule,
    schedule_to_json,
)
from .synth import random_platform, random_workflow
from .workflow import (
    Workflow,
    WorkflowError,
    critical_path_time,
    import_dax,
    parse_workflow,
    workflow_to_json,
)

PLATFORM_ENV = "WATTSCHED_PLATFORM"

_STATIC_ALGOS = {
    "bcp": bcp_schedule,
    "lef": lef_schedule,
    "ldd": ldd_schedule,
}


def _schedule_with(algo: str, w: Workflow, p: Platform, th: float) -> Schedule:
    if algo == "asmfr":
        return asmfr_schedule(w, p, th)
    return _STATIC_ALGOS[algo](w, p)


def _load_platform_arg(args: argparse.Namespace) -> Platform:
    path = args.platform or os.environ.get(PLATFORM_ENV)
    if not path:
        raise CatalogError(
            f"no platform catalog given (use --platform or ${PLATFORM_ENV})"
        )
    return load_platform(path)


def _read_workflow_file(path: str | Path, *, df: float | None, rw: float | None, ref_mips: float) -> Workflow:
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() in (".dax", ".xml"):
        text = import_dax(
            text,
            deadline_factor=df if df is not None else 1.5,
            reliability=rw if rw is not None else 0.9,
            reference_mips=ref_mips,
        )
    return parse_workflow(text)


def _load_workflow_arg(args: argparse.Namespace, p: Platform) -> Workflow:
    w = _read_workflow_file(args.workflow, df=args.df, rw=args.rw, ref_mips=args.ref_mips)
    if args.no_deadline:
        slowest = min(vm.cp * vm.f_min for vm in p.vm_types)
        horizon = w.n * max(t.wc for t in w.tasks) / slowest
        w = w.with_deadline(w.arrival + horizon)
    elif args.df is not None:
        w = w.with_deadline(w.arrival + args.df * critical_path_time(w, p))
    if args.rw is not None:
        w = w.with_deadline(w.deadline, reliability=args.rw)
    return w


def _write_out(args: argparse.Namespace, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _summary_line(s: Schedule) -> str:
    parts = [
        f"algorithm={s.algorithm}",
        f"energy={s.total_energy:.6f}",
        f"makespan={s.makespan:.6f}",
        f"reliability={s.reliability:.9f}",
        f"feasible={'true' if s.feasible else 'false'}",
    ]
    if s.selected:
        parts.insert(1, f"selected={s.selected}")
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_validate(args: argparse.Namespace) -> int:
    p = _load_platform_arg(args)
    w = _load_workflow_arg(args, p)
    base = bcp_schedule(w, p)
    if base.feasible:
        print(
            f"feasible: makespan={base.makespan:.6f} "
            f"deadline={w.deadline - w.arrival:.6f} reliability={base.reliability:.9f}"
        )
        return 0
    print(f"rejected: {base.reason}")
    return 2


def cmd_schedule(args: argparse.Namespace) -> int:
    p = _load_platform_arg(args)
    w = _load_workflow_arg(args, p)
    s = _schedule_with(args.algo, w, p, args.th)
    report = check_constraints(w, p, s)
    if s.feasible and not report.ok:
        failed = ", ".join(c.name for c in report.failed())
        print(f"error: internal constraint check failed: {failed}", file=sys.stderr)
        return 1
    _write_out(args, schedule_to_json(s))
    print(_summary_line(s))
    return 0 if s.feasible else 2


def cmd_simulate(args: argparse.Namespace) -> int:
    p = _load_platform_arg(args)
    w = _load_workflow_arg(args, p)
    s = _schedule_with(args.algo, w, p, args.th)
    if not s.feasible:
        print(f"rejected: {s.reason}")
        return 2
    cfg = SimConfig(
        seed=args.seed,
        sample_mean_fraction=args.fraction,
        trials=args.trials,
        failure_injection=args.failure_injection,
        reschedule_algo=args.reschedule_algo,
        threshold=args.th,
        worst_case=args.worst_case,
    )
    trace = run_dynamic(w, p, s, cfg)
    if args.out:
        Path(args.out).write_text(trace.to_jsonl())
    line = (
        f"algorithm=dy({trace.algorithm}) seed={cfg.seed} "
        f"energy={trace.energy:.6f} planned={trace.planned_energy:.6f} "
        f"makespan={trace.makespan:.6f} "
        f"deadline_met={'true' if trace.deadline_met else 'false'} "
        f"success={'true' if trace.success else 'false'}"
    )
    if args.trials > 0:
        executed = Schedule(
            entries=trace.executed,
            total_energy=trace.energy,
            reliability=0.0,
            makespan=trace.makespan,
            feasible=True,
            algorithm="dy",
        )
        mc = run_monte_carlo(w, p, executed, cfg)
        line += f" achieved_reliability={mc.estimate:.6f} ci=[{mc.lo:.6f},{mc.hi:.6f}]"
    print(line)
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    p = _load_platform_arg(args)
    w = _load_workflow_arg(args, p)
    result = enumerate_optimal(w, p, budget=args.max_nodes)
    if result.schedule is not None:
        merged = json.loads(schedule_to_json(result.schedule))
    else:
        merged = {"tasks": {}, "totals": None}
    merged["oracle"] = {
        "status": result.status,
        "explored": result.explored,
        "optimal_energy": result.optimal_energy,
        "replica_policy": result.replica_policy,
    }
    _write_out(args, json.dumps(merged, indent=2))
    print(
        f"oracle status={result.status} explored={result.explored} "
        + (
            f"energy={result.optimal_energy:.6f}"
            if result.optimal_energy is not None
            else "energy=n/a"
        )
    )
    return 2 if result.status == "infeasible" else 0


def cmd_gen(args: argparse.Namespace) -> int:
    if args.kind == "platform":
        p = random_platform(args.seed, n_types=args.n if args.n else None)
        _write_out(args, platform_to_json(p))
        return 0
    w = random_workflow(
        args.seed,
        args.n or 20,
        width=args.width,
        extra_edge_prob=args.fanout,
        reliability=args.rw if args.rw is not None else 0.9,
    )
    _write_out(args, workflow_to_json(w))
    return 0


# ---------------------------------------------------------------------------
# Sweep


_REPORT_COLUMNS = [
    "workflow",
    "algorithm",
    "seed",
    "df",
    "rw",
    "n",
    "planned_energy",
    "realized_energy",
    "makespan",
    "planned_reliability",
    "achieved_reliability",
    "feasible",
]


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _sweep_point(payload: dict) -> list[dict]:
    """One grid point: schedule/simulate each algorithm for each seed."""
    p = load_platform(payload["platform"])
    if payload["param"] == "tasks":
        w = random_workflow(payload["base_seed"], int(payload["value"]))
    else:
        w = _read_workflow_file(
            payload["workflow"],
            df=payload["df"],
            rw=payload["rw"],
            ref_mips=payload["ref_mips"],
        )

    df = payload["df"]
    rw = payload["rw"]
    th = payload["th"]
    value = payload["value"]
    if payload["param"] == "df":
        df = value
    elif payload["param"] == "rw":
        rw = value
    elif payload["param"] == "th":
        th = value
    if df is not None:
        w = w.with_deadline(w.arrival + df * critical_path_time(w, p))
    if rw is not None:
        w = w.with_deadline(w.deadline, reliability=rw)

    rows = []
    for algo in payload["algos"]:
        static_algo = "asmfr" if algo == "dy" else algo
        for seed in payload["seeds"]:
            t0 = time.perf_counter()
            s = _schedule_with(static_algo, w, p, th)
            row = {
                "workflow": w.name,
                "algorithm": algo,
                "seed": seed,
                "df": "" if df is None else df,
                "rw": w.reliability_req,
                "n": w.n,
                "planned_energy": s.total_energy,
                "realized_energy": s.total_energy,
                "makespan": s.makespan,
                "planned_reliability": s.reliability,
                "achieved_reliability": s.reliability,
                "feasible": s.feasible,
                "value": value,
            }
            if s.feasible:
                cfg = SimConfig(
                    seed=seed,
                    sample_mean_fraction=payload["fraction"],
                    trials=payload["trials"],
                )
                if algo == "dy":
                    trace = run_dynamic(w, p, s, cfg)
                    row["realized_energy"] = trace.energy
                    row["makespan"] = trace.makespan
                    measured = Schedule(
                        entries=trace.executed,
                        total_energy=trace.energy,
                        reliability=s.reliability,
                        makespan=trace.makespan,
                        feasible=True,
                        algorithm="dy",
                    )
                else:
                    measured = s
                if payload["trials"] > 0:
                    mc = run_monte_carlo(w, p, measured, cfg)
                    row["achieved_reliability"] = mc.estimate
            row["wall_time_ms"] = (time.perf_counter() - t0) * 1000.0
            rows.append(row)
    return rows


def cmd_sweep(args: argparse.Namespace) -> int:
    try:
        grid = [float(v) for v in args.grid.split(",") if v]
    except ValueError:
        print(f"error: bad grid {args.grid!r}", file=sys.stderr)
        return 1
    if not grid:
        print("error: empty grid", file=sys.stderr)
        return 1
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    for a in algos:
        if a not in ("bcp", "lef", "ldd", "asmfr", "dy"):
            print(f"error: unknown algorithm {a!r}", file=sys.stderr)
            return 1
    if args.param not in ("df", "rw", "th", "tasks"):
        print(f"error: unknown sweep parameter {args.param!r}", file=sys.stderr)
        return 1
    if args.param == "df" and any(v < 1.0 for v in grid):
        print("error: deadline factors must be >= 1", file=sys.stderr)
        return 1
    if args.param != "tasks" and not args.workflow:
        print("error: --workflow required unless sweeping task counts", file=sys.stderr)
        return 1

    payloads = [
        {
            "platform": args.platform or os.environ.get(PLATFORM_ENV),
            "workflow": args.workflow,
            "param": args.param,
            "value": value,
            "df": args.df,
            "rw": args.rw,
            "th": args.th,
            "algos": algos,
            "ref_mips": args.ref_mips,
            "seeds": list(range(args.seeds)),
            "fraction": args.fraction,
            "trials": args.trials,
            "base_seed": args.seed,
        }
        for value in grid
    ]

    out_path = Path(args.out) if args.out else None
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                per_point = list(pool.map(_sweep_point, payloads))
        else:
            per_point = [_sweep_point(pl) for pl in payloads]
    except Exception as exc:  # noqa: BLE001 - any point failure aborts the sweep
        if out_path and out_path.exists():
            out_path.unlink()
        print(f"error: sweep aborted: {exc}", file=sys.stderr)
        return 1

    rows = [row for point in per_point for row in point]
    # Aggregates over seeds within one (grid value, algorithm) group.
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault((row["value"], row["algorithm"]), []).append(
            row["realized_energy"]
        )
    columns = list(_REPORT_COLUMNS)
    if args.timing:
        columns.append("wall_time_ms")
    columns += ["realized_mean", "realized_min"]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        energies = groups[(row["value"], row["algorithm"])]
        row["realized_mean"] = sum(energies) / len(energies)
        row["realized_min"] = min(energies)
        if not args.timing:
            row.pop("wall_time_ms", None)
        writer.writerow([_fmt(row[c]) for c in columns])
    text = buf.getvalue()
    if out_path:
        out_path.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# Parser


def _add_common(sp: argparse.ArgumentParser, *, workflow_required: bool = True) -> None:
    sp.add_argument("--workflow", required=workflow_required, help="workflow JSON or DAX file")
    sp.add_argument("--platform", help=f"catalog file (default ${PLATFORM_ENV})")
    sp.add_argument("--df", type=float, default=None, help="deadline factor applied at load")
    sp.add_argument("--rw", type=float, default=None, help="reliability target override")
    sp.add_argument("--no-deadline", action="store_true", help="effectively unbounded deadline")
    sp.add_argument("--ref-mips", type=float, default=1000.0, help="DAX runtime-to-MI conversion")
    sp.add_argument("--out", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wattsched",
        description="Energy-minimizing workflow scheduling under deadline and reliability constraints",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="check a workflow's feasibility on a platform")
    _add_common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("schedule", help="produce a static schedule")
    _add_common(sp)
    sp.add_argument("--algo", choices=["bcp", "lef", "ldd", "asmfr"], default="asmfr")
    sp.add_argument("--th", type=float, default=0.75, help="fan-out threshold for asmfr")
    sp.set_defaults(func=cmd_schedule)

    sp = sub.add_parser("simulate", help="execute dynamically with rolling-horizon reruns")
    _add_common(sp)
    sp.add_argument("--algo", choices=["bcp", "lef", "ldd", "asmfr"], default="asmfr")
    sp.add_argument("--th", type=float, default=0.75)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--fraction", type=float, default=0.75, help="mean actual/worst-case ratio")
    sp.add_argument("--trials", type=int, default=0, help="Monte-Carlo reliability trials")
    sp.add_argument("--failure-injection", action="store_true")
    sp.add_argument("--worst-case", action="store_true", help="pin actual durations to worst case")
    sp.add_argument(
        "--reschedule-algo", choices=["lef", "ldd", "auto"], default="auto"
    )
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("sweep", help="grid experiment producing a CSV report")
    _add_common(sp, workflow_required=False)
    sp.add_argument("--param", required=True, choices=["df", "rw", "th", "tasks"])
    sp.add_argument("--grid", required=True, help="comma-separated grid values")
    sp.add_argument("--algos", default="bcp,lef,ldd,asmfr,dy")
    sp.add_argument("--seeds", type=int, default=1, help="seeds 0..N-1 per grid point")
    sp.add_argument("--seed", type=int, default=0, help="base seed for generated workflows")
    sp.add_argument("--th", type=float, default=0.75)
    sp.add_argument("--fraction", type=float, default=0.75)
    sp.add_argument("--trials", type=int, default=0)
    sp.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    sp.add_argument(
        "--timing",
        action="store_true",
        help="include wall_time_ms (breaks byte-for-byte reproducibility)",
    )
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("oracle", help="exact minimum-energy schedule for small instances")
    _add_common(sp)
    sp.add_argument("--max-nodes", type=int, default=2_000_000, help="search budget")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("gen", help="generate synthetic workflows or catalogs")
    sp.add_argument("--kind", choices=["workflow", "platform"], default="workflow")
    sp.add_argument("--n", type=int, default=0, help="task count / VM type count")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--width", type=int, default=4, help="max tasks per layer")
    sp.add_argument("--fanout", type=float, default=0.25, help="extra cross-layer edge probability")
    sp.add_argument("--rw", type=float, default=None)
    sp.add_argument("--out", help="output file (default stdout)")
    sp.set_defaults(func=cmd_gen)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (WorkflowError, CatalogError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
