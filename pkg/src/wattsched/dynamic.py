"""Discrete-event execution of a static schedule with rolling-horizon reruns.

Tasks usually finish before their worst-case length.  The engine dispatches
ready tasks, and on every completion re-optimizes all not-yet-dispatched
tasks against the slack that just opened up.  Running tasks are never
touched; a completed task's reliability factor is conditioned to one.
"""

from __future__ import annotations

import hashlib
import heapq
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .platform import (
    ExecContext,
    Platform,
    execution_time,
    log_task_reliability,
    power_draw,
    task_reliability,
)
from .scheduling import Schedule, ScheduleEntry, SchedulePlanner, asmfr_select, refit_all
from .workflow import Workflow

_FAILURE_SALT = 1
_MONTE_CARLO_SALT = 2
_Z95 = 1.959963984540054


@dataclass(frozen=True)
class SimConfig:
    """Knobs for one simulated execution."""

    seed: int = 0
    sample_mean_fraction: float = 0.75
    trials: int = 0
    failure_injection: bool = False
    reschedule_algo: str = "auto"  # 'lef' | 'ldd' | 'auto'
    threshold: float = 0.75
    worst_case: bool = False  # actual durations pinned to worst case

    def __post_init__(self) -> None:
        if not 0.0 < self.sample_mean_fraction <= 1.0:
            raise ValueError("sample_mean_fraction must lie in (0, 1]")
        if self.reschedule_algo not in ("lef", "ldd", "auto"):
            raise ValueError(f"unknown reschedule algorithm {self.reschedule_algo!r}")


@dataclass
class RollingHorizon:
    """Execution state: running tasks, finished tasks, and everything else."""

    ready: set[str] = field(default_factory=set)
    completed: dict[str, float] = field(default_factory=dict)
    pending: set[str] = field(default_factory=set)


def advance_ready(h: RollingHorizon, w: Workflow) -> set[str]:
    """Pending tasks whose predecessors have all finished."""
    return {
        tid
        for tid in h.pending
        if all(pr in h.completed for pr in w.task(tid).preds)
    }


def task_stream(seed: int, task_id: str, salt: int = 0) -> np.random.Generator:
    """Independent, reproducible RNG stream for one task.

    Streams are keyed by (seed, salt, hash of task id), so the values a task
    draws never depend on dispatch order, trial count or parallelism.
    """
    key = int.from_bytes(
        hashlib.blake2b(task_id.encode("utf-8"), digest_size=8).digest(), "big"
    )
    return np.random.default_rng(np.random.SeedSequence(entropy=[seed, salt, key]))


def sample_actual_time(
    wc: float,
    ctx: ExecContext,
    rng: np.random.Generator,
    *,
    mean_fraction: float = 0.75,
) -> float:
    """Draw an actual duration: exponential around a fraction of worst case, capped.

    Exactly one standard-exponential variate is consumed, so the same stream
    yields the same relative duration whatever context the task lands on.
    """
    tau = execution_time(wc, ctx)
    draw = rng.standard_exponential() * mean_fraction * tau
    return min(draw, tau)


@dataclass
class TraceEvent:
    time: float
    kind: str  # 'dispatch' | 'complete' | 'reschedule' | 'fail'
    task: str
    vm: str | None = None
    freq: float | None = None
    backup: bool | None = None
    energy: float | None = None

    def to_json(self) -> str:
        doc = {"time": self.time, "kind": self.kind, "task": self.task}
        for key in ("vm", "freq", "backup", "energy"):
            value = getattr(self, key)
            if value is not None:
                doc[key] = value
        return json.dumps(doc)


@dataclass
class SimTrace:
    """Event log plus realized totals of one simulated execution."""

    events: list[TraceEvent]
    energy: float
    makespan: float
    deadline_met: bool
    success: bool
    planned_energy: float
    algorithm: str
    seed: int
    # Placement each task actually ran with, at its real start/finish times.
    executed: dict[str, ScheduleEntry] = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "kind": "summary",
            "energy": self.energy,
            "makespan": self.makespan,
            "deadline_met": self.deadline_met,
            "success": self.success,
            "planned_energy": self.planned_energy,
            "algorithm": self.algorithm,
            "seed": self.seed,
        }

    def to_jsonl(self) -> str:
        lines = [e.to_json() for e in self.events]
        lines.append(json.dumps(self.summary()))
        return "\n".join(lines) + "\n"


def run_dynamic(
    w: Workflow, p: Platform, initial: Schedule, cfg: SimConfig
) -> SimTrace:
    """Execute ``initial`` event by event, re-planning pending tasks on each finish.

    Completions arrive early in expectation; each one re-runs the selected
    static pass over the not-yet-dispatched tasks, seeded with their current
    plan so a re-plan can only keep or improve each entry.  With failure
    injection on, a task whose copies all fail aborts the run; energy is
    still charged for every dispatched copy.
    """
    if not initial.feasible:
        raise ValueError("cannot execute an infeasible schedule")
    algo = cfg.reschedule_algo
    if algo == "auto":
        algo = asmfr_select(w, cfg.threshold)

    plan: dict[str, ScheduleEntry] = {
        tid: replace(e) for tid, e in initial.entries.items()
    }
    horizon = RollingHorizon(pending=set(w.ids()))
    running: list[tuple[float, str]] = []
    executed: dict[str, ScheduleEntry] = {}
    planned_finish: dict[str, float] = {}
    energy_of: dict[str, float] = {}
    survives: dict[str, bool] = {}
    events: list[TraceEvent] = []
    total_energy = 0.0

    def dispatch(tid: str, at: float) -> None:
        entry = plan[tid]
        wc = w.task(tid).wc
        tau = execution_time(wc, entry.ctx)
        if cfg.worst_case:
            actual = tau
        else:
            actual = sample_actual_time(
                wc,
                entry.ctx,
                task_stream(cfg.seed, tid),
                mean_fraction=cfg.sample_mean_fraction,
            )
        copies = 2 if entry.replicated else 1
        energy_of[tid] = copies * power_draw(entry.ctx) * actual
        executed[tid] = replace(entry, start=at, finish=at + actual)
        planned_finish[tid] = at + tau
        if cfg.failure_injection:
            rel = task_reliability(wc, entry.ctx)
            draws = task_stream(cfg.seed, tid, _FAILURE_SALT).random(2)
            survives[tid] = bool(draws[0] < rel) or (
                entry.replicated and bool(draws[1] < rel)
            )
        else:
            survives[tid] = True
        horizon.pending.discard(tid)
        horizon.ready.add(tid)
        heapq.heappush(running, (at + actual, tid))
        events.append(
            TraceEvent(
                time=at,
                kind="dispatch",
                task=tid,
                vm=entry.ctx.vm.name,
                freq=entry.ctx.freq,
                backup=entry.replicated,
            )
        )

    def replan(now: float) -> None:
        sub = w.subgraph(horizon.pending)
        releases: dict[str, float] = {}
        for tid in horizon.pending:
            ext = [
                horizon.completed[pr] if pr in horizon.completed else planned_finish[pr]
                for pr in w.task(tid).preds
                if pr not in horizon.pending
            ]
            if ext:
                releases[tid] = max(ext)
        # Sorted so float accumulation order never depends on set iteration.
        frozen = sum(
            log_task_reliability(w.task(tid).wc, plan[tid].ctx, plan[tid].replicated)
            for tid in sorted(horizon.ready)
        )
        planner = SchedulePlanner(
            sub,
            p,
            {tid: plan[tid] for tid in horizon.pending},
            releases=releases,
            frozen_log_rel=frozen,
        )
        refit_all(planner, algo, ldd_start=now if algo == "ldd" else None)
        for tid in horizon.pending:
            plan[tid] = replace(planner.entries[tid])

    for tid in sorted(w.roots):
        dispatch(tid, w.arrival)

    success = True
    while running:
        finish_real, tid = heapq.heappop(running)
        horizon.ready.discard(tid)
        total_energy += energy_of[tid]
        if not survives[tid]:
            events.append(TraceEvent(time=finish_real, kind="fail", task=tid))
            success = False
            break
        horizon.completed[tid] = finish_real
        events.append(
            TraceEvent(
                time=finish_real, kind="complete", task=tid, energy=energy_of[tid]
            )
        )
        if horizon.pending:
            replan(finish_real)
            events.append(TraceEvent(time=finish_real, kind="reschedule", task=tid))
        for nxt in sorted(advance_ready(horizon, w)):
            at = max(
                (horizon.completed[pr] for pr in w.task(nxt).preds),
                default=w.arrival,
            )
            dispatch(nxt, at)

    if not success:
        # Copies in flight at the abort were still paid for.
        for _, tid in sorted(running):
            total_energy += energy_of[tid]

    if horizon.completed:
        makespan = max(horizon.completed.values()) - w.arrival
    else:
        makespan = 0.0
    return SimTrace(
        events=events,
        energy=total_energy,
        makespan=makespan,
        deadline_met=success and makespan <= w.deadline - w.arrival + 1e-9,
        success=success,
        planned_energy=initial.total_energy,
        algorithm=algo,
        seed=cfg.seed,
        executed=executed,
    )


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: float
    lo: float
    hi: float
    trials: int

    @property
    def sigma(self) -> float:
        """Interval half-width expressed as one standard error."""
        return (self.hi - self.lo) / (2.0 * _Z95)


def wilson_interval(successes: int, trials: int) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    phat = successes / trials
    z2 = _Z95 * _Z95
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2.0 * trials)) / denom
    half = (
        _Z95
        * math.sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials))
        / denom
    )
    return center - half, center + half


def run_monte_carlo(
    w: Workflow, p: Platform, s: Schedule, cfg: SimConfig
) -> MonteCarloResult:
    """Estimate achieved workflow reliability by injecting per-copy failures.

    Every executed copy fails independently with its context's planned
    failure probability; a task survives if any copy does, the workflow
    survives if every task does.
    """
    if cfg.trials < 1:
        raise ValueError("trials must be >= 1")
    order = [tid for tid in w.topo_order]
    rel = np.array(
        [task_reliability(w.task(tid).wc, s.entries[tid].ctx) for tid in order]
    )
    rep = np.array([s.entries[tid].replicated for tid in order])
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=[cfg.seed, _MONTE_CARLO_SALT])
    )
    successes = 0
    remaining = cfg.trials
    chunk = 100_000
    while remaining > 0:
        m = min(chunk, remaining)
        u1 = rng.random((m, len(order)))
        u2 = rng.random((m, len(order)))
        ok = (u1 < rel) | (rep & (u2 < rel))
        successes += int(ok.all(axis=1).sum())
        remaining -= m
    lo, hi = wilson_interval(successes, cfg.trials)
    return MonteCarloResult(
        estimate=successes / cfg.trials, lo=lo, hi=hi, trials=cfg.trials
    )
