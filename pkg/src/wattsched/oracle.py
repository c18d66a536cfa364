"""Exhaustive minimum-energy scheduler for desk-scale instances.

Enumerates every (VM, frequency, replica) assignment per task with two
admissible prunes, so heuristic schedules can be compared against true
optima on small workflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .platform import (
    ExecContext,
    Platform,
    execution_time,
    log_task_reliability,
    task_energy,
)
from .scheduling import TOL, Schedule, ScheduleEntry, entry_energy
from .workflow import Workflow, compute_time_bounds

# (vm index, frequency index, replicated) per task id.
AssignmentVector = Mapping[str, tuple[int, int, bool]]


@dataclass(frozen=True)
class AssignmentEval:
    energy: float
    makespan: float
    reliability: float
    feasible: bool


@dataclass
class OracleResult:
    status: str  # 'optimal' | 'infeasible' | 'budget-exceeded'
    best: dict[str, tuple[int, int, bool]] | None
    schedule: Schedule | None
    optimal_energy: float | None
    explored: int
    # Replicas always share their primary's context; recorded so consumers
    # know the searched option space.
    replica_policy: str = "same-context"


def _entries_for(
    w: Workflow, p: Platform, assignment: AssignmentVector
) -> dict[str, ScheduleEntry]:
    """As-early-as-possible timing for a full assignment (unlimited instances)."""
    entries: dict[str, ScheduleEntry] = {}
    for tid in w.topo_order:
        l, k, rep = assignment[tid]
        ctx = ExecContext(p.vm_types[l], k)
        task = w.task(tid)
        st = max((entries[pr].finish for pr in task.preds), default=w.arrival)
        entries[tid] = ScheduleEntry(
            task_id=tid,
            ctx=ctx,
            start=st,
            finish=st + execution_time(task.wc, ctx),
            replicated=rep,
        )
    return entries


def evaluate_assignment(
    w: Workflow, p: Platform, assignment: AssignmentVector
) -> AssignmentEval:
    """Energy, makespan, reliability and feasibility of one assignment."""
    entries = _entries_for(w, p, assignment)
    energy = sum(entry_energy(e, w.task(t).wc) for t, e in entries.items())
    makespan = max(e.finish for e in entries.values()) - w.arrival
    log_rel = sum(
        log_task_reliability(w.task(t).wc, e.ctx, e.replicated)
        for t, e in entries.items()
    )
    rel = math.exp(log_rel) if log_rel > -math.inf else 0.0
    feasible = makespan <= w.deadline - w.arrival + TOL and (
        w.reliability_req <= 0 or rel >= w.reliability_req - TOL
    )
    return AssignmentEval(
        energy=energy, makespan=makespan, reliability=rel, feasible=feasible
    )


def enumerate_optimal(
    w: Workflow, p: Platform, *, budget: int = 2_000_000
) -> OracleResult:
    """Depth-first search over all assignments for the minimum-energy feasible one.

    Tasks are visited in topological order so start times of a prefix are
    final.  Two admissible prunes: the cheapest-possible completion of the
    remaining tasks cannot beat the incumbent, and the most-reliable-possible
    completion cannot reach the reliability target.  A third cut drops
    placements whose finish already overruns the task's latest feasible
    finish at top speed.  Traversal order is deterministic, so results are
    reproducible; ``budget`` caps visited placements and downgrades the
    status when exhausted.
    """
    order = list(w.topo_order)
    n = len(order)
    bounds = compute_time_bounds(w, p)
    rw_log = math.log(w.reliability_req) if w.reliability_req > 0 else -math.inf

    # Candidate placements per task, cheapest first for early incumbents.
    cands: list[list[tuple[float, float, float, int, int, bool]]] = []
    for tid in order:
        wc = w.task(tid).wc
        opts = []
        for l, vm in enumerate(p.vm_types):
            for k in range(len(vm.freqs)):
                ctx = ExecContext(vm, k)
                tau = execution_time(wc, ctx)
                base = task_energy(wc, ctx)
                for rep in (False, True):
                    energy = 2.0 * base if rep else base
                    opts.append(
                        (energy, log_task_reliability(wc, ctx, rep), tau, l, k, rep)
                    )
        opts.sort(key=lambda o: (o[0], o[3], o[4], o[5]))
        cands.append(opts)

    min_energy_suffix = [0.0] * (n + 1)
    max_logrel_suffix = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        min_energy_suffix[i] = min_energy_suffix[i + 1] + min(o[0] for o in cands[i])
        max_logrel_suffix[i] = max_logrel_suffix[i + 1] + max(o[1] for o in cands[i])

    preds = [tuple(w.task(tid).preds) for tid in order]
    pos = {tid: i for i, tid in enumerate(order)}
    lft = [bounds.lft[tid] for tid in order]

    best_energy = math.inf
    best_assign: list[tuple[int, int, bool]] | None = None
    explored = 0
    exhausted = False

    choice: list[tuple[int, int, bool]] = [(-1, -1, False)] * n
    finish: list[float] = [0.0] * n

    def dfs(i: int, energy: float, log_rel: float) -> None:
        nonlocal best_energy, best_assign, explored, exhausted
        if exhausted:
            return
        if i == n:
            # Timing is handled by the per-task latest-finish cut; reliability
            # needs its exact check here (the suffix bound is only a prune).
            rel = math.exp(log_rel) if log_rel > -math.inf else 0.0
            if w.reliability_req > 0 and rel < w.reliability_req - TOL:
                return
            if energy < best_energy - TOL:
                best_energy = energy
                best_assign = list(choice)
            return
        if energy + min_energy_suffix[i] >= best_energy - TOL:
            return
        if log_rel + max_logrel_suffix[i] < rw_log - TOL:
            return
        st = max((finish[pos[pr]] for pr in preds[i]), default=w.arrival)
        for cand_energy, cand_log, tau, l, k, rep in cands[i]:
            explored += 1
            if explored > budget:
                exhausted = True
                return
            ft = st + tau
            if ft > lft[i] + TOL:
                continue
            # Candidates are energy-sorted, so once the bound trips it stays tripped.
            if energy + cand_energy + min_energy_suffix[i + 1] >= best_energy - TOL:
                break
            choice[i] = (l, k, rep)
            finish[i] = ft
            dfs(i + 1, energy + cand_energy, log_rel + cand_log)
            if exhausted:
                return

    dfs(0, 0.0, 0.0)

    if best_assign is None:
        status = "budget-exceeded" if exhausted else "infeasible"
        return OracleResult(
            status=status, best=None, schedule=None, optimal_energy=None, explored=explored
        )

    assignment = {tid: best_assign[i] for i, tid in enumerate(order)}
    entries = _entries_for(w, p, assignment)
    ev = evaluate_assignment(w, p, assignment)
    schedule = Schedule(
        entries=entries,
        total_energy=ev.energy,
        reliability=ev.reliability,
        makespan=ev.makespan,
        feasible=ev.feasible,
        algorithm="oracle",
    )
    status = "budget-exceeded" if exhausted else "optimal"
    return OracleResult(
        status=status,
        best=assignment,
        schedule=schedule,
        optimal_energy=ev.energy,
        explored=explored,
    )
