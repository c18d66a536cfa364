"""Static schedule synthesis.

The pipeline: a best-compute-power baseline proves feasibility, then a
slack-filling pass revisits tasks one by one, stretching each into its time
window at the cheapest (VM, frequency) pair that still honors the workflow
reliability target, replicating tasks where that is cheaper than running
fast.  Two orderings are offered (largest work first, or earliest
level-based deadline first) plus an adaptive dispatcher that picks between
them from the workflow's fan-out structure.
"""

from __future__ import annotations

import json
import math
from bisect import bisect_left
from dataclasses import dataclass, replace
from typing import Callable, Mapping

from .platform import (
    ExecContext,
    Platform,
    critical_frequency,
    execution_time,
    log_task_reliability,
    task_energy,
)
from .workflow import (
    LevelInfo,
    TimeBounds,
    Workflow,
    compute_levels,
    compute_time_bounds,
    max_fanout_ratio,
)

# Absolute tolerance for energy/reliability comparisons, so float hair never
# flips a tie-break.
TOL = 1e-9


class InfeasibleWindowError(ValueError):
    """The scheduling window closes before it opens."""


class NoCandidateError(ValueError):
    """A replicate-an-earlier-task option was requested with no candidate."""


@dataclass
class ScheduleEntry:
    """Placement of one task: context, timing, and whether a replica runs.

    A replica always executes concurrently on a second instance of the same
    VM type at the same frequency, so start/finish describe both copies.
    """

    task_id: str
    ctx: ExecContext
    start: float
    finish: float
    replicated: bool = False


@dataclass
class Schedule:
    """A complete per-task mapping plus workflow-level totals."""

    entries: dict[str, ScheduleEntry]
    total_energy: float
    reliability: float
    makespan: float
    feasible: bool
    algorithm: str
    threshold: float | None = None
    selected: str | None = None
    reason: str | None = None


def entry_energy(entry: ScheduleEntry, wc: float) -> float:
    """Effective energy of an entry: doubled when a replica runs."""
    copies = 2.0 if entry.replicated else 1.0
    return copies * task_energy(wc, entry.ctx)


def min_cpf(wc: float, start: float, bound: float) -> float:
    """Smallest compute-power x frequency product that exactly fills the window."""
    if bound <= start:
        raise InfeasibleWindowError(f"window [{start}, {bound}] is empty")
    return wc / (bound - start)


def select_context(p: Platform, need: float) -> ExecContext | None:
    """Cheapest context delivering at least ``need`` MIPS-frequency product.

    Per VM type, the frequency grid is cut at the smallest feasible level;
    among all feasible (VM, frequency) pairs the one with minimal energy per
    MI wins, with distance to the VM's critical frequency and then catalog
    order as tie-breaks.  Returns None when no pair is fast enough.
    """
    best: ExecContext | None = None
    best_epm = math.inf
    best_dist = math.inf
    for vm in p.vm_types:
        f_cri = critical_frequency(vm)
        first = bisect_left(vm.freqs, need / vm.cp)
        for k in range(first, len(vm.freqs)):
            f = vm.freqs[k]
            epm = (vm.alpha + vm.beta * f**3) / (vm.cp * f)
            dist = abs(f - f_cri)
            if epm < best_epm - TOL or (
                abs(epm - best_epm) <= TOL and dist < best_dist - TOL
            ):
                best = ExecContext(vm, k)
                best_epm = epm
                best_dist = dist
    return best


def updated_reliability(current: float, old_eff: float, new_eff: float) -> float:
    """Workflow reliability after one task's effective reliability changes."""
    if old_eff <= 0:
        raise ValueError("old effective reliability must be positive")
    if current <= 0 or new_eff <= 0:
        return 0.0
    return math.exp(math.log(current) - math.log(old_eff) + math.log(new_eff))


def effective_energy(
    choice: str, energy_new: float, energy_prev: float | None = None
) -> float:
    """Energy figure of merit for one replication decision.

    ``choice`` is one of 'none' (no replica), 'self' (replicate the task
    itself, doubling its energy) or 'prev' (keep the task un-replicated and
    add a replica of an earlier task, whose per-copy energy is
    ``energy_prev``).
    """
    if choice == "none":
        return energy_new
    if choice == "self":
        return 2.0 * energy_new
    if choice == "prev":
        if energy_prev is None:
            raise NoCandidateError("no earlier task available to replicate")
        return energy_new + energy_prev
    raise ValueError(f"unknown backup choice {choice!r}")


class SchedulePlanner:
    """Mutable working schedule that refits one task at a time.

    Undecided tasks sit at their incumbent context (the feasibility baseline
    for static runs, the previous plan for rolling-horizon reruns); their
    start times float with predecessor finishes.  Decided tasks are frozen
    and act as hard bounds for everything around them.
    """

    def __init__(
        self,
        w: Workflow,
        p: Platform,
        entries: Mapping[str, ScheduleEntry],
        *,
        releases: Mapping[str, float] | None = None,
        frozen_log_rel: float = 0.0,
    ) -> None:
        self.w = w
        self.p = p
        self.releases = dict(releases) if releases else {}
        self.bounds = compute_time_bounds(w, p, releases=releases)
        self.entries: dict[str, ScheduleEntry] = {
            tid: replace(entries[tid]) for tid in w.topo_order
        }
        self.frozen_log_rel = frozen_log_rel
        self.log_eff: dict[str, float] = {
            tid: log_task_reliability(w.task(tid).wc, e.ctx, e.replicated)
            for tid, e in self.entries.items()
        }
        self._log_rel = frozen_log_rel + sum(self.log_eff.values())
        self.rw_log = (
            math.log(w.reliability_req) if w.reliability_req > 0 else -math.inf
        )
        self.decided: set[str] = set()
        # Earlier-processed tasks that run without a replica, kept ascending
        # by worst-case length; candidates for the replicate-previous option.
        self.ledger: list[tuple[float, str]] = []
        self.lft: dict[str, float] = {}
        self.window_misses: list[str] = []
        self._propagate()

    # -- state -------------------------------------------------------------

    @property
    def log_rel(self) -> float:
        return self._log_rel

    def reliability(self) -> float:
        return math.exp(self._log_rel) if self._log_rel > -math.inf else 0.0

    def _rel_ok(self, log_rel: float) -> bool:
        if self.w.reliability_req <= 0:
            return True
        return math.exp(log_rel) >= self.w.reliability_req - TOL

    def _set_task_log(self, tid: str, value: float) -> None:
        self._log_rel += value - self.log_eff[tid]
        self.log_eff[tid] = value

    def _propagate(self) -> None:
        """Recompute floating starts forward and latest-finish bounds backward."""
        w = self.w
        for tid in w.topo_order:
            if tid in self.decided:
                continue
            e = self.entries[tid]
            task = w.task(tid)
            lo = max(w.arrival, self.releases.get(tid, w.arrival))
            st = max((self.entries[pr].finish for pr in task.preds), default=lo)
            e.start = max(st, lo)
            e.finish = e.start + execution_time(task.wc, e.ctx)
        for tid in reversed(w.topo_order):
            task = w.task(tid)
            acc = w.deadline
            for s in task.succs:
                if s in self.decided:
                    acc = min(acc, self.entries[s].start)
                else:
                    acc = min(
                        acc,
                        self.lft[s] - execution_time(w.task(s).wc, self.entries[s].ctx),
                    )
            self.lft[tid] = acc

    # -- per-task decision ---------------------------------------------------

    def refit_task(self, tid: str, bound: float) -> ScheduleEntry:
        """Refit one task into ``bound``, choosing the cheapest reliable option.

        The option set: keep the incumbent; move to the cheapest context that
        fills the window; same move plus a replica of the task; or same move
        plus a replica of an earlier un-replicated task.  Keeping the
        incumbent is always admissible, so the pass never increases energy
        and never loses feasibility.
        """
        e = self.entries[tid]
        task = self.w.task(tid)
        wc = task.wc

        best_energy = entry_energy(e, wc)
        best_kind = "keep"
        best_ctx = e.ctx
        best_replicated = e.replicated
        best_prev: str | None = None

        ctx_new: ExecContext | None = None
        try:
            need = min_cpf(wc, e.start, bound)
        except InfeasibleWindowError:
            need = None
            self.window_misses.append(tid)
        if need is not None:
            ctx_new = select_context(self.p, need)
            if ctx_new is None:
                self.window_misses.append(tid)

        if ctx_new is not None:
            energy_new = task_energy(wc, ctx_new)
            log_plain = log_task_reliability(wc, ctx_new, False)
            rel_plain = self._log_rel - self.log_eff[tid] + log_plain
            if self._rel_ok(rel_plain):
                if energy_new < best_energy - TOL:
                    best_energy = energy_new
                    best_kind, best_ctx, best_replicated, best_prev = (
                        "new", ctx_new, False, None,
                    )
            else:
                log_self = log_task_reliability(wc, ctx_new, True)
                if self._rel_ok(self._log_rel - self.log_eff[tid] + log_self):
                    cand = effective_energy("self", energy_new)
                    if cand < best_energy - TOL:
                        best_energy = cand
                        best_kind, best_ctx, best_replicated, best_prev = (
                            "self", ctx_new, True, None,
                        )
                for _, prev_id in self.ledger:
                    prev_entry = self.entries[prev_id]
                    prev_wc = self.w.task(prev_id).wc
                    log_prev_rep = log_task_reliability(prev_wc, prev_entry.ctx, True)
                    rel_prev = rel_plain - self.log_eff[prev_id] + log_prev_rep
                    if not self._rel_ok(rel_prev):
                        continue
                    cand = effective_energy(
                        "prev", energy_new, task_energy(prev_wc, prev_entry.ctx)
                    )
                    if cand < best_energy - TOL:
                        best_energy = cand
                        best_kind, best_ctx, best_replicated, best_prev = (
                            "prev", ctx_new, False, prev_id,
                        )

        if best_kind != "keep":
            e.ctx = best_ctx
            e.replicated = best_replicated
            self._set_task_log(tid, log_task_reliability(wc, e.ctx, e.replicated))
        if best_prev is not None:
            prev_entry = self.entries[best_prev]
            prev_entry.replicated = True
            self._set_task_log(
                best_prev,
                log_task_reliability(self.w.task(best_prev).wc, prev_entry.ctx, True),
            )
            self.ledger = [(wcp, t) for wcp, t in self.ledger if t != best_prev]

        e.finish = e.start + execution_time(wc, e.ctx)
        self.decided.add(tid)
        if not e.replicated:
            self.ledger.append((wc, tid))
            self.ledger.sort()
        self._propagate()
        return e

    def ensure_reliability(self) -> None:
        """Fallback net: replicate cheapest-first until the target is met."""
        if self._rel_ok(self._log_rel):
            return
        order = sorted(
            (entry_energy(e, self.w.task(t).wc), t)
            for t, e in self.entries.items()
            if not e.replicated
        )
        for _, tid in order:
            e = self.entries[tid]
            e.replicated = True
            self._set_task_log(
                tid, log_task_reliability(self.w.task(tid).wc, e.ctx, True)
            )
            self.ledger = [(wcp, t) for wcp, t in self.ledger if t != tid]
            if self._rel_ok(self._log_rel):
                return

    def to_schedule(self, algorithm: str, **extra) -> Schedule:
        entries = {tid: replace(self.entries[tid]) for tid in self.w.topo_order}
        energy = sum(entry_energy(e, self.w.task(t).wc) for t, e in entries.items())
        makespan = max(e.finish for e in entries.values()) - self.w.arrival
        return Schedule(
            entries=entries,
            total_energy=energy,
            reliability=self.reliability(),
            makespan=makespan,
            feasible=self._rel_ok(self._log_rel),
            algorithm=algorithm,
            **extra,
        )


# ---------------------------------------------------------------------------
# Whole-workflow passes


def bcp_schedule(w: Workflow, p: Platform) -> Schedule:
    """Everything on the fastest VM at top frequency; the feasibility yardstick.

    Minimum possible makespan, maximum energy.  If the deadline fails here
    the workflow is rejected outright; if only the reliability target fails,
    tasks are replicated cheapest-first until it holds (or rejection).
    """
    bounds = compute_time_bounds(w, p)
    best = p.best
    ctx = ExecContext(best, len(best.freqs) - 1)
    entries = {
        tid: ScheduleEntry(
            task_id=tid,
            ctx=ctx,
            start=bounds.est[tid],
            finish=bounds.eft[tid],
            replicated=False,
        )
        for tid in w.topo_order
    }
    log_eff = {
        tid: log_task_reliability(w.task(tid).wc, ctx, False) for tid in entries
    }
    log_rel = sum(log_eff.values())
    makespan = max(bounds.eft.values()) - w.arrival

    def totals(feasible: bool, reason: str | None) -> Schedule:
        energy = sum(entry_energy(e, w.task(t).wc) for t, e in entries.items())
        rel = math.exp(log_rel) if log_rel > -math.inf else 0.0
        return Schedule(
            entries=entries,
            total_energy=energy,
            reliability=rel,
            makespan=makespan,
            feasible=feasible,
            algorithm="bcp",
            reason=reason,
        )

    if max(bounds.eft.values()) > w.deadline + TOL:
        return totals(False, "deadline infeasible at best compute power")

    def rel_ok() -> bool:
        if w.reliability_req <= 0:
            return True
        return math.exp(log_rel) >= w.reliability_req - TOL

    if not rel_ok():
        for _, tid in sorted(
            (task_energy(w.task(t).wc, ctx), t) for t in entries
        ):
            entries[tid].replicated = True
            new_log = log_task_reliability(w.task(tid).wc, ctx, True)
            log_rel += new_log - log_eff[tid]
            log_eff[tid] = new_log
            if rel_ok():
                break
    if not rel_ok():
        return totals(False, "reliability target unreachable even fully replicated")
    return totals(True, None)


def level_deadlines(
    w: Workflow,
    info: LevelInfo,
    bounds: TimeBounds,
    *,
    start: float | None = None,
) -> dict[str, float]:
    """Per-task share of the deadline, proportional to each level's work.

    The running sum over levels is clamped per task into its feasible
    [EFT, LFT] range so no task is promised an impossible finish.
    """
    start = w.arrival if start is None else start
    span = w.deadline - start
    cum: dict[int, float] = {}
    acc = start
    for lvl in sorted(info.level_work):
        acc += span * info.level_work[lvl] / info.total_work
        cum[lvl] = acc
    out: dict[str, float] = {}
    for t in w.tasks:
        raw = cum[info.level[t.id]]
        out[t.id] = min(max(raw, bounds.eft[t.id]), bounds.lft[t.id])
    return out


def refit_all(
    planner: SchedulePlanner, algo: str, *, ldd_start: float | None = None
) -> None:
    """Run one full refit pass in the given ordering over a prepared planner.

    ``ldd_start`` shifts the origin of the level-deadline distribution; the
    rolling-horizon engine sets it to the current event time when re-planning
    mid-execution.
    """
    w = planner.w
    if algo == "lef":
        order = sorted(w.ids(), key=lambda tid: (-w.task(tid).wc, tid))
        bound_of: Callable[[str], float] = lambda tid: planner.lft[tid]
    elif algo == "ldd":
        info = compute_levels(w)
        delta = level_deadlines(w, info, planner.bounds, start=ldd_start)
        order = sorted(w.ids(), key=lambda tid: (delta[tid], tid))
        bound_of = lambda tid: min(delta[tid], planner.lft[tid])
    else:
        raise ValueError(f"unknown refit ordering {algo!r}")
    for tid in order:
        planner.refit_task(tid, bound_of(tid))
    planner.ensure_reliability()


def lef_schedule(w: Workflow, p: Platform) -> Schedule:
    """Refit tasks in non-increasing order of worst-case work, windows up to LFT."""
    base = bcp_schedule(w, p)
    if not base.feasible:
        return replace(base, algorithm="lef")
    planner = SchedulePlanner(w, p, base.entries)
    refit_all(planner, "lef")
    return planner.to_schedule("lef")


def ldd_schedule(w: Workflow, p: Platform) -> Schedule:
    """Refit tasks in earliest level-deadline order, windows up to the level share."""
    base = bcp_schedule(w, p)
    if not base.feasible:
        return replace(base, algorithm="ldd")
    planner = SchedulePlanner(w, p, base.entries)
    refit_all(planner, "ldd")
    return planner.to_schedule("ldd")


def asmfr_select(w: Workflow, th: float = 0.75) -> str:
    """Pick the refit ordering from the workflow's fan-out structure."""
    if w.n < 2:
        return "lef"
    return "lef" if max_fanout_ratio(w) < th else "ldd"


def asmfr_schedule(w: Workflow, p: Platform, th: float = 0.75) -> Schedule:
    selected = asmfr_select(w, th)
    inner = lef_schedule(w, p) if selected == "lef" else ldd_schedule(w, p)
    return replace(inner, algorithm="asmfr", threshold=th, selected=selected)


# ---------------------------------------------------------------------------
# Constraint verification


@dataclass(frozen=True)
class ConstraintCheck:
    name: str
    ok: bool
    violations: tuple[str, ...] = ()


@dataclass(frozen=True)
class ConstraintReport:
    checks: tuple[ConstraintCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def failed(self) -> tuple[ConstraintCheck, ...]:
        return tuple(c for c in self.checks if not c.ok)


def check_constraints(w: Workflow, p: Platform, s: Schedule) -> ConstraintReport:
    """Independently verify every hard constraint of a finished schedule.

    The checks cover: one entry per task, placement validity, the
    duration/finish identity, precedence over every edge, the arrival floor,
    the deadline ceiling and the workflow reliability target.
    """
    checks: list[ConstraintCheck] = []
    ids = set(w.ids())

    missing = sorted(ids - set(s.entries))
    extra = sorted(set(s.entries) - ids)
    checks.append(
        ConstraintCheck(
            "coverage", not missing and not extra, tuple(missing + extra)
        )
    )
    common = [tid for tid in w.topo_order if tid in s.entries]

    bad_assign = []
    for tid in common:
        e = s.entries[tid]
        try:
            vm = p[e.ctx.vm.name]
        except KeyError:
            bad_assign.append(tid)
            continue
        if (
            not 0 <= e.ctx.freq_index < len(vm.freqs)
            or vm.freqs[e.ctx.freq_index] != e.ctx.freq
        ):
            bad_assign.append(tid)
    checks.append(ConstraintCheck("assignment", not bad_assign, tuple(bad_assign)))

    bad_dur = [
        tid
        for tid in common
        if abs(
            s.entries[tid].finish
            - s.entries[tid].start
            - execution_time(w.task(tid).wc, s.entries[tid].ctx)
        )
        > TOL
    ]
    checks.append(ConstraintCheck("duration", not bad_dur, tuple(bad_dur)))

    bad_prec = []
    for a, b in w.edges:
        if a in s.entries and b in s.entries:
            if s.entries[b].start < s.entries[a].finish - TOL:
                bad_prec.append(f"{a}->{b}")
    checks.append(ConstraintCheck("precedence", not bad_prec, tuple(bad_prec)))

    bad_arrival = [
        tid for tid in common if s.entries[tid].start < w.arrival - TOL
    ]
    checks.append(ConstraintCheck("arrival", not bad_arrival, tuple(bad_arrival)))

    late = [tid for tid in common if s.entries[tid].finish > w.deadline + TOL]
    checks.append(ConstraintCheck("deadline", not late, tuple(late)))

    log_rel = 0.0
    for tid in common:
        e = s.entries[tid]
        log_rel += log_task_reliability(w.task(tid).wc, e.ctx, e.replicated)
    rel = math.exp(log_rel) if log_rel > -math.inf else 0.0
    rel_ok = w.reliability_req <= 0 or rel >= w.reliability_req - TOL
    checks.append(
        ConstraintCheck("reliability", rel_ok, () if rel_ok else ("workflow",))
    )
    return ConstraintReport(checks=tuple(checks))


# ---------------------------------------------------------------------------
# Serialization


def schedule_to_json(s: Schedule) -> str:
    doc = {
        "tasks": {
            tid: {
                "vm": e.ctx.vm.name,
                "frequency": e.ctx.freq,
                "freq_index": e.ctx.freq_index,
                "start": e.start,
                "finish": e.finish,
                "backup": e.replicated,
            }
            for tid, e in sorted(s.entries.items())
        },
        "totals": {
            "energy": s.total_energy,
            "reliability": s.reliability,
            "makespan": s.makespan,
            "feasible": s.feasible,
            "algorithm": s.algorithm,
            "threshold": s.threshold,
            "selected": s.selected,
            "reason": s.reason,
        },
    }
    return json.dumps(doc, indent=2)
