"""Workflow DAG model: ingestion, validation, levels, fan-out and time bounds."""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .platform import Platform


class WorkflowError(ValueError):
    """Base class for workflow validation failures."""


class SchemaError(WorkflowError):
    """Document does not match the canonical workflow schema."""


class DuplicateTaskError(WorkflowError):
    """Two tasks share an id."""


class DanglingEdgeError(WorkflowError):
    """An edge endpoint references a task id that does not exist."""


class CycleError(WorkflowError):
    """The edge set contains a cycle."""


class NonPositiveWorkError(WorkflowError):
    """A task declares a worst-case length that is not positive."""


class DegenerateWorkflowError(WorkflowError):
    """Operation undefined for workflows this small."""


class DaxError(WorkflowError):
    """DAX document cannot be converted."""


@dataclass(frozen=True)
class Task:
    """One workflow node: worst-case length in MI plus its dependency sets."""

    id: str
    wc: float
    preds: frozenset[str]
    succs: frozenset[str]


class Workflow:
    """An immutable DAG of tasks with arrival, deadline and reliability target.

    Construction validates the whole structure: unique ids, positive work,
    edges referencing real tasks, acyclicity and a deadline after arrival.
    """

    def __init__(
        self,
        *,
        name: str,
        arrival: float,
        deadline: float,
        reliability: float,
        tasks: Sequence[tuple[str, float]],
        edges: Iterable[tuple[str, str]],
    ) -> None:
        if deadline <= arrival:
            raise SchemaError(f"deadline {deadline} must exceed arrival {arrival}")
        if not 0.0 <= reliability < 1.0:
            raise SchemaError(f"reliability target {reliability} outside [0, 1)")
        if not tasks:
            raise SchemaError("workflow needs at least one task")

        ids = [tid for tid, _ in tasks]
        seen: set[str] = set()
        for tid in ids:
            if tid in seen:
                raise DuplicateTaskError(f"duplicate task id {tid!r}")
            seen.add(tid)

        edge_list = sorted(set((str(a), str(b)) for a, b in edges))
        for a, b in edge_list:
            if a not in seen or b not in seen:
                raise DanglingEdgeError(f"edge ({a!r}, {b!r}) references unknown task")
            if a == b:
                raise CycleError(f"self-loop on task {a!r}")

        preds: dict[str, set[str]] = {tid: set() for tid in ids}
        succs: dict[str, set[str]] = {tid: set() for tid in ids}
        for a, b in edge_list:
            preds[b].add(a)
            succs[a].add(b)

        built = []
        for tid, wc in tasks:
            wc = float(wc)
            if not wc > 0:
                raise NonPositiveWorkError(f"task {tid!r}: wc must be positive, got {wc}")
            built.append(Task(id=tid, wc=wc, preds=frozenset(preds[tid]), succs=frozenset(succs[tid])))

        self.name = name
        self.arrival = float(arrival)
        self.deadline = float(deadline)
        self.reliability_req = float(reliability)
        self.tasks: tuple[Task, ...] = tuple(built)
        self.edges: tuple[tuple[str, str], ...] = tuple(edge_list)
        self._by_id = {t.id: t for t in self.tasks}
        self.topo_order: tuple[str, ...] = self._toposort()

    def _toposort(self) -> tuple[str, ...]:
        # Kahn with id-sorted ready set so the order is reproducible.
        indeg = {t.id: len(t.preds) for t in self.tasks}
        ready = sorted(tid for tid, d in indeg.items() if d == 0)
        order: list[str] = []
        while ready:
            tid = ready.pop(0)
            order.append(tid)
            inserted = False
            for succ in sorted(self._by_id[tid].succs):
                indeg[succ] -= 1
                if indeg[succ] == 0:
                    ready.append(succ)
                    inserted = True
            if inserted:
                ready.sort()
        if len(order) != len(self.tasks):
            stuck = sorted(tid for tid, d in indeg.items() if d > 0)
            raise CycleError(f"cycle detected involving tasks {stuck}")
        return tuple(order)

    @property
    def n(self) -> int:
        return len(self.tasks)

    def task(self, tid: str) -> Task:
        return self._by_id[tid]

    def ids(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tasks)

    @property
    def roots(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tasks if not t.preds)

    @property
    def sinks(self) -> tuple[str, ...]:
        return tuple(t.id for t in self.tasks if not t.succs)

    def with_deadline(self, deadline: float, reliability: float | None = None) -> "Workflow":
        """Copy with a new deadline (and optionally a new reliability target)."""
        return Workflow(
            name=self.name,
            arrival=self.arrival,
            deadline=deadline,
            reliability=self.reliability_req if reliability is None else reliability,
            tasks=[(t.id, t.wc) for t in self.tasks],
            edges=self.edges,
        )

    def subgraph(self, keep: set[str]) -> "Workflow":
        """Induced sub-workflow on ``keep`` (same arrival/deadline/target)."""
        return Workflow(
            name=self.name,
            arrival=self.arrival,
            deadline=self.deadline,
            reliability=self.reliability_req,
            tasks=[(t.id, t.wc) for t in self.tasks if t.id in keep],
            edges=[(a, b) for a, b in self.edges if a in keep and b in keep],
        )


def parse_workflow(document: str) -> Workflow:
    """Parse the canonical workflow JSON document into a validated Workflow."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("workflow document must be a JSON object")
    for key in ("name", "arrival", "deadline", "reliability", "tasks", "edges"):
        if key not in doc:
            raise SchemaError(f"missing required field {key!r}")
    raw_tasks = doc["tasks"]
    if not isinstance(raw_tasks, list):
        raise SchemaError("'tasks' must be an array")
    tasks = []
    for raw in raw_tasks:
        if not isinstance(raw, dict) or "id" not in raw or "wc" not in raw:
            raise SchemaError(f"task entry must carry 'id' and 'wc': {raw!r}")
        tasks.append((str(raw["id"]), float(raw["wc"])))
    raw_edges = doc["edges"]
    if not isinstance(raw_edges, list):
        raise SchemaError("'edges' must be an array")
    edges = []
    for raw in raw_edges:
        if not isinstance(raw, (list, tuple)) or len(raw) != 2:
            raise SchemaError(f"edge entry must be a [from, to] pair: {raw!r}")
        edges.append((str(raw[0]), str(raw[1])))
    return Workflow(
        name=str(doc["name"]),
        arrival=float(doc["arrival"]),
        deadline=float(doc["deadline"]),
        reliability=float(doc["reliability"]),
        tasks=tasks,
        edges=edges,
    )


def workflow_to_json(w: Workflow) -> str:
    doc = {
        "name": w.name,
        "arrival": w.arrival,
        "deadline": w.deadline,
        "reliability": w.reliability_req,
        "tasks": [{"id": t.id, "wc": t.wc} for t in w.tasks],
        "edges": [[a, b] for a, b in w.edges],
    }
    return json.dumps(doc, indent=2)


def import_dax(
    document: str,
    *,
    arrival: float = 0.0,
    deadline_factor: float = 1.5,
    reliability: float = 0.9,
    reference_mips: float = 1000.0,
    name: str | None = None,
) -> str:
    """Convert a Pegasus DAX 3.x document to canonical workflow JSON.

    Job runtimes (seconds) become worst-case lengths via ``runtime *
    reference_mips`` MI, so a machine delivering ``reference_mips`` at top
    frequency reproduces the DAX timings.  The deadline is the critical-path
    time under that reference machine scaled by ``deadline_factor``.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise DaxError(f"unparseable DAX XML: {exc}") from exc

    def local(tag: str) -> str:
        return tag.rsplit("}", 1)[-1]

    jobs: list[tuple[str, float]] = []
    job_ids: set[str] = set()
    edges: list[tuple[str, str]] = []
    for elem in root.iter():
        if local(elem.tag) == "job":
            jid = elem.get("id")
            if jid is None:
                raise DaxError("job element without id attribute")
            runtime = elem.get("runtime")
            if runtime is None:
                raise DaxError(f"job {jid!r} lacks a runtime attribute")
            try:
                seconds = float(runtime)
            except ValueError as exc:
                raise DaxError(f"job {jid!r} has non-numeric runtime {runtime!r}") from exc
            if seconds <= 0:
                raise DaxError(f"job {jid!r} has non-positive runtime {seconds}")
            jobs.append((jid, seconds * reference_mips))
            job_ids.add(jid)
        elif local(elem.tag) == "child":
            child = elem.get("ref")
            if child is None:
                raise DaxError("child element without ref attribute")
            for parent in elem:
                if local(parent.tag) == "parent":
                    pref = parent.get("ref")
                    if pref is None:
                        raise DaxError("parent element without ref attribute")
                    edges.append((pref, child))
    if not jobs:
        raise DaxError("DAX document contains no jobs")

    # Critical-path runtime through the DAG, on the reference machine.
    succs: dict[str, list[str]] = {j: [] for j, _ in jobs}
    runtime_of = {j: wc / reference_mips for j, wc in jobs}
    for a, b in edges:
        if a not in job_ids or b not in job_ids:
            raise DaxError(f"dependency ({a!r}, {b!r}) references unknown job")
        succs[a].append(b)
    order: list[str] = []
    indeg = {j: 0 for j, _ in jobs}
    for a, b in edges:
        indeg[b] += 1
    ready = sorted(j for j, d in indeg.items() if d == 0)
    while ready:
        j = ready.pop(0)
        order.append(j)
        for s in sorted(succs[j]):
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
        ready.sort()
    if len(order) != len(jobs):
        raise DaxError("DAX dependencies contain a cycle")
    preds: dict[str, list[str]] = {j: [] for j, _ in jobs}
    for a, b in edges:
        preds[b].append(a)
    longest: dict[str, float] = {}
    for j in order:
        longest[j] = max((longest[p] for p in preds[j]), default=0.0) + runtime_of[j]
    cp_time = max(longest.values())

    doc = {
        "name": name if name is not None else (root.get("name") or "dax-import"),
        "arrival": arrival,
        "deadline": arrival + deadline_factor * cp_time,
        "reliability": reliability,
        "tasks": [{"id": j, "wc": wc} for j, wc in jobs],
        "edges": sorted([[a, b] for a, b in set(edges)]),
    }
    return json.dumps(doc, indent=2)


@dataclass(frozen=True)
class LevelInfo:
    """Longest-path levels plus per-level and total work in MI."""

    level: Mapping[str, int]
    level_work: Mapping[int, float]
    total_work: float


def compute_levels(w: Workflow) -> LevelInfo:
    """Assign levels by the longest-path-from-roots recurrence and sum work per level."""
    level: dict[str, int] = {}
    for tid in w.topo_order:
        task = w.task(tid)
        if not task.preds:
            level[tid] = 1
        else:
            level[tid] = 1 + max(level[p] for p in task.preds)
    level_work: dict[int, float] = {}
    for t in w.tasks:
        level_work[level[t.id]] = level_work.get(level[t.id], 0.0) + t.wc
    total = sum(t.wc for t in w.tasks)
    return LevelInfo(level=level, level_work=level_work, total_work=total)


@dataclass(frozen=True)
class TimeBounds:
    """Per-task EST/EFT/LST/LFT under best-VM top-frequency durations."""

    est: Mapping[str, float]
    eft: Mapping[str, float]
    lst: Mapping[str, float]
    lft: Mapping[str, float]
    duration: Mapping[str, float]
    best_vm: str


def compute_time_bounds(
    w: Workflow,
    p: Platform,
    *,
    releases: Mapping[str, float] | None = None,
) -> TimeBounds:
    """Forward/backward passes from arrival and deadline.

    ``releases`` optionally lower-bounds the start of individual tasks; the
    dynamic engine uses it to pin finished or running predecessors that are
    no longer part of the workflow.
    """
    best = p.best
    speed = best.cp * best.f_max
    dur = {t.id: t.wc / speed for t in w.tasks}

    est: dict[str, float] = {}
    eft: dict[str, float] = {}
    for tid in w.topo_order:
        task = w.task(tid)
        lo = w.arrival
        if releases is not None and tid in releases:
            lo = max(lo, releases[tid])
        est[tid] = max(max((eft[pr] for pr in task.preds), default=lo), lo)
        eft[tid] = est[tid] + dur[tid]

    lft: dict[str, float] = {}
    lst: dict[str, float] = {}
    for tid in reversed(w.topo_order):
        task = w.task(tid)
        lft[tid] = min((lst[s] for s in task.succs), default=w.deadline)
        lst[tid] = lft[tid] - dur[tid]
    return TimeBounds(est=est, eft=eft, lst=lst, lft=lft, duration=dur, best_vm=best.name)


def critical_path_time(w: Workflow, p: Platform) -> float:
    """Makespan when every task runs on the best VM at top frequency."""
    bounds = compute_time_bounds(w, p)
    return max(bounds.eft.values()) - w.arrival


def max_fanout_ratio(w: Workflow) -> float:
    """Largest out-degree divided by n - 1; structural signal in (0, 1]."""
    if w.n < 2:
        raise DegenerateWorkflowError("fan-out ratio undefined for single-task workflows")
    d_max = max(len(t.succs) for t in w.tasks)
    return d_max / (w.n - 1)
