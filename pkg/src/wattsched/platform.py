"""VM catalog and the closed-form energy/reliability kernel.

All frequencies are normalized to (0, 1]; compute power ``cp`` is MIPS at
frequency 1.0, so executing ``wc`` MI at frequency ``f`` takes
``wc / (cp * f)`` seconds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib


class CatalogError(ValueError):
    """Raised for malformed platform catalog documents."""


@dataclass(frozen=True)
class VmType:
    """One VM category: compute power, power curve, frequency grid, failure model.

    Attributes:
        name: unique catalog name.
        cp: compute power in MIPS at normalized frequency 1.0.
        alpha: static power draw in watts.
        beta: dynamic power coefficient in watts (power = alpha + beta * f**3).
        freqs: strictly ascending normalized frequency levels, each in (0, 1].
        r0: base failure rate per second when running at the top frequency.
        psi: hardware sensitivity of the failure rate to frequency scaling.
    """

    name: str
    cp: float
    alpha: float
    beta: float
    freqs: tuple[float, ...]
    r0: float
    psi: float

    def __post_init__(self) -> None:
        if self.cp <= 0:
            raise CatalogError(f"vm {self.name!r}: cp must be positive")
        if self.alpha < 0:
            raise CatalogError(f"vm {self.name!r}: alpha must be non-negative")
        if self.beta <= 0:
            raise CatalogError(f"vm {self.name!r}: beta must be positive")
        if self.r0 <= 0:
            raise CatalogError(f"vm {self.name!r}: r0 must be positive")
        if self.psi <= 0:
            raise CatalogError(f"vm {self.name!r}: psi must be positive")
        if not self.freqs:
            raise CatalogError(f"vm {self.name!r}: needs at least one frequency level")
        if any(not 0 < f <= 1 for f in self.freqs):
            raise CatalogError(f"vm {self.name!r}: frequencies must lie in (0, 1]")
        if any(a >= b for a, b in zip(self.freqs, self.freqs[1:])):
            raise CatalogError(f"vm {self.name!r}: frequencies must be strictly ascending")

    @property
    def f_max(self) -> float:
        return self.freqs[-1]

    @property
    def f_min(self) -> float:
        return self.freqs[0]


@dataclass(frozen=True)
class Platform:
    """The catalog of VM types offered by the simulated cloud."""

    vm_types: tuple[VmType, ...]

    def __post_init__(self) -> None:
        if not self.vm_types:
            raise CatalogError("platform needs at least one VM type")
        names = [vm.name for vm in self.vm_types]
        if len(set(names)) != len(names):
            raise CatalogError("duplicate VM type names in catalog")

    def __getitem__(self, name: str) -> VmType:
        for vm in self.vm_types:
            if vm.name == name:
                return vm
        raise KeyError(name)

    @property
    def best(self) -> VmType:
        """The VM type with the highest compute power (ties broken by name)."""
        return max(self.vm_types, key=lambda vm: (vm.cp, vm.name))

    def max_speed(self) -> float:
        """Largest cp * f product available anywhere in the catalog."""
        return max(vm.cp * vm.f_max for vm in self.vm_types)


@dataclass(frozen=True)
class ExecContext:
    """A (VM type, frequency level) pair a task can be mapped to."""

    vm: VmType
    freq_index: int

    def __post_init__(self) -> None:
        if not 0 <= self.freq_index < len(self.vm.freqs):
            raise CatalogError(
                f"freq_index {self.freq_index} out of range for vm {self.vm.name!r}"
            )

    @property
    def freq(self) -> float:
        return self.vm.freqs[self.freq_index]

    @property
    def speed(self) -> float:
        """Effective MIPS delivered: cp * f."""
        return self.vm.cp * self.freq


def power_draw(ctx: ExecContext) -> float:
    """Instantaneous power in watts: static part plus cubic dynamic part."""
    return ctx.vm.alpha + ctx.vm.beta * ctx.freq**3


def execution_time(wc: float, ctx: ExecContext) -> float:
    """Worst-case duration in seconds for ``wc`` MI on this context."""
    return wc / (ctx.vm.cp * ctx.freq)


def task_energy(wc: float, ctx: ExecContext) -> float:
    """Energy in joules for one copy of a ``wc``-MI task on this context."""
    return power_draw(ctx) * execution_time(wc, ctx)


def failure_rate(ctx: ExecContext) -> float:
    """Transient failure rate per second at this context's frequency.

    Scaling down from the top frequency raises the rate exponentially.  A
    single-level grid has no scaling span, so the base rate applies as is.
    """
    vm = ctx.vm
    span = vm.f_max - vm.f_min
    if span == 0:
        return vm.r0
    return vm.r0 * 10.0 ** (vm.psi * (vm.f_max - ctx.freq) / span)


def task_reliability(wc: float, ctx: ExecContext, replicated: bool = False) -> float:
    """Success probability of a task, optionally with a concurrent same-context replica."""
    r = math.exp(-failure_rate(ctx) * execution_time(wc, ctx))
    if replicated:
        return 1.0 - (1.0 - r) ** 2
    return r


def log_task_reliability(wc: float, ctx: ExecContext, replicated: bool = False) -> float:
    """log of task_reliability; -inf when the success probability underflows to 0."""
    r = task_reliability(wc, ctx, replicated)
    return math.log(r) if r > 0 else -math.inf


def workflow_reliability(per_task: list[float]) -> float:
    """Product of per-task effective reliabilities, accumulated in log space."""
    acc = 0.0
    for r in per_task:
        if not 0.0 <= r <= 1.0:
            raise ValueError(f"reliability {r} outside [0, 1]")
        if r == 0.0:
            return 0.0
        acc += math.log(r)
    return math.exp(acc)


def critical_frequency(vm: VmType) -> float:
    """Frequency minimizing energy per unit work, before snapping to the grid."""
    return (vm.alpha / (2.0 * vm.beta)) ** (1.0 / 3.0)


# ---------------------------------------------------------------------------
# Catalog I/O


def _platform_from_mapping(doc: dict) -> Platform:
    try:
        raw_vms = doc["vm_types"]
    except (KeyError, TypeError):
        raise CatalogError("catalog document must contain a 'vm_types' array") from None
    if not isinstance(raw_vms, list) or not raw_vms:
        raise CatalogError("'vm_types' must be a non-empty array")
    vms = []
    for raw in raw_vms:
        try:
            vms.append(
                VmType(
                    name=str(raw["name"]),
                    cp=float(raw["cp"]),
                    alpha=float(raw["alpha"]),
                    beta=float(raw["beta"]),
                    freqs=tuple(float(f) for f in raw["freqs"]),
                    r0=float(raw["r0"]),
                    psi=float(raw["psi"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, CatalogError):
                raise
            raise CatalogError(f"malformed VM type entry: {raw!r}") from exc
    return Platform(vm_types=tuple(vms))


def parse_platform(text: str, fmt: str = "json") -> Platform:
    """Parse a catalog document in JSON or TOML form."""
    if fmt == "json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CatalogError(f"invalid JSON catalog: {exc}") from exc
    elif fmt == "toml":
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise CatalogError(f"invalid TOML catalog: {exc}") from exc
    else:
        raise CatalogError(f"unknown catalog format {fmt!r}")
    return _platform_from_mapping(doc)


def load_platform(path: str | Path) -> Platform:
    """Load a catalog file; the extension selects JSON (default) or TOML."""
    path = Path(path)
    fmt = "toml" if path.suffix.lower() == ".toml" else "json"
    return parse_platform(path.read_text(), fmt=fmt)


def platform_to_json(platform: Platform) -> str:
    doc = {
        "vm_types": [
            {
                "name": vm.name,
                "cp": vm.cp,
                "alpha": vm.alpha,
                "beta": vm.beta,
                "freqs": list(vm.freqs),
                "r0": vm.r0,
                "psi": vm.psi,
            }
            for vm in platform.vm_types
        ]
    }
    return json.dumps(doc, indent=2)
