"""Seeded generators for random VM catalogs and layered benchmark DAGs."""

from __future__ import annotations

import numpy as np

from .platform import Platform, VmType
from .workflow import Workflow


def random_platform(
    seed: int,
    *,
    n_types: int | None = None,
    min_types: int = 5,
    max_types: int = 15,
    cp_range: tuple[float, float] = (0.9, 210.0),
    levels_range: tuple[int, int] = (4, 6),
    psi_range: tuple[float, float] = (3.0, 7.0),
    r0_range: tuple[float, float] = (1e-6, 1e-4),
) -> Platform:
    """Random catalog within the benchmark parameter ranges.

    Frequency grids are evenly spaced from a random floor up to 1.0.  Power
    coefficients are drawn so the energy-optimal frequency lands in a
    realistic 0.3 to 0.8 band.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, 11]))
    count = n_types if n_types is not None else int(rng.integers(min_types, max_types + 1))
    vms = []
    for i in range(count):
        cp = float(rng.uniform(*cp_range))
        n_levels = int(rng.integers(levels_range[0], levels_range[1] + 1))
        f_min = float(rng.uniform(0.1, 0.5))
        freqs = tuple(float(f) for f in np.linspace(f_min, 1.0, n_levels))
        beta = float(rng.uniform(50.0, 200.0))
        f_cri = float(rng.uniform(0.3, 0.8))
        alpha = 2.0 * beta * f_cri**3
        r0 = float(np.exp(rng.uniform(np.log(r0_range[0]), np.log(r0_range[1]))))
        psi = float(rng.uniform(*psi_range))
        vms.append(
            VmType(
                name=f"vm{i:02d}",
                cp=cp,
                alpha=alpha,
                beta=beta,
                freqs=freqs,
                r0=r0,
                psi=psi,
            )
        )
    return Platform(vm_types=tuple(vms))


def random_workflow(
    seed: int,
    n: int,
    *,
    name: str | None = None,
    width: int = 4,
    extra_edge_prob: float = 0.25,
    wc_range: tuple[float, float] = (20.0, 200.0),
    arrival: float = 0.0,
    reliability: float = 0.9,
    deadline: float | None = None,
) -> Workflow:
    """Layered random DAG with controllable width and cross-layer density.

    Every non-root task gets at least one predecessor in the previous layer,
    so the DAG is connected front to back.  When ``deadline`` is omitted a
    generous serial bound is used; callers normally tighten it afterwards
    with a deadline factor against a concrete platform.
    """
    if n < 1:
        raise ValueError("need at least one task")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, 13]))
    wc = [float(rng.uniform(*wc_range)) for _ in range(n)]
    layer_of: list[int] = []
    layer = 0
    filled = 0
    while filled < n:
        size = int(rng.integers(1, width + 1))
        size = min(size, n - filled)
        layer_of.extend([layer] * size)
        filled += size
        layer += 1
    ids = [f"t{i:03d}" for i in range(n)]
    layers: dict[int, list[int]] = {}
    for i, lv in enumerate(layer_of):
        layers.setdefault(lv, []).append(i)

    edges: set[tuple[str, str]] = set()
    for lv in range(1, layer):
        prev = layers[lv - 1]
        for i in layers[lv]:
            pick = int(prev[int(rng.integers(0, len(prev)))])
            edges.add((ids[pick], ids[i]))
            for j in prev:
                if j != pick and rng.random() < extra_edge_prob:
                    edges.add((ids[j], ids[i]))

    if deadline is None:
        deadline = arrival + float(sum(wc))  # loose; tightened via deadline factor
    return Workflow(
        name=name or f"synth{n}-{seed}",
        arrival=arrival,
        deadline=deadline,
        reliability=reliability,
        tasks=list(zip(ids, wc)),
        edges=sorted(edges),
    )
