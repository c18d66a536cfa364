"""Shared fixtures: the two reference workflows and their two-VM catalog.

The DAG shapes are hand-reconstructed; their expected schedules and energy
totals are derived step by step in test_scheduling.py.
"""

from __future__ import annotations

import pytest

from wattsched.platform import Platform, VmType
from wattsched.workflow import Workflow

VM1 = VmType(name="vm1", cp=8.0, alpha=50.0, beta=128.0, freqs=(0.5, 1.0), r0=1e-5, psi=3.0)
VM2 = VmType(name="vm2", cp=2.0, alpha=40.0, beta=64.0, freqs=(0.5, 1.0), r0=1e-5, psi=3.0)


@pytest.fixture
def ref_platform() -> Platform:
    return Platform(vm_types=(VM1, VM2))


@pytest.fixture
def w1() -> Workflow:
    """Chain-diamond: t1 -> t2 -> {t3, t4} -> t5, loose reliability target."""
    return Workflow(
        name="w1",
        arrival=0.0,
        deadline=10.0,
        reliability=0.5,
        tasks=[("t1", 8.0), ("t2", 24.0), ("t3", 8.0), ("t4", 8.0), ("t5", 8.0)],
        edges=[("t1", "t2"), ("t2", "t3"), ("t2", "t4"), ("t3", "t5"), ("t4", "t5")],
    )


@pytest.fixture
def w2() -> Workflow:
    """Star: t1 fans out to t2, t3, t4."""
    return Workflow(
        name="w2",
        arrival=0.0,
        deadline=8.0,
        reliability=0.5,
        tasks=[("t1", 24.0), ("t2", 16.0), ("t3", 16.0), ("t4", 16.0)],
        edges=[("t1", "t2"), ("t1", "t3"), ("t1", "t4")],
    )


@pytest.fixture
def w1_json() -> str:
    return (
        '{"name": "w1", "arrival": 0, "deadline": 10, "reliability": 0.5, '
        '"tasks": [{"id": "t1", "wc": 8}, {"id": "t2", "wc": 24}, '
        '{"id": "t3", "wc": 8}, {"id": "t4", "wc": 8}, {"id": "t5", "wc": 8}], '
        '"edges": [["t1", "t2"], ["t2", "t3"], ["t2", "t4"], ["t3", "t5"], ["t4", "t5"]]}'
    )


@pytest.fixture
def ref_platform_json() -> str:
    return (
        '{"vm_types": ['
        '{"name": "vm1", "cp": 8, "alpha": 50, "beta": 128, "freqs": [0.5, 1.0], "r0": 1e-5, "psi": 3}, '
        '{"name": "vm2", "cp": 2, "alpha": 40, "beta": 64, "freqs": [0.5, 1.0], "r0": 1e-5, "psi": 3}'
        "]}"
    )
