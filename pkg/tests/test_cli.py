"""CLI surface: subcommands, exit codes, file outputs, determinism."""

from __future__ import annotations

import json
import os
import subprocess
import sys

import pytest

from wattsched.cli import main

pytestmark = pytest.mark.usefixtures("inputs")


@pytest.fixture
def inputs(tmp_path, w1_json, ref_platform_json):
    (tmp_path / "w1.json").write_text(w1_json)
    (tmp_path / "plat.json").write_text(ref_platform_json)
    w2 = {
        "name": "w2",
        "arrival": 0,
        "deadline": 8,
        "reliability": 0.5,
        "tasks": [
            {"id": "t1", "wc": 24},
            {"id": "t2", "wc": 16},
            {"id": "t3", "wc": 16},
            {"id": "t4", "wc": 16},
        ],
        "edges": [["t1", "t2"], ["t1", "t3"], ["t1", "t4"]],
    }
    (tmp_path / "w2.json").write_text(json.dumps(w2))
    return tmp_path


def run_cli(*args) -> int:
    return main([str(a) for a in args])


class TestValidate:
    def test_accepts_feasible(self, tmp_path, capsys):
        rc = run_cli("validate", "--workflow", tmp_path / "w1.json", "--platform", tmp_path / "plat.json")
        assert rc == 0
        assert "feasible" in capsys.readouterr().out

    def test_rejects_tight_deadline(self, tmp_path, capsys):
        w = json.loads((tmp_path / "w1.json").read_text())
        w["deadline"] = 5
        (tmp_path / "tight.json").write_text(json.dumps(w))
        rc = run_cli("validate", "--workflow", tmp_path / "tight.json", "--platform", tmp_path / "plat.json")
        assert rc == 2
        assert "deadline" in capsys.readouterr().out

    def test_missing_file_is_error(self, tmp_path):
        rc = run_cli("validate", "--workflow", tmp_path / "nope.json", "--platform", tmp_path / "plat.json")
        assert rc == 1

    def test_platform_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("WATTSCHED_PLATFORM", str(tmp_path / "plat.json"))
        assert run_cli("validate", "--workflow", tmp_path / "w1.json") == 0

    def test_no_platform_anywhere(self, tmp_path, monkeypatch):
        monkeypatch.delenv("WATTSCHED_PLATFORM", raising=False)
        assert run_cli("validate", "--workflow", tmp_path / "w1.json") == 1


class TestSchedule:
    def test_reference_energy_in_document(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        rc = run_cli(
            "schedule",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--algo", "lef",
            "--out", out,
        )
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["totals"]["energy"] == pytest.approx(1016.0, abs=1e-6)
        assert doc["tasks"]["t2"]["frequency"] == 0.5
        assert "energy=1016.000000" in capsys.readouterr().out

    def test_adaptive_choice_on_star(self, tmp_path, capsys):
        rc = run_cli(
            "schedule",
            "--workflow", tmp_path / "w2.json",
            "--platform", tmp_path / "plat.json",
            "--algo", "asmfr",
            "--th", "0.75",
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "selected=ldd" in out and "energy=1326.000000" in out

    def test_baseline_energy(self, tmp_path, capsys):
        rc = run_cli(
            "schedule",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--algo", "bcp",
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "energy=1246.000000" in out and "makespan=6.000000" in out

    def test_infeasible_exit_code(self, tmp_path):
        w = json.loads((tmp_path / "w1.json").read_text())
        w["deadline"] = 5
        (tmp_path / "tight.json").write_text(json.dumps(w))
        rc = run_cli(
            "schedule",
            "--workflow", tmp_path / "tight.json",
            "--platform", tmp_path / "plat.json",
            "--algo", "lef",
        )
        assert rc == 2

    def test_unbounded_deadline_flag_rescues_tight_workflow(self, tmp_path):
        w = json.loads((tmp_path / "w1.json").read_text())
        w["deadline"] = 5
        (tmp_path / "tight.json").write_text(json.dumps(w))
        args = ["--workflow", tmp_path / "tight.json", "--platform", tmp_path / "plat.json"]
        assert run_cli("validate", *args) == 2
        assert run_cli("validate", *args, "--no-deadline") == 0
        out = tmp_path / "loose.json"
        assert run_cli("schedule", *args, "--no-deadline", "--algo", "lef", "--out", out) == 0
        doc = json.loads(out.read_text())
        assert doc["totals"]["feasible"]
        assert doc["totals"]["energy"] < 1246.0  # beats the all-fast baseline
        assert doc["tasks"]["t2"]["frequency"] == 0.5

    def test_dax_workflow_accepted_directly(self, tmp_path):
        dax = """<?xml version="1.0" encoding="UTF-8"?>
<adag xmlns="http://pegasus.isi.edu/schema/DAX" version="3.6" name="mini">
  <job id="j1" name="a" runtime="1"/>
  <job id="j2" name="b" runtime="2"/>
  <child ref="j2"><parent ref="j1"/></child>
</adag>
"""
        (tmp_path / "mini.dax").write_text(dax)
        out = tmp_path / "dax_sched.json"
        rc = run_cli(
            "schedule",
            "--workflow", tmp_path / "mini.dax",
            "--platform", tmp_path / "plat.json",
            "--algo", "lef",
            "--df", "2.0",
            "--out", out,
        )
        assert rc == 0
        doc = json.loads(out.read_text())
        assert set(doc["tasks"]) == {"j1", "j2"}


class TestSimulate:
    def test_worst_case_equals_planned(self, tmp_path, capsys):
        rc = run_cli(
            "simulate",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--algo", "lef",
            "--worst-case",
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "energy=1016.000000 planned=1016.000000" in out

    def test_trace_written_and_bounded(self, tmp_path, capsys):
        out = tmp_path / "trace.jsonl"
        rc = run_cli(
            "simulate",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--algo", "lef",
            "--seed", "42",
            "--out", out,
        )
        assert rc == 0
        lines = [json.loads(l) for l in out.read_text().splitlines()]
        summary = lines[-1]
        assert summary["kind"] == "summary"
        assert summary["energy"] <= 1016.0 + 1e-9
        kinds = {l["kind"] for l in lines[:-1]}
        assert {"dispatch", "complete"} <= kinds

    def test_monte_carlo_summary(self, tmp_path, capsys):
        rc = run_cli(
            "simulate",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--algo", "lef",
            "--trials", "20000",
        )
        assert rc == 0
        assert "achieved_reliability=" in capsys.readouterr().out


class TestOracleCommand:
    def test_reference_ratio_at_least_one(self, tmp_path):
        out = tmp_path / "o.json"
        rc = run_cli(
            "oracle",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--out", out,
        )
        assert rc == 0
        doc = json.loads(out.read_text())
        assert doc["oracle"]["status"] == "optimal"
        assert 1016.0 / doc["oracle"]["optimal_energy"] >= 1.0 - 1e-12

    def test_budget_exceeded_is_success_exit(self, tmp_path, capsys):
        gen = tmp_path / "g9.json"
        assert run_cli("gen", "--kind", "workflow", "--n", "9", "--seed", "1", "--out", gen) == 0
        rc = run_cli(
            "oracle",
            "--workflow", gen,
            "--platform", tmp_path / "plat.json",
            "--df", "1.5",
            "--max-nodes", "100",
        )
        assert rc == 0
        assert "status=budget-exceeded" in capsys.readouterr().out

    def test_infeasible_matches_validate(self, tmp_path):
        # reliability target unreachable on this catalog
        plat = {
            "vm_types": [
                {"name": "m", "cp": 8, "alpha": 50, "beta": 128,
                 "freqs": [0.5, 1.0], "r0": 0.5, "psi": 3}
            ]
        }
        (tmp_path / "bad.json").write_text(json.dumps(plat))
        args = [
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "bad.json",
            "--rw", "0.999999",
        ]
        assert run_cli("oracle", *args) == 2
        assert run_cli("validate", *args) == 2


class TestGen:
    def test_workflow_round_trips(self, tmp_path):
        out = tmp_path / "g.json"
        assert run_cli("gen", "--kind", "workflow", "--n", "30", "--seed", "7", "--out", out) == 0
        doc = json.loads(out.read_text())
        assert len(doc["tasks"]) == 30
        assert run_cli("validate", "--workflow", out, "--platform", tmp_path / "plat.json", "--df", "1.5") == 0

    def test_platform_catalog_ranges(self, tmp_path):
        out = tmp_path / "cat.json"
        assert run_cli("gen", "--kind", "platform", "--seed", "5", "--out", out) == 0
        doc = json.loads(out.read_text())
        assert 5 <= len(doc["vm_types"]) <= 15
        for vm in doc["vm_types"]:
            assert 0.9 <= vm["cp"] <= 210.0
            assert 4 <= len(vm["freqs"]) <= 6
            assert 1e-6 <= vm["r0"] <= 1e-4
            assert 3.0 <= vm["psi"] <= 7.0
            assert vm["freqs"][-1] == 1.0

    def test_same_seed_same_output(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run_cli("gen", "--kind", "workflow", "--n", "12", "--seed", "3", "--out", a)
        run_cli("gen", "--kind", "workflow", "--n", "12", "--seed", "3", "--out", b)
        assert a.read_bytes() == b.read_bytes()


class TestSweep:
    def test_csv_shape_and_baseline_constant(self, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = run_cli(
            "sweep",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--param", "df",
            "--grid", "1.2,1.6,2.0",
            "--algos", "bcp,lef",
            "--seeds", "2",
            "--out", out,
        )
        assert rc == 0
        lines = out.read_text().splitlines()
        header = lines[0].split(",")
        assert header[:6] == ["workflow", "algorithm", "seed", "df", "rw", "n"]
        rows = [dict(zip(header, l.split(","))) for l in lines[1:]]
        assert len(rows) == 3 * 2 * 2
        bcp = {r["realized_energy"] for r in rows if r["algorithm"] == "bcp"}
        assert len(bcp) == 1

    def test_bad_grid_is_error(self, tmp_path):
        rc = run_cli(
            "sweep",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--param", "df",
            "--grid", "0.5,1.0",
        )
        assert rc == 1

    def test_aborted_sweep_leaves_no_file(self, tmp_path):
        out = tmp_path / "x.csv"
        rc = run_cli(
            "sweep",
            "--workflow", tmp_path / "missing.json",
            "--platform", tmp_path / "plat.json",
            "--param", "df",
            "--grid", "1.5",
            "--out", out,
        )
        assert rc == 1 and not out.exists()

    def test_rows_rederivable_via_schedule_command(self, tmp_path, capsys):
        out = tmp_path / "sweep.csv"
        assert run_cli(
            "sweep",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--param", "df",
            "--grid", "1.4",
            "--algos", "lef",
            "--out", out,
        ) == 0
        lines = out.read_text().splitlines()
        row = dict(zip(lines[0].split(","), lines[1].split(",")))
        capsys.readouterr()
        assert run_cli(
            "schedule",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--algo", "lef",
            "--df", row["df"],
            "--out", tmp_path / "re.json",
        ) == 0
        doc = json.loads((tmp_path / "re.json").read_text())
        assert f"{doc['totals']['energy']:.6f}" == row["planned_energy"]

    def test_task_count_sweep_generates_workflows(self, tmp_path):
        out = tmp_path / "tasks.csv"
        rc = run_cli(
            "sweep",
            "--platform", tmp_path / "plat.json",
            "--param", "tasks",
            "--grid", "6,10",
            "--algos", "lef",
            "--df", "1.5",
            "--out", out,
        )
        assert rc == 0
        lines = out.read_text().splitlines()
        header = lines[0].split(",")
        ns = [dict(zip(header, l.split(",")))["n"] for l in lines[1:]]
        assert ns == ["6", "10"]

    def test_threshold_sweep_flips_selection(self, tmp_path):
        out = tmp_path / "th.csv"
        rc = run_cli(
            "sweep",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--param", "th",
            "--grid", "0.25,0.75",
            "--algos", "asmfr",
            "--out", out,
        )
        assert rc == 0
        lines = out.read_text().splitlines()
        header = lines[0].split(",")
        energies = [dict(zip(header, l.split(",")))["planned_energy"] for l in lines[1:]]
        # below the fan-out ratio the level-deadline ordering runs: 1108 J
        assert energies == ["1108.000000", "1016.000000"]

    def test_parallel_jobs_match_sequential(self, tmp_path):
        seq, par = tmp_path / "seq.csv", tmp_path / "par.csv"
        base = [
            "sweep",
            "--workflow", tmp_path / "w1.json",
            "--platform", tmp_path / "plat.json",
            "--param", "rw",
            "--grid", "0.9,0.99",
            "--algos", "lef,dy",
            "--seeds", "2",
        ]
        assert run_cli(*base, "--out", seq) == 0
        assert run_cli(*base, "--out", par, "--jobs", "2") == 0
        assert seq.read_bytes() == par.read_bytes()


class TestDeterminismAcrossProcesses:
    def sweep_args(self, tmp_path, out):
        return [
            "sweep",
            "--workflow", str(tmp_path / "w1.json"),
            "--platform", str(tmp_path / "plat.json"),
            "--param", "df",
            "--grid", "1.2,1.8",
            "--algos", "lef,dy",
            "--seeds", "2",
            "--trials", "2000",
            "--out", str(out),
        ]

    def run_fresh_process(self, args, hashseed):
        env = dict(os.environ, PYTHONHASHSEED=hashseed)
        return subprocess.run(
            [sys.executable, "-m", "wattsched.cli", *args],
            capture_output=True,
            text=True,
            env=env,
        )

    def test_sweep_and_trace_bytes_stable(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        ra = self.run_fresh_process(self.sweep_args(tmp_path, a), "1")
        rb = self.run_fresh_process(self.sweep_args(tmp_path, b), "99")
        assert ra.returncode == 0 and rb.returncode == 0, ra.stderr + rb.stderr
        assert a.read_bytes() == b.read_bytes()
        ta, tb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        sim = lambda out: [
            "simulate",
            "--workflow", str(tmp_path / "w1.json"),
            "--platform", str(tmp_path / "plat.json"),
            "--algo", "asmfr",
            "--seed", "7",
            "--out", str(out),
        ]
        ra = self.run_fresh_process(sim(ta), "5")
        rb = self.run_fresh_process(sim(tb), "500")
        assert ra.returncode == 0 and rb.returncode == 0
        assert ta.read_bytes() == tb.read_bytes()
        assert ra.stdout == rb.stdout
