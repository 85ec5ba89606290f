"""Experiment harness and copy-size study."""

import csv

import pytest

from ndpsim.costmodel import CostModel
from ndpsim.errors import ConfigError
from ndpsim.harness import (CAL_SIZE, CAL_TARGET, ExperimentPlan, copy_sweep,
                            copy_sweep_csv, load_plan, ordering_violations,
                            report, run_experiment, speedup_table, write_csv)

SMALL = ExperimentPlan(workloads=["hashmap", "tpcc", "tatp"],
                       mechanisms=["logging"], seeds=[1, 2], n_txns=8)


def test_copy_sweep_monotone_and_calibrated():
    points = copy_sweep()
    ratios = [p.speedup for p in points]
    assert points[0].size == 64 and points[-1].size == CAL_SIZE
    assert all(a < b for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] == pytest.approx(CAL_TARGET, rel=1e-6)
    assert abs(ratios[0] - 1.13) <= 0.30 * 1.13


def test_copy_calibration_solves_single_coefficient():
    cm = CostModel()
    c = cm.calibrate_copy(CAL_SIZE, CAL_TARGET)
    cal = CostModel(cpu_copy_ns_per_byte=c)
    ndp = cal.command_issue_latency_ns + cal.unit_exec_ns(CAL_SIZE)
    assert cal.cpu_copy_ns(CAL_SIZE) / ndp == pytest.approx(CAL_TARGET)


def test_calibration_unreachable_target():
    with pytest.raises(ConfigError):
        CostModel().calibrate_copy(64, 0.01)


def test_run_experiment_speedups_and_ordering():
    rows = run_experiment(SMALL)
    assert len(rows) == 3 * 2 * 4
    table = speedup_table(rows)
    for (w, m, c), s in table.items():
        if c == "baseline":
            assert s == pytest.approx(1.0)
    assert ordering_violations(rows) == []
    text = report(rows)
    assert "ordering: ok" in text


def test_csv_outputs(tmp_path):
    rows = run_experiment(SMALL)
    path = str(tmp_path / "speedups.csv")
    write_csv(rows, path)
    with open(path) as f:
        got = list(csv.reader(f))
    assert got[0] == ["workload", "mechanism", "config", "seed",
                      "sim_ns", "speedup"]
    assert len(got) == len(rows) + 1

    cpath = str(tmp_path / "copy.csv")
    copy_sweep_csv(copy_sweep(), cpath)
    with open(cpath) as f:
        rows2 = list(csv.reader(f))
    assert rows2[0][0] == "size_bytes" and len(rows2) == 10


def test_plan_toml_loading(tmp_path):
    p = tmp_path / "plan.toml"
    p.write_text('workloads = ["tatp"]\nmechanisms = ["logging"]\n'
                 'configs = ["baseline", "md"]\nseeds = [4]\nn_txns = 5\n'
                 '[cost]\ncpu_copy_ns_per_byte = 2.0\n')
    plan = load_plan(str(p))
    assert plan.workloads == ["tatp"] and plan.seeds == [4]
    assert plan.cost.cpu_copy_ns_per_byte == 2.0
    rows = run_experiment(plan)
    assert {r.config for r in rows} == {"baseline", "md"}


def test_plan_validation():
    with pytest.raises(ConfigError):
        ExperimentPlan(workloads=["nope"])
    with pytest.raises(ConfigError):
        ExperimentPlan(configs=["md"])  # no baseline to compare against
