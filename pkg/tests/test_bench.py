import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest
from numpy.testing import assert_allclose

from icbpg import bench, datasets
from icbpg.solver import ToleranceSchedule


@pytest.fixture(scope="module")
def calibrated_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    datasets.generate_dataset(datasets.DatasetSpec("tall", 2000, p=10, seed=0), d)
    bench.calibrate(d, budget=300)
    return d


def test_parse_schedule():
    fx = bench.parse_schedule("fixed:1e-6")
    assert fx.kind == "fixed" and fx.value == 1e-6
    inv = bench.parse_schedule("inv2:2.5")
    assert inv.kind == "inverse_square" and inv.value == 2.5
    sched = ToleranceSchedule.fixed(0.5)
    assert bench.parse_schedule(sched) is sched
    with pytest.raises(ValueError):
        bench.parse_schedule("fixed")
    with pytest.raises(ValueError):
        bench.parse_schedule("geometric:0.5")


def test_default_target_gap_and_safe_label():
    assert_allclose(bench.default_target_gap(0.5), 1.5e-6, rtol=1e-15)
    assert bench.safe_label("fixed:1e-4") == "fixed_1e-4"


def test_calibrate_writes_reference(calibrated_dir):
    ds = datasets.load_dataset(calibrated_dir)
    man = ds.manifest
    for key in ("F_star", "R_surrogate", "x_hat_file", "calibration_cycles",
                "calibration_budget", "calibration_metric"):
        assert key in man
    ref = datasets.load_reference(ds)
    prob = datasets.build_problem(ds)
    # the stored reference value is attained by the stored minimizer
    assert_allclose(prob.objective(ref["x_hat"]), ref["F_star"], rtol=1e-12)
    # starting from zero, the radius surrogate is the minimizer's norm
    assert_allclose(ref["R_surrogate"], prob.global_B_norm(ref["x_hat"]),
                    rtol=1e-12)
    assert ref["F_star"] <= prob.objective(np.zeros(prob.n))


def test_calibrate_raises_when_budget_too_small(tmp_path):
    datasets.generate_dataset(datasets.DatasetSpec("tall", 2000, p=10, seed=0),
                              tmp_path)
    with pytest.raises(RuntimeError):
        bench.calibrate(tmp_path, budget=1)


def test_run_single_requires_calibration(tmp_path):
    datasets.generate_dataset(datasets.DatasetSpec("tall", 40, p=2, seed=0),
                              tmp_path)
    with pytest.raises(ValueError):
        bench.run_single(tmp_path, "inv2:1")


def test_run_single_reaches_target_and_writes_trace(calibrated_dir, tmp_path):
    rec = bench.run_single(calibrated_dir, "inv2:1", out_dir=tmp_path)
    assert rec.termination_reason == "target"
    ds = datasets.load_dataset(calibrated_dir)
    eps = bench.default_target_gap(float(ds.manifest["F_star"]))
    assert rec.cycles[-1].gap_to_ref <= eps
    trace = tmp_path / "trace_inv2_1.csv"
    assert trace.exists()
    with open(trace, newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == len(rec.cycles) + 1


def test_experiment_plan_validation(calibrated_dir):
    with pytest.raises(ValueError):
        bench.ExperimentPlan(data_dir=calibrated_dir, repetitions=0)
    with pytest.raises(ValueError):
        bench.ExperimentPlan(data_dir=calibrated_dir,
                             schedules=("fixed:1e-6", "bogus"))


def read_summary(out_dir):
    with open(os.path.join(out_dir, bench.SUMMARY_FILE), newline="") as fh:
        return list(csv.DictReader(fh))


def read_trace(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_compare_outputs_are_consistent(calibrated_dir, tmp_path):
    summaries = bench.compare(calibrated_dir, tmp_path)
    labels = [bench.parse_schedule(s).label for s in bench.DEFAULT_SCHEDULES]
    assert [s["schedule"] for s in summaries] == labels
    rows = read_summary(tmp_path)
    assert len(rows) == 4
    ds = datasets.load_dataset(calibrated_dir)
    f_star = float(ds.manifest["F_star"])
    for row, summary in zip(rows, summaries):
        assert row["schedule"] == summary["schedule"]
        trace = read_trace(os.path.join(
            tmp_path, "trace_%s.csv" % bench.safe_label(row["schedule"])))
        # summary totals equal the written trace's own totals
        assert int(row["total_cycles"]) == len(trace)
        cpu_sum = sum(float(r["cpu_cycle_s"]) for r in trace)
        assert_allclose(float(row["total_cpu_s"]), cpu_sum, rtol=1e-9,
                        atol=1e-12)
        assert_allclose(float(row["total_cpu_s"]),
                        float(trace[-1]["cpu_total_s"]), rtol=1e-12)
        assert float(row["final_gap"]) == float(trace[-1]["gap_to_ref"])
        mean = float(row["total_cpu_s"]) / len(trace)
        assert_allclose(float(row["cpu_per_cycle_mean"]), mean, rtol=1e-12)
    meta = json.load(open(os.path.join(tmp_path, bench.META_FILE)))
    assert set(meta["schedules"]) == set(labels)
    for sched in ("inv2:1", "fixed:1e-06", "fixed:1e-08"):
        assert meta["schedules"][sched]["termination"] == "target"
    # long-form plot data starts each schedule at cycle 0 with zero CPU
    with open(os.path.join(tmp_path, bench.PLOT_DATA_FILE), newline="") as fh:
        plot_rows = list(csv.DictReader(fh))
    for sched in labels:
        first = next(r for r in plot_rows if r["schedule"] == sched)
        assert int(first["cycle"]) == 0
        assert float(first["cpu_total_s"]) == 0.0
        prob0_gap = 0.5 - f_star  # F(0) = 0.5 ||b||^2 with unit-norm b
        assert_allclose(float(first["gap"]), prob0_gap, rtol=1e-9)
    assert os.path.exists(os.path.join(tmp_path, bench.PLOT_SCRIPT_FILE))


def test_parallel_runs_match_sequential(calibrated_dir, tmp_path):
    seq_dir = tmp_path / "seq"
    par_dir = tmp_path / "par"
    plan = bench.ExperimentPlan(data_dir=calibrated_dir,
                                schedules=("inv2:1", "fixed:1e-6"))
    old = os.environ.pop("ICBPG_THREADS", None)
    try:
        bench.run_experiment(plan, seq_dir)
        os.environ["ICBPG_THREADS"] = "2"
        bench.run_experiment(plan, par_dir)
    finally:
        os.environ.pop("ICBPG_THREADS", None)
        if old is not None:
            os.environ["ICBPG_THREADS"] = old
    timing_free = ("cycle", "delta_k", "F_value", "gap_to_ref",
                   "inner_iters_total", "mondec_violations")
    for sched in plan.schedules:
        name = "trace_%s.csv" % bench.safe_label(bench.parse_schedule(sched).label)
        seq = read_trace(seq_dir / name)
        par = read_trace(par_dir / name)
        assert len(seq) == len(par)
        for a, b in zip(seq, par):
            for col in timing_free:
                assert a[col] == b[col], (sched, col)


def test_repetitions_keep_summary_and_trace_consistent(calibrated_dir,
                                                       tmp_path):
    plan = bench.ExperimentPlan(data_dir=calibrated_dir,
                                schedules=("fixed:1e-6",), repetitions=2)
    summaries = bench.run_experiment(plan, tmp_path)
    trace = read_trace(tmp_path / "trace_fixed_1e-06.csv")
    assert summaries[0]["total_cycles"] == len(trace)
    assert_allclose(summaries[0]["total_cpu_s"],
                    float(trace[-1]["cpu_total_s"]), rtol=1e-12)
