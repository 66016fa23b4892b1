"""Experiment runner: metrics algebra, artifacts, sweeps, scenarios."""

import filecmp
import os

import numpy as np
import pytest

from torquesense.control import ControlConfig
from torquesense.experiments import (
    OnlineKf,
    compute_metrics,
    generate_friction_dataset,
    make_disturbance_scenario,
    make_object_scenario,
    render_table,
    run_scenario,
    RunLog,
    scalability_sweep,
    sweep_modes,
    write_metrics_csv,
)
from torquesense.kf import encoder_lsb
from torquesense.plant import Disturbance, ScenarioConfig

SHORT = dict(duration=1.2, seed=0)


def synthetic_log(n_joints=2, T=2000, dt=1e-3, offset=None, seed=0):
    r = np.random.default_rng(seed)
    t = np.arange(T) * dt
    tau_true = r.normal(size=(T, n_joints))
    tau_d = tau_true + (r.normal(size=(T, n_joints)) if offset is None
                        else np.asarray(offset))
    com = r.normal(scale=1e-3, size=(T, 3))
    return RunLog(t, tau_d, tau_true, tau_d.copy(), com, np.zeros((T, 3)),
                  np.zeros((T, n_joints)), False, float("nan"), False)


def test_metric_identities():
    log = synthetic_log()
    rep = compute_metrics(log, ScenarioConfig(), ControlConfig())
    mse = np.array(rep["torque_mse"])
    rmse = np.array(rep["torque_rmse"])
    mae = np.array(rep["torque_mae"])
    assert np.allclose(rmse ** 2, mse, rtol=1e-12)
    assert np.all(mae <= rmse + 1e-15)          # Jensen's inequality
    # overall RMSE pools all joints
    keep = log.t >= 0.5
    err = log.tau_d[keep] - log.tau_true[keep]
    assert rep["torque_rmse_overall"] == pytest.approx(
        np.sqrt(np.mean(err ** 2)), rel=1e-12)


def test_metric_constant_offset_case():
    log = synthetic_log(offset=[0.3, -0.7])
    rep = compute_metrics(log, ScenarioConfig(), ControlConfig())
    assert np.allclose(rep["torque_rmse"], [0.3, 0.7], atol=1e-12)
    assert np.allclose(rep["torque_mae"], [0.3, 0.7], atol=1e-12)
    assert np.allclose(rep["torque_mse"], [0.09, 0.49], atol=1e-12)


def test_com_error_windowed_before_first_disturbance():
    log = synthetic_log()
    # CoM error nonzero only after the (only) disturbance at t = 1.0
    log.com[:] = 0.0
    log.com[log.t >= 1.0] = 0.05
    scen = ScenarioConfig(disturbances=[
        Disturbance(1.0, 0.2, "torso_push", (0.0, 10.0, 0.0))])
    rep = compute_metrics(log, scen, ControlConfig())
    assert np.allclose(rep["com_mean_error_mm"], 0.0, atol=1e-12)
    # without the disturbance the window extends over the offset region
    rep2 = compute_metrics(log, ScenarioConfig(), ControlConfig())
    assert max(rep2["com_mean_error_mm"]) > 1.0


def test_metrics_csv_schema_and_append(tmp_path):
    log = synthetic_log()
    rep = compute_metrics(log, ScenarioConfig(), ControlConfig())
    path = tmp_path / "metrics.csv"
    write_metrics_csv(path, [rep])
    write_metrics_csv(path, [rep])              # appends a second row
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 3
    header = lines[0].split(",")
    assert header[:4] == ["mode", "seed", "config_hash", "torque_rmse_overall"]
    assert lines[1] == lines[2]
    write_metrics_csv(path, [rep], append=False)  # overwrite mode
    assert len(path.read_text().strip().splitlines()) == 2


def test_render_table_markdown():
    log = synthetic_log(offset=[0.25, 0.25])
    rep = compute_metrics(log, ScenarioConfig(), ControlConfig(mode="Feedforward"))
    table = render_table([rep])
    lines = table.strip().splitlines()
    assert lines[0].startswith("| mode |")
    assert set(lines[1].replace("|", "").split()) == {"---"}
    assert "Feedforward" in lines[2]
    assert "0.25" in lines[2]


def test_online_kf_tracks_constant_acceleration():
    dt = 1e-3
    kf = OnlineKf(dt, encoder_lsb(20), q_accel=1e-2, q_jerk=1e2)
    x = v = None
    for k in range(4000):
        t = k * dt
        x, v, a = kf.update(0.5 * 3.0 * t * t)
    assert abs(v - 3.0 * (k * dt)) < 1e-3
    assert abs(a - 3.0) < 1e-3


def test_run_scenario_requires_nets_for_estimating_modes():
    with pytest.raises(ValueError, match="nets"):
        run_scenario(ScenarioConfig(**SHORT), ControlConfig(mode="UKF-PINN"))


def test_run_artifacts_and_byte_identical_metrics(tmp_path):
    scen = ScenarioConfig(**SHORT)
    ctrl = ControlConfig(mode="Feedforward")
    d1, d2 = tmp_path / "a", tmp_path / "b"
    rep1, log1 = run_scenario(scen, ctrl, out_dir=d1, label="ff")
    rep2, log2 = run_scenario(ScenarioConfig(**SHORT), ctrl, out_dir=d2,
                              label="ff")
    for name in ("ff_run.csv", "ff_report.json", "metrics.csv"):
        assert (d1 / name).exists()
        assert filecmp.cmp(d1 / name, d2 / name, shallow=False)
    assert rep1 == rep2
    assert np.array_equal(log1.tau_true, log2.tau_true)
    # run CSV has one row per sensor sample plus the header
    n_rows = len((d1 / "ff_run.csv").read_text().strip().splitlines())
    assert n_rows == len(log1.t) + 1


def test_sweep_modes_selected_subset(tmp_path):
    reports = sweep_modes(ScenarioConfig(**SHORT),
                          modes=["Feedforward", "PositionControl"],
                          out_dir=tmp_path)
    assert [r["mode"] for r in reports] == ["Feedforward", "PositionControl"]
    rows = (tmp_path / "metrics.csv").read_text().strip().splitlines()
    assert len(rows) == 3


def test_scalability_sweep_validation_and_identity():
    scen = ScenarioConfig(**SHORT)
    with pytest.raises(ValueError, match="positive"):
        scalability_sweep(scen, [-0.5], control=ControlConfig(mode="Feedforward"))
    base, _ = run_scenario(scen, ControlConfig(mode="Feedforward"))
    reports = scalability_sweep(scen, [1.0],
                                control=ControlConfig(mode="Feedforward"))
    assert reports[0]["friction_scale"] == 1.0
    # scaling by exactly 1 reproduces the nominal trajectory
    assert reports[0]["torque_rmse_overall"] == base["torque_rmse_overall"]
    assert reports[0]["torque_rmse"] == base["torque_rmse"]


def test_disturbance_scenario_construction():
    s1 = make_disturbance_scenario(seed=4)
    s2 = make_disturbance_scenario(seed=4)
    assert s1.config_hash() == s2.config_hash()
    assert 4 <= len(s1.disturbances) <= 8
    times = [d.time for d in s1.disturbances]
    assert times == sorted(times)
    for d in s1.disturbances:
        assert d.frame == "torso_push"
        assert 1.0 <= d.time <= s1.duration - 0.6
        f = np.asarray(d.force)
        assert f[2] == 0.0
        assert 10.0 <= np.linalg.norm(f) <= 40.0 + 1e-9
    assert make_disturbance_scenario(seed=5).config_hash() != s1.config_hash()


def test_object_scenario_construction():
    s = make_object_scenario(seed=1, height=0.04)
    assert len(s.object_events) == 2
    ins, rem = s.object_events
    assert (ins.action, rem.action) == ("insert", "remove")
    assert ins.height == 0.04
    assert ins.frame == rem.frame == "right_sole"
    assert ins.time < rem.time
    assert tuple(s.com_amplitude) == (0.0, 0.0, 0.0)


def test_friction_dataset_shapes_and_determinism():
    t1, mv1, jv1, fr1 = generate_friction_dataset(duration=0.5, seed=2)
    t2, mv2, jv2, fr2 = generate_friction_dataset(duration=0.5, seed=2)
    assert len(t1) == 500
    assert np.array_equal(mv1, mv2)
    assert np.array_equal(jv1, jv2)
    assert np.array_equal(fr1, fr2)
    # the excitation actually moves the joint
    assert np.max(np.abs(jv1)) > 0.01
    # friction opposes the motion most of the time
    moving = np.abs(jv1) > 0.2
    assert np.mean(np.sign(fr1[moving]) == np.sign(jv1[moving])) > 0.9
