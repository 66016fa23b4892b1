"""Closed-loop experiment runner, metrics and report generation.

One run wires together the simulation plant, the online estimator stack
(encoder filters, attitude filter, learned friction nets, torque
filter), and the cascaded controller in one of the seven modes, then
reduces the log to torque-tracking and center-of-mass metrics.  Sweeps
repeat a scenario across modes or across friction-parameter scalings
and assemble comparison tables.
"""

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from . import pinn
from .control import (ControlConfig, MODES, PositionPD, RateScheduler,
                      TorquePI, high_level_balancer, rnea_torque_feedback)
from .dynamics import com_position
from .friction import ScvParams
from .kf import encoder_lsb, process_noise, quantization_variance, transition_matrix
from .plant import (Disturbance, ObjectEvent, Plant, ScenarioConfig,
                    SimulationDiverged)
from .spatial import Transform, cross3
from .ukf import ComplementaryAttitude, TorqueUkf


class OnlineKf:
    """Steady-state-gain encoder filter for the 1 kHz control path.

    The covariance recursion is run to convergence once at start-up;
    the loop then applies the constant gain, which is what a fixed-cost
    real-time implementation would do.
    """

    def __init__(self, dt, lsb, q_accel, q_jerk, x0=0.0):
        F = transition_matrix(dt)
        Q = process_noise(dt, q_accel, q_jerk)
        r = quantization_variance(lsb)
        P = np.diag([r, 1.0, 10.0])
        K = np.zeros(3)
        for _ in range(20000):
            P = F @ P @ F.T + Q
            Knew = P[:, 0] / (P[0, 0] + r)
            IKH = np.eye(3)
            IKH[:, 0] -= Knew
            P = IKH @ P @ IKH.T + r * np.outer(Knew, Knew)
            if np.max(np.abs(Knew - K)) < 1e-14:
                K = Knew
                break
            K = Knew
        self.k0, self.k1, self.k2 = float(K[0]), float(K[1]), float(K[2])
        self.dt = dt
        self.x, self.v, self.a = float(x0), 0.0, 0.0

    def update(self, z):
        dt = self.dt
        xp = self.x + dt * self.v + 0.5 * dt * dt * self.a
        vp = self.v + dt * self.a
        innov = z - xp
        self.x = xp + self.k0 * innov
        self.v = vp + self.k1 * innov
        self.a = self.a + self.k2 * innov
        return self.x, self.v, self.a


DEFAULT_KF_GAINS = {"q_accel": 1e-3, "q_jerk": 200.0}


def generate_friction_dataset(scenario=None, duration=6.0, seed=0,
                              joint=0, current_amp=0.35):
    """Excitation run producing a friction-identification log.

    The robot hangs base-locked while every joint is driven by a
    multi-sine current; returns (t, motor-side velocity mapped to the
    joint side, joint velocity, true friction torque) for `joint`,
    with both velocities taken from the online encoder filters exactly
    as the controller will see them.
    """
    if scenario is None:
        scenario = ScenarioConfig(step=1e-3, duration=duration, seed=seed,
                                  lock_base=True)
    plant = Plant(scenario)
    st = plant.initial_state()
    st.base_pos[2] = 2.0  # feet clear of the ground
    n = plant.n
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0, 2 * np.pi, size=(n, 3))
    freqs = np.array([0.3, 0.9, 1.7])
    joint_lsb = encoder_lsb(scenario.noise["joint_encoder_bits"])
    motor_lsb = encoder_lsb(scenario.noise["motor_encoder_bits"])
    jkf = [OnlineKf(1e-3, joint_lsb, **DEFAULT_KF_GAINS, x0=st.s[j]) for j in range(n)]
    mkf = [OnlineKf(1e-3, motor_lsb, **DEFAULT_KF_GAINS, x0=st.motor_pos[j])
           for j in range(n)]
    steps = int(round(duration / scenario.step))
    t_log = np.empty(steps)
    mv_log = np.empty(steps)
    jv_log = np.empty(steps)
    fr_log = np.empty(steps)
    for k in range(steps):
        t = k * scenario.step
        currents = current_amp * np.sin(
            2 * np.pi * freqs[None, :] * t + phases).sum(axis=1)
        st, sb = plant.step(st, currents)
        for j in range(n):
            jkf[j].update(sb.joint_pos[j])
            mkf[j].update(sb.motor_pos[j])
        t_log[k] = st.t
        mv_log[k] = mkf[joint].v / plant.reduction[joint]
        jv_log[k] = jkf[joint].v
        fr_log[k] = st.tau_friction[joint]
    return t_log, mv_log, jv_log, fr_log


def train_friction_net(dataset, scv, seed=0, lam=0.3, buffer_len=8,
                       hidden=48, epochs=40):
    """Train one friction net on an identification log."""
    t, mv, jv, fr = dataset
    net = pinn.FrictionNet(buffer_len, hidden, hidden, 0.0, lam, scv, seed=seed)
    samples = pinn.build_samples(t, mv, jv, fr, buffer_len)
    pinn.train(net, samples, epochs=epochs, batch_size=64,
               learning_rate=2e-3, seed=seed)
    return net


def default_friction_nets(plant, dataset=None, seed=0, **train_kw):
    """One net per joint; joints sharing friction parameters share a net."""
    if dataset is None:
        dataset = generate_friction_dataset(seed=seed)
    cache = {}
    nets = {}
    for j, name in enumerate(plant.model.joint_names):
        key = (plant.scv[j].coulomb, plant.scv[j].breakaway,
               plant.scv[j].stribeck_vel, plant.scv[j].viscous)
        if key not in cache:
            cache[key] = train_friction_net(dataset, plant.scv[j], seed=seed,
                                            **train_kw)
        nets[name] = cache[key]
    return nets


@dataclass
class RunLog:
    """Per-sample arrays logged at the sensor rate."""
    t: np.ndarray
    tau_d: np.ndarray
    tau_true: np.ndarray
    tau_feedback: np.ndarray
    com: np.ndarray
    com_ref: np.ndarray
    currents: np.ndarray
    fell: bool
    fall_time: float
    diverged: bool


def _first_disturbance_time(scenario):
    times = [d.time for d in scenario.disturbances]
    times += [e.time for e in scenario.object_events]
    return min(times) if times else None


def run_scenario(scenario, control, nets=None, kf_gains=None, out_dir=None,
                 label=None):
    """Run one closed-loop scenario; returns (report dict, RunLog).

    `nets` maps joint name to a trained friction net (required for the
    PINN modes and the torque-filter friction channel).  If `out_dir`
    is given, the run CSV, report JSON and a metrics CSV row are
    written there under `label`.
    """
    plant = Plant(scenario)
    model = plant.model
    n = plant.n
    dt_s = 1.0 / scenario.sensor_rate
    st = plant.initial_state()
    s0 = st.s.copy()
    gear_torque = plant.reduction * plant.k_t
    gains = dict(DEFAULT_KF_GAINS if kf_gains is None else kf_gains)

    mode = control.mode
    use_ukf = mode.startswith("UKF")
    use_rnea = mode.startswith("RNEA")
    use_pinn_comp = mode.endswith("PINN") and mode != "PositionControl"
    needs_nets = use_pinn_comp or use_ukf
    if needs_nets and nets is None:
        raise ValueError(f"mode {mode} needs trained friction nets")
    net_list = [nets[name] for name in model.joint_names] if needs_nets else None

    joint_lsb = encoder_lsb(scenario.noise["joint_encoder_bits"])
    motor_lsb = encoder_lsb(scenario.noise["motor_encoder_bits"])
    jkf = [OnlineKf(dt_s, joint_lsb, **gains, x0=st.s[j]) for j in range(n)]
    mkf = [OnlineKf(dt_s, motor_lsb, **gains, x0=st.motor_pos[j]) for j in range(n)]
    att = ComplementaryAttitude(R0=st.base_R.copy())
    buf_len = max(net.buffer_len for net in net_list) if net_list else 1
    mv_buf = np.zeros((buf_len, n))
    jv_buf = np.zeros((buf_len, n))

    ukf = None
    if use_ukf:
        ukf = TorqueUkf(model, plant.reduction, plant.k_t, dt_s)
        ukf_mean, ukf_cov = ukf.initial_belief()
    pi = TorquePI(n, control, gear_torque, dt_s)
    pos_pd = PositionPD(control, gear_torque)
    sched = RateScheduler(scenario.step, control.low_rate, control.high_rate)

    com0 = st.com.copy()
    amp = np.asarray(scenario.com_amplitude, dtype=float)
    omega_ref = 2.0 * np.pi * scenario.com_frequency
    nominal_com_z = com0[2]

    steps = int(round(scenario.duration / scenario.step))
    log_t = []
    log_tau_d = []
    log_tau = []
    log_fb = []
    log_com = []
    log_ref = []
    log_cur = []
    tau_d = np.zeros(n)
    currents = np.zeros(n)
    # friction feedforward is smoothed: its useful content is the
    # quasi-static stiction/Coulomb level, while the sample-to-sample
    # wiggle is prediction noise the torque loop cannot reject
    comp_alpha = 1.0 - np.exp(-2.0 * np.pi * control.comp_cutoff * dt_s)
    comp_state = np.zeros(n)
    fell = False
    fall_time = float("nan")
    diverged = False
    sdot_est = np.zeros(n)

    for k in range(steps):
        t = k * scenario.step
        high_due, low_due = sched.due()

        if high_due:
            # 100 Hz balancer on the current state estimate
            base_pose = st.base_pose()
            nu = np.concatenate([st.base_twist, sdot_est])
            com_ref = com0 + amp * np.sin(omega_ref * t)
            com_vel_ref = amp * omega_ref * np.cos(omega_ref * t)
            com_acc_ref = -amp * omega_ref ** 2 * np.sin(omega_ref * t)
            if mode != "PositionControl":
                tau_d = high_level_balancer(
                    model, base_pose, st.s, nu, com_ref, com_vel_ref,
                    com_acc_ref, ("left_sole", "right_sole"), control,
                    posture_ref=s0)

        try:
            st, sb = plant.step(st, currents)
        except SimulationDiverged as exc:
            diverged = True
            fall_time = exc.time if not fell else fall_time
            fell = True
            break

        # ---- 1 kHz estimator + torque loop ----
        s_meas = np.empty(n)
        mpos_est = np.empty(n)
        mvel_est = np.empty(n)
        for j in range(n):
            x, v, _ = jkf[j].update(sb.joint_pos[j])
            s_meas[j] = x
            sdot_est[j] = v
            xm, vm, _ = mkf[j].update(sb.motor_pos[j])
            mpos_est[j] = xm / plant.reduction[j]
            mvel_est[j] = vm / plant.reduction[j]
            mv_buf[:-1, j] = mv_buf[1:, j]
            mv_buf[-1, j] = vm / plant.reduction[j]
            jv_buf[:-1, j] = jv_buf[1:, j]
            jv_buf[-1, j] = v
        imu_acc = sb.imu_acc["waist_imu"]
        imu_gyro = sb.imu_gyro["waist_imu"]
        R_est = att.update(imu_acc, imu_gyro, dt_s)

        tau_f_hat = None
        if net_list is not None:
            tau_f_hat = np.array([
                pinn.predict_bounded(net_list[j],
                                     mv_buf[-net_list[j].buffer_len:, j],
                                     jv_buf[-net_list[j].buffer_len:, j])
                for j in range(n)])

        tau_fb = None
        if use_ukf:
            mask = mode == "UKF-NoComp"
            z = ukf.assemble_measurement(
                sdot_est, sb.currents, sb.ft, imu_acc, imu_gyro,
                tau_f_pinn=None if mask else tau_f_hat)
            ukf_mean, ukf_cov = ukf.step(ukf_mean, ukf_cov, s_meas, R_est, z,
                                         mask_friction=mask)
            tau_fb = ukf.joint_torque_estimate(ukf_mean)
        elif use_rnea:
            # proper acceleration from IMU (base) and encoder filters (joints)
            w = imu_gyro
            r = model.frame("waist_imu")[1].p
            a_base = imu_acc - cross3(w, cross3(w, r))
            accel = np.concatenate([a_base, np.zeros(3),
                                    [jkf[j].a for j in range(n)]])
            nu_est = np.concatenate([np.zeros(3), w, sdot_est])
            tau_fb = rnea_torque_feedback(
                model, Transform(R_est, np.zeros(3)), s_meas, nu_est, accel,
                sb.ft)

        if tau_f_hat is not None:
            comp_state += comp_alpha * (tau_f_hat - comp_state)

        if mode == "PositionControl":
            # collocated loop on the motor encoder mapped to the joint side
            currents = pos_pd(s0, mpos_est, mvel_est)
        else:
            comp = comp_state if use_pinn_comp else None
            fb = None if mode.startswith("Feedforward") else tau_fb
            currents = pi(tau_d, fb, comp)

        log_t.append(st.t)
        log_tau_d.append(tau_d.copy())
        log_tau.append(st.tau.copy())
        log_fb.append(tau_fb.copy() if tau_fb is not None else np.full(n, np.nan))
        log_com.append(st.com.copy())
        log_ref.append(com0 + amp * np.sin(omega_ref * st.t))
        log_cur.append(currents.copy())
        if not fell and st.com[2] < 0.7 * nominal_com_z:
            fell = True
            fall_time = st.t

    log = RunLog(np.array(log_t), np.array(log_tau_d), np.array(log_tau),
                 np.array(log_fb), np.array(log_com), np.array(log_ref),
                 np.array(log_cur), fell, fall_time, diverged)
    report = compute_metrics(log, scenario, control)
    if out_dir is not None:
        write_artifacts(out_dir, label or control.mode, scenario, control,
                        log, report)
    return report, log


def compute_metrics(log, scenario, control, burn_in=0.5):
    """Reduce a run log to the report dictionary.

    Torque-tracking errors compare the commanded desired torque against
    the plant's true joint torque (ground truth, not the estimator's
    own feedback).  CoM errors are windowed to before the first
    scheduled disturbance, mirroring a disturbance-free baseline table.
    """
    t = log.t
    keep = t >= (t[0] + burn_in)
    err = log.tau_d[keep] - log.tau_true[keep]
    mse = np.mean(err ** 2, axis=0)
    rmse = np.sqrt(mse)
    mae = np.mean(np.abs(err), axis=0)

    first_dist = _first_disturbance_time(scenario)
    com_keep = keep.copy()
    if first_dist is not None:
        com_keep &= t < first_dist
    com_err = log.com[com_keep] - log.com_ref[com_keep]
    if len(com_err) == 0:
        com_err = np.zeros((1, 3))
    report = {
        "mode": control.mode,
        "seed": scenario.seed,
        "config_hash": scenario.config_hash(),
        "torque_mse": mse.tolist(),
        "torque_rmse": rmse.tolist(),
        "torque_mae": mae.tolist(),
        "torque_rmse_overall": float(np.sqrt(np.mean(err ** 2))),
        "com_mean_error_mm": (np.mean(np.abs(com_err), axis=0) * 1e3).tolist(),
        "com_max_error_mm": (np.max(np.abs(com_err), axis=0) * 1e3).tolist(),
        "avg_abs_torque": float(np.mean(np.abs(log.tau_true[keep]))),
        "peak_abs_torque": float(np.max(np.abs(log.tau_true))) if len(t) else 0.0,
        "fell": bool(log.fell),
        "fall_time": None if not log.fell else float(log.fall_time),
        "diverged": bool(log.diverged),
    }
    return report


RUN_CSV_COLUMNS = ["t", "tau_d", "tau_true", "tau_feedback", "com", "com_ref",
                   "currents"]


def write_artifacts(out_dir, label, scenario, control, log, report):
    """Write run CSV, metrics CSV row and report JSON for one run."""
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, label.replace("/", "_"))
    n = log.tau_d.shape[1] if log.tau_d.ndim == 2 else 0
    header = ["t"]
    for block in ("tau_d", "tau_true", "tau_feedback", "current"):
        header += [f"{block}_{j}" for j in range(n)]
    header += ["com_x", "com_y", "com_z", "com_ref_x", "com_ref_y", "com_ref_z"]
    with open(base + "_run.csv", "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(len(log.t)):
            row = [repr(float(log.t[i]))]
            for arr in (log.tau_d, log.tau_true, log.tau_feedback, log.currents):
                row += [repr(float(x)) for x in arr[i]]
            row += [repr(float(x)) for x in log.com[i]]
            row += [repr(float(x)) for x in log.com_ref[i]]
            w.writerow(row)
    with open(base + "_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    write_metrics_csv(os.path.join(out_dir, "metrics.csv"), [report])


def write_metrics_csv(path, reports, append=True):
    """One row per run; stable column order for table assembly."""
    cols = ["mode", "seed", "config_hash", "torque_rmse_overall",
            "avg_abs_torque", "peak_abs_torque", "fell", "fall_time",
            "com_mean_error_mm", "com_max_error_mm"]
    exists = os.path.exists(path) and append
    with open(path, "a" if append else "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        if not exists:
            w.writerow(cols)
        for r in reports:
            w.writerow([json.dumps(r[c]) if isinstance(r[c], list) else r[c]
                        for c in cols])


def sweep_modes(scenario, modes=None, control=None, nets=None, out_dir=None):
    """Run a scenario across control modes with identical gains."""
    modes = list(MODES) if modes in (None, "all") else list(modes)
    base = control or ControlConfig()
    reports = []
    for mode in modes:
        cfg = ControlConfig(**{**base.__dict__, "mode": mode})
        rep, _ = run_scenario(scenario, cfg, nets=nets, out_dir=out_dir,
                              label=mode)
        reports.append(rep)
    return reports


def scalability_sweep(scenario, scalings, control=None, nets=None,
                      out_dir=None):
    """Re-run the same controller on plants with scaled friction.

    The friction nets and filter settings stay fixed (trained on the
    nominal plant); only the plant friction parameters change.
    """
    reports = []
    for scale in scalings:
        if scale <= 0.0:
            raise ValueError(f"friction scaling must be positive, got {scale}")
        d = scenario.to_dict()
        joints = {k: {sec: dict(v) for sec, v in j.items()}
                  for k, j in d.get("joints", {}).items()}
        default = joints.setdefault("default", {})
        fr = dict(default.get("friction", {}))
        base_scv = ScvParams(fr.get("coulomb", 1.0), fr.get("breakaway", 2.0),
                             fr.get("stribeck_vel", 0.1), fr.get("viscous", 0.5))
        scaled = base_scv.scaled(scale)
        default["friction"] = {"coulomb": scaled.coulomb,
                               "breakaway": scaled.breakaway,
                               "stribeck_vel": scaled.stribeck_vel,
                               "viscous": scaled.viscous}
        d["joints"] = joints
        scaled_scenario = ScenarioConfig.from_dict(d)
        cfg = control or ControlConfig(mode="UKF-PINN")
        rep, _ = run_scenario(scaled_scenario, cfg, nets=nets,
                              out_dir=out_dir, label=f"scale_{scale:g}")
        rep["friction_scale"] = scale
        reports.append(rep)
    return reports


def render_table(reports, columns=None):
    """Markdown comparison table from a list of report dicts."""
    columns = columns or ["mode", "torque_rmse_overall", "com_mean_error_mm",
                          "com_max_error_mm", "avg_abs_torque", "fell"]
    def fmt(v):
        if isinstance(v, float):
            return f"{v:.4g}"
        if isinstance(v, list):
            return "[" + ", ".join(f"{x:.3g}" for x in v) + "]"
        return str(v)
    lines = ["| " + " | ".join(columns) + " |",
             "| " + " | ".join("---" for _ in columns) + " |"]
    for r in reports:
        lines.append("| " + " | ".join(fmt(r.get(c, "")) for c in columns) + " |")
    return "\n".join(lines) + "\n"


def make_disturbance_scenario(seed=0, duration=6.0, n_events=None):
    """Standard unmeasured-push scenario: random torso shoves.

    Pushes hit the torso frame (not instrumented by any FT sensor) with
    magnitude 10-40 N, duration 0.1-0.3 s, 4-8 events, all drawn from
    the seed.
    """
    rng = np.random.default_rng((seed, 777))
    count = int(rng.integers(4, 9)) if n_events is None else n_events
    disturbances = []
    t_lo, t_hi = 1.0, duration - 0.6
    times = np.sort(rng.uniform(t_lo, t_hi, size=count))
    for time in times:
        mag = rng.uniform(10.0, 40.0)
        direction = rng.uniform(-1.0, 1.0, size=2)
        direction = direction / (np.linalg.norm(direction) + 1e-12)
        force = (mag * direction[0], mag * direction[1], 0.0)
        disturbances.append(Disturbance(float(time), float(rng.uniform(0.1, 0.3)),
                                        "torso_push", force, (0.0, 0.0, 0.0)))
    return ScenarioConfig(duration=duration, seed=seed,
                          disturbances=disturbances)


def make_object_scenario(seed=0, duration=5.0, height=0.03, foot="right_sole",
                         insert_time=1.0, remove_time=3.0, region="front"):
    """Environment-adaptation scenario: a block is slid under one
    forefoot and later yanked away.

    The forefoot placement makes the terrain change adaptable through
    ankle compliance: a torque-controlled ankle yields and lets the
    foot pitch onto the block, while a stiff position-controlled ankle
    fights the constraint and levers the robot over.  The CoM reference
    is held still so the contrast is isolated to the ground change.
    """
    events = [ObjectEvent(insert_time, foot, height, "insert", region=region),
              ObjectEvent(remove_time, foot, height, "remove", region=region)]
    return ScenarioConfig(duration=duration, seed=seed,
                          com_amplitude=(0.0, 0.0, 0.0),
                          object_events=events)
