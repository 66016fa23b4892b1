"""Balancer, torque PI loop, position baseline and the rate scheduler."""

import numpy as np
import pytest

from torquesense.control import (
    MODES,
    TORQUE_MODES,
    ControlConfig,
    PositionPD,
    RateScheduler,
    TorquePI,
    high_level_balancer,
    rnea_torque_feedback,
)
from torquesense.dynamics import com_position
from torquesense.model import parse_model
from torquesense.models import desk_biped, pendulum_urdf
from torquesense.plant import Plant, ScenarioConfig
from torquesense.spatial import Transform


def standing_setup():
    model = desk_biped()
    pose = Transform(p=np.array([0.0, 0.0, 0.5]))
    s = np.zeros(model.ndof)
    nu = np.zeros(model.nv)
    return model, pose, s, nu


def balancer_at_rest(config=None):
    model, pose, s, nu = standing_setup()
    cfg = config or ControlConfig()
    com = com_position(model, pose, s)
    tau_d = high_level_balancer(model, pose, s, nu, com, np.zeros(3),
                                np.zeros(3), ("left_sole", "right_sole"),
                                cfg, posture_ref=s)
    return model, tau_d


def test_mode_lists():
    assert len(MODES) == 7
    assert "PositionControl" in MODES
    assert set(TORQUE_MODES) == set(MODES) - {"PositionControl"}


def test_config_validation():
    with pytest.raises(ValueError, match="mode"):
        ControlConfig(mode="MagicMode")
    with pytest.raises(ValueError, match="nonnegative"):
        ControlConfig(kp_torque=-0.1)


def test_balancer_requires_contact():
    model, pose, s, nu = standing_setup()
    with pytest.raises(RuntimeError, match="no feet in contact"):
        high_level_balancer(model, pose, s, nu, np.zeros(3), np.zeros(3),
                            np.zeros(3), (), ControlConfig())


def test_balancer_mirror_symmetry():
    # symmetric robot, symmetric state: left/right torques mirror exactly
    model, tau_d = balancer_at_rest()
    ji = model.joint_index
    assert abs(tau_d[ji("left_hip_pitch")] - tau_d[ji("right_hip_pitch")]) < 1e-9
    assert abs(tau_d[ji("left_ankle_pitch")] - tau_d[ji("right_ankle_pitch")]) < 1e-9
    # roll joints see mirrored moments
    assert abs(tau_d[ji("left_hip_roll")] + tau_d[ji("right_hip_roll")]) < 1e-9


def test_balancer_gravity_compensation_holds_the_plant():
    # at zero tracking error the commanded torques are statics: applied
    # open loop to a stiction-free plant they hold the standing pose
    scen = ScenarioConfig(
        noise={"quantize": False, "current_std": 0.0, "ft_force_std": 0.0,
               "ft_torque_std": 0.0, "imu_acc_std": 0.0, "imu_gyro_std": 0.0},
        joints={"default": {"friction": {"coulomb": 0.0, "breakaway": 0.0,
                                         "viscous": 2.0}}})
    plant = Plant(scen)
    state = plant.initial_state()
    cfg = ControlConfig()
    com0 = state.com.copy()
    currents = None
    for k in range(500):
        if k % 10 == 0:   # 100 Hz statics refresh, as in the real stack
            tau_d = high_level_balancer(
                plant.model, state.base_pose(), state.s,
                np.concatenate([state.base_twist, state.sdot]),
                com0, np.zeros(3), np.zeros(3),
                tuple(plant.sole_frames), cfg, posture_ref=np.zeros(plant.n))
            currents = tau_d / (plant.reduction * plant.k_t)
        state, _ = plant.step(state, currents)
    assert np.linalg.norm(state.com - com0) < 0.01
    assert np.max(np.abs(state.sdot)) < 0.5


def test_rnea_feedback_static_accuracy():
    # settle the plant briefly, then inverse dynamics from true state and
    # true FT wrenches reproduces the true joint torque within 2% of range
    plant = Plant(ScenarioConfig())
    state = plant.initial_state()
    for _ in range(400):
        state, _ = plant.step(state, np.zeros(plant.n))
    accel = np.concatenate([state.base_prop_acc, state.joint_acc])
    ft = {sole: state.contact_wrenches.get(sole, np.zeros(6))
          for sole in plant.sole_frames}
    est = rnea_torque_feedback(plant.model, state.base_pose(), state.s,
                               np.concatenate([state.base_twist, state.sdot]),
                               accel, ft)
    scale = max(1.0, np.max(np.abs(state.tau)))
    assert np.max(np.abs(est - state.tau)) < 0.02 * scale


def test_rnea_feedback_zero_gravity_static():
    model = parse_model(pendulum_urdf(), gravity=(0.0, 0.0, 0.0))
    est = rnea_torque_feedback(model, Transform(), np.zeros(1),
                               np.zeros(model.nv), np.zeros(model.nv), {})
    assert np.allclose(est, 0.0, atol=1e-12)


def test_torque_pi_feedforward_only():
    cfg = ControlConfig(mode="Feedforward")
    gear = np.array([10.0, 10.0])
    pi = TorquePI(2, cfg, gear, dt=1e-3)
    tau_d = np.array([3.0, -5.0])
    assert np.allclose(pi(tau_d), tau_d / gear)
    assert np.array_equal(pi.integral, np.zeros(2))


def test_torque_pi_zero_error_with_zero_ki():
    cfg = ControlConfig(ki_torque=0.0)
    gear = np.array([10.0])
    pi = TorquePI(1, cfg, gear, dt=1e-3)
    tau_d = np.array([4.0])
    for _ in range(5):
        i = pi(tau_d, tau_feedback=tau_d)
    assert np.allclose(i, tau_d / gear)


def test_torque_pi_proportional_action_and_compensation():
    cfg = ControlConfig(kp_torque=0.5, ki_torque=0.0)
    gear = np.array([10.0])
    pi = TorquePI(1, cfg, gear, dt=1e-3)
    i = pi(np.array([2.0]), tau_feedback=np.array([1.0]),
           tau_f_comp=np.array([0.7]))
    # tau_cmd = 2 + 0.5*(2-1) = 2.5; plus compensation 0.7; current = 3.2/10
    assert np.allclose(i, [0.32])


def test_torque_pi_anti_windup_and_saturation():
    cfg = ControlConfig(integral_limit=4.0, current_limit=10.0)
    gear = np.array([10.0])
    pi = TorquePI(1, cfg, gear, dt=1e-3)
    for _ in range(10_000):
        i = pi(np.array([500.0]), tau_feedback=np.array([0.0]))
    assert abs(pi.integral[0]) <= cfg.integral_limit + 1e-12
    assert abs(i[0]) <= cfg.current_limit
    assert pi.saturation_events > 0
    pi.reset()
    assert np.array_equal(pi.integral, np.zeros(1))


def test_position_pd_law_and_clipping():
    cfg = ControlConfig(mode="PositionControl", kp_pos=900.0, kd_pos=30.0,
                        current_limit=10.0)
    gear = np.array([10.0, 10.0])
    pd = PositionPD(cfg, gear)
    i = pd(np.array([0.1, 0.0]), np.array([0.0, 0.0]), np.array([0.0, 0.5]))
    assert np.allclose(i, [900.0 * 0.1 / 10.0, -30.0 * 0.5 / 10.0])
    i2 = pd(np.array([10.0, 0.0]), np.zeros(2), np.zeros(2))
    assert i2[0] == 10.0
    assert pd.saturation_events == 1


def test_rate_scheduler_firing_pattern():
    sched = RateScheduler(plant_dt=1e-3, low_rate=1000.0, high_rate=100.0)
    fired_high = [sched.due()[0] for _ in range(30)]
    assert fired_high == [k % 10 == 0 for k in range(30)]
    # low rate fires every tick at 1 kHz
    sched2 = RateScheduler(plant_dt=1e-3, low_rate=1000.0, high_rate=100.0)
    assert all(sched2.due()[1] for _ in range(30))


def test_rate_scheduler_validation():
    with pytest.raises(ValueError):
        RateScheduler(plant_dt=1e-3, low_rate=333.0, high_rate=100.0)
    with pytest.raises(ValueError):
        RateScheduler(plant_dt=1e-3, low_rate=1000.0, high_rate=333.0)
    with pytest.raises(ValueError):
        # high-rate period not an integer multiple of the low-rate period
        RateScheduler(plant_dt=1e-3, low_rate=250.0, high_rate=100.0)
