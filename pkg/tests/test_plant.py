"""Ground-truth simulator: determinism, sensors, events, contact."""

import numpy as np
import pytest

from torquesense.model import FrameError
from torquesense.plant import (
    Disturbance,
    ObjectEvent,
    Plant,
    ScenarioConfig,
    SimulationDiverged,
)

QUIET_NOISE = {"quantize": False, "current_std": 0.0, "ft_force_std": 0.0,
               "ft_torque_std": 0.0, "imu_acc_std": 0.0, "imu_gyro_std": 0.0}


def make_plant(**kw):
    return Plant(ScenarioConfig(**kw))


def run_steps(plant, n_steps, currents=None):
    state = plant.initial_state()
    cur = np.zeros(plant.n) if currents is None else currents
    bundles = []
    for _ in range(n_steps):
        state, bundle = plant.step(state, cur)
        if bundle is not None:
            bundles.append(bundle)
    return state, bundles


def test_deterministic_repeat_is_bitwise_identical():
    s1, b1 = run_steps(make_plant(seed=3), 200)
    s2, b2 = run_steps(make_plant(seed=3), 200)
    assert np.array_equal(s1.base_pos, s2.base_pos)
    assert np.array_equal(s1.s, s2.s)
    assert np.array_equal(s1.tau, s2.tau)
    for a, b in zip(b1, b2):
        assert np.array_equal(a.joint_pos, b.joint_pos)
        assert np.array_equal(a.currents, b.currents)
        for k in a.ft:
            assert np.array_equal(a.ft[k], b.ft[k])


def test_initial_contact_forces_carry_the_weight():
    plant = make_plant()
    state = plant.initial_state()
    weight = plant.model.total_mass * 9.81
    fz = sum(state.contact_wrenches[f][2] for f in plant.sole_frames)
    assert abs(fz - weight) < 0.005 * weight
    # still true after a short free settling interval
    state, _ = run_steps(plant, 300)
    fz = sum(state.contact_wrenches[f][2] for f in plant.sole_frames)
    assert abs(fz - weight) < 0.005 * weight


def test_sensors_exact_with_noise_off():
    plant = make_plant(noise=QUIET_NOISE)
    state, bundles = run_steps(plant, 10)
    b = bundles[-1]
    assert np.array_equal(b.joint_pos, state.s)
    assert np.array_equal(b.motor_pos, state.motor_pos)
    assert np.array_equal(b.currents, np.zeros(plant.n))
    for sole, ftf in zip(plant.sole_frames, plant.ft_frames):
        assert np.array_equal(b.ft[ftf], state.contact_wrenches[sole])


def test_encoder_quantization_grid():
    plant = make_plant()
    state, bundles = run_steps(plant, 5)
    b = bundles[-1]
    assert np.allclose(b.joint_pos,
                       np.round(state.s / plant.lsb_joint) * plant.lsb_joint)
    assert np.allclose(b.motor_pos,
                       np.round(state.motor_pos / plant.lsb_motor) * plant.lsb_motor)


def test_sensor_noise_statistics():
    plant = make_plant(seed=7)
    state = plant.initial_state()
    n_samp = 100_000
    cur = np.empty((n_samp,))
    acc = np.empty((n_samp,))
    fz = np.empty((n_samp,))
    zero = np.zeros(plant.n)
    for k in range(n_samp):
        b = plant._sample_sensors(state, zero)
        cur[k] = b.currents[0]
        acc[k] = b.imu_acc["waist_imu"][0]
        fz[k] = b.ft["left_foot_ft"][0]
    noise = plant.config.noise
    assert abs(np.std(cur) - noise["current_std"]) < 0.05 * noise["current_std"]
    assert abs(np.std(acc) - noise["imu_acc_std"]) < 0.05 * noise["imu_acc_std"]
    assert abs(np.std(fz) - noise["ft_force_std"]) < 0.05 * noise["ft_force_std"]


def test_event_validation():
    plant = make_plant()
    with pytest.raises(FrameError):
        plant.schedule_disturbance(np.zeros(6), "nonexistent", 1.0, 0.1)
    with pytest.raises(FrameError):
        plant.schedule_object_event("nonexistent", 0.03, "insert", 1.0)
    with pytest.raises(ValueError, match="action"):
        plant.schedule_object_event("left_sole", 0.03, "wiggle", 1.0)
    with pytest.raises(ValueError, match="region"):
        plant.schedule_object_event("left_sole", 0.03, "insert", 1.0,
                                    region="back")
    with pytest.raises(ValueError, match="no object"):
        plant.schedule_object_event("left_sole", 0.0, "remove", 1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        plant.schedule_object_event("left_sole", -0.01, "insert", 1.0)
    with pytest.raises(ValueError, match="positive"):
        ScenarioConfig(step=0.0)


def test_ground_height_profile():
    plant = make_plant()
    plant.schedule_object_event("right_sole", 0.03, "insert", 1.0)
    plant.schedule_object_event("right_sole", 0.03, "remove", 3.0)
    assert plant.ground_height("right_sole", 0.5) == 0.0
    # insertion ramps over the default 0.25 s
    assert plant.ground_height("right_sole", 1.125) == pytest.approx(0.015)
    assert plant.ground_height("right_sole", 2.0) == pytest.approx(0.03)
    # removal is instantaneous
    assert plant.ground_height("right_sole", 3.0) == 0.0
    assert plant.ground_height("left_sole", 2.0) == 0.0


def test_forefoot_region_only_raises_front_corners():
    plant = make_plant()
    plant.schedule_object_event("right_sole", 0.02, "insert", 0.5,
                                region="front")
    assert plant.ground_height("right_sole", 2.0, x_local=0.10) == pytest.approx(0.02)
    assert plant.ground_height("right_sole", 2.0, x_local=-0.06) == 0.0


def test_zero_magnitude_events_do_not_change_trajectory():
    base_state, base_b = run_steps(make_plant(seed=5), 300)

    p1 = make_plant(seed=5)
    p1.schedule_disturbance(np.zeros(6), "torso_push", 0.05, 0.1)
    s1, b1 = run_steps(p1, 300)
    assert np.array_equal(s1.base_pos, base_state.base_pos)
    assert np.array_equal(s1.s, base_state.s)

    p2 = make_plant(seed=5)
    p2.schedule_object_event("right_sole", 0.0, "insert", 0.05)
    s2, _ = run_steps(p2, 300)
    assert np.array_equal(s2.base_pos, base_state.base_pos)
    assert np.array_equal(s2.s, base_state.s)


def test_disturbance_pushes_the_base():
    p = make_plant(seed=5)
    p.schedule_disturbance(np.array([0.0, 60.0, 0.0, 0.0, 0.0, 0.0]),
                           "torso_push", 0.02, 0.2)
    s, _ = run_steps(p, 300)
    base, _ = run_steps(make_plant(seed=5), 300)
    assert s.base_pos[1] > base.base_pos[1] + 1e-4


def test_locked_base_stays_put():
    p = make_plant(lock_base=True)
    state = p.initial_state(base_height=2.0)
    for _ in range(100):
        state, _ = p.step(state, 0.2 * np.ones(p.n))
    assert np.array_equal(state.base_pos, [0.0, 0.0, 2.0])
    assert np.array_equal(state.base_twist, np.zeros(6))
    # joints still move under motor torque
    assert np.any(np.abs(state.motor_vel) > 0.0)


def test_divergence_raises_with_time():
    p = make_plant()
    state = p.initial_state()
    with pytest.raises(SimulationDiverged):
        p.step(state, np.full(p.n, np.nan))


def test_stick_spring_contact_option():
    contact = {"tangential_stiffness": 4000.0}
    p1 = Plant(ScenarioConfig(seed=9, contact=contact))
    p2 = Plant(ScenarioConfig(seed=9, contact=contact))
    s1, _ = run_steps(p1, 200)
    s2, _ = run_steps(p2, 200)
    assert len(s1.contact_anchors) > 0          # feet are stuck to anchors
    assert np.array_equal(s1.base_pos, s2.base_pos)
    assert np.array_equal(s1.s, s2.s)
    keys = {k for k, _ in s1.contact_anchors}
    assert keys <= set(p1.sole_frames)


def test_scenario_config_round_trip_and_hash():
    cfg = ScenarioConfig(
        seed=4, duration=2.0,
        disturbances=[Disturbance(1.0, 0.2, "torso_push", (0, 10, 0))],
        object_events=[ObjectEvent(1.0, "right_sole", 0.03, "insert",
                                   region="front")])
    back = ScenarioConfig.from_dict(cfg.to_dict())
    assert back.config_hash() == cfg.config_hash()
    assert isinstance(back.disturbances[0], Disturbance)
    assert isinstance(back.object_events[0], ObjectEvent)
    other = ScenarioConfig(seed=5, duration=2.0)
    assert other.config_hash() != cfg.config_hash()


def test_partial_config_overrides_merge_with_defaults():
    cfg = ScenarioConfig(noise={"current_std": 0.0},
                         contact={"mu": 0.8})
    assert cfg.noise["current_std"] == 0.0
    assert cfg.noise["joint_encoder_bits"] == 12      # default preserved
    assert cfg.contact["mu"] == 0.8
    assert cfg.contact["stiffness"] == 2.0e4
