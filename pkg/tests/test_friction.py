"""Stribeck-Coulomb-viscous friction model and motor torque maps."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from torquesense.friction import (
    MotorParams,
    ScvParams,
    current_from_desired_torque,
    motor_torque_from_current,
    scv_friction,
    scv_friction_smooth,
)

P = ScvParams(coulomb=1.0, breakaway=2.0, stribeck_vel=0.1, viscous=0.5)


def test_scv_value_oracle():
    # hand-evaluated: (1 + 1*exp(-1))*1 + 0.05 = 1.417879...
    expected = (1.0 + (2.0 - 1.0) * np.exp(-1.0)) + 0.5 * 0.1
    assert np.isclose(scv_friction(P, 0.1), expected, rtol=1e-12)
    assert np.isclose(scv_friction(P, 0.1), 1.41788, atol=5e-6)


def test_scv_zero_and_oddness():
    assert scv_friction(P, 0.0) == 0.0
    vs = np.linspace(-5.0, 5.0, 101)
    assert np.allclose(scv_friction(P, vs), -scv_friction(P, -vs), atol=1e-12)
    assert np.allclose(scv_friction_smooth(P, vs, 0.01),
                       -scv_friction_smooth(P, -vs, 0.01), atol=1e-12)


def test_scv_limits():
    # near zero-plus the level approaches breakaway
    assert np.isclose(scv_friction(P, 1e-9), P.breakaway, atol=1e-6)
    # at high speed the Stribeck term vanishes: coulomb + viscous tail
    v = 50.0
    assert np.isclose(scv_friction(P, v), P.coulomb + P.viscous * v, atol=1e-9)


@given(st.floats(0.001, 20.0))
def test_scv_dissipative(v):
    # friction torque opposes motion: tau_F * v > 0 for v != 0
    assert scv_friction(P, v) * v > 0.0
    assert scv_friction(P, -v) * (-v) > 0.0
    assert scv_friction_smooth(P, v, 0.01) * v > 0.0


def test_scv_monotonic_beyond_dip():
    # past the Stribeck dip the curve increases with velocity
    vs = np.linspace(0.3, 10.0, 200)
    assert np.all(np.diff(scv_friction(P, vs)) > 0.0)


def test_smooth_converges_to_exact():
    vs = np.array([-1.0, -0.2, 0.2, 1.0])
    for eps, tol in ((1e-2, 1e-8), (1e-4, 1e-12)):
        assert np.allclose(scv_friction_smooth(P, vs, eps),
                           scv_friction(P, vs), atol=tol)


def test_scaled_params():
    s = P.scaled(1.3)
    assert s.coulomb == pytest.approx(1.3)
    assert s.breakaway == pytest.approx(2.6)
    assert s.viscous == pytest.approx(0.65)
    assert s.stribeck_vel == P.stribeck_vel  # shape parameter untouched
    vs = np.linspace(-2, 2, 21)
    assert np.allclose(scv_friction(s, vs), 1.3 * scv_friction(P, vs),
                       rtol=1e-12)
    with pytest.raises(ValueError):
        P.scaled(0.0)
    with pytest.raises(ValueError):
        P.scaled(-0.5)


def test_param_validation():
    with pytest.raises(ValueError):
        ScvParams(2.0, 1.0, 0.1, 0.5)  # breakaway below coulomb
    with pytest.raises(ValueError):
        ScvParams(1.0, 2.0, 0.0, 0.5)  # nonpositive stribeck velocity
    with pytest.raises(ValueError):
        ScvParams(1.0, 2.0, 0.1, -0.1)
    with pytest.raises(ValueError):
        MotorParams(k_t=0.0, reduction=100.0)
    with pytest.raises(ValueError):
        MotorParams(k_t=0.1, reduction=0.5)
    with pytest.raises(ValueError):
        MotorParams(k_t=0.1, reduction=100.0, motor_inertia=-1e-6)


def test_motor_torque_map():
    m = MotorParams(k_t=0.1, reduction=100.0)
    assert motor_torque_from_current(m, 1.0) == pytest.approx(10.0)
    assert np.allclose(motor_torque_from_current(m, np.array([0.0, -2.0])),
                       [0.0, -20.0])


@given(st.floats(-50, 50, allow_nan=False), st.floats(-5, 5, allow_nan=False))
def test_current_torque_inverse_consistency(tau, fric):
    m = MotorParams(k_t=0.1, reduction=100.0)
    i = current_from_desired_torque(m, tau, friction_estimate=fric)
    # delivered gear torque minus the friction estimate recovers the demand
    assert abs(motor_torque_from_current(m, i) - fric - tau) < 1e-12 * max(
        1.0, abs(tau))
