"""Motor/gearbox torque maps and the Stribeck-Coulomb-Viscous friction model.

All torques are joint-side N*m.  The friction model is used both as
plant ground truth and as the physics prior for the learned friction
estimator.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MotorParams:
    """Torque constant k_t (N*m/A), reduction ratio R (>=1), motor inertia J_m (kg*m^2)."""
    k_t: float
    reduction: float
    motor_inertia: float = 0.0

    def __post_init__(self):
        if self.k_t <= 0.0:
            raise ValueError(f"torque constant must be positive, got {self.k_t}")
        if self.reduction < 1.0:
            raise ValueError(f"reduction ratio must be >= 1, got {self.reduction}")
        if self.motor_inertia < 0.0:
            raise ValueError(f"motor inertia must be nonnegative, got {self.motor_inertia}")


@dataclass(frozen=True)
class ScvParams:
    """Stribeck-Coulomb-Viscous parameters.

    coulomb: Coulomb level F_c (N*m); breakaway: static level F_s >= F_c;
    stribeck_vel: Stribeck velocity v_s (rad/s); viscous: k_v (N*m*s/rad).
    """
    coulomb: float
    breakaway: float
    stribeck_vel: float
    viscous: float

    def __post_init__(self):
        if self.coulomb < 0.0 or self.breakaway < self.coulomb:
            raise ValueError(
                f"need breakaway >= coulomb >= 0, got F_s={self.breakaway}, F_c={self.coulomb}")
        if self.stribeck_vel <= 0.0:
            raise ValueError(f"Stribeck velocity must be positive, got {self.stribeck_vel}")
        if self.viscous < 0.0:
            raise ValueError(f"viscous coefficient must be nonnegative, got {self.viscous}")

    def scaled(self, factor):
        """Friction parameters with all magnitude levels scaled by `factor`."""
        if factor <= 0.0:
            raise ValueError(f"friction scaling must be positive, got {factor}")
        return ScvParams(self.coulomb * factor, self.breakaway * factor,
                         self.stribeck_vel, self.viscous * factor)


def scv_friction(params, joint_vel):
    """SCV friction torque at the given velocity (odd in velocity, sign(0)=0).

    tau_F = (F_c + (F_s - F_c) * exp(-(v/v_s)^2)) * sign(v) + k_v * v
    """
    v = np.asarray(joint_vel, dtype=float)
    level = params.coulomb + (params.breakaway - params.coulomb) * np.exp(-(v / params.stribeck_vel) ** 2)
    out = level * np.sign(v) + params.viscous * v
    return out if out.ndim else float(out)


def scv_friction_smooth(params, joint_vel, transition_vel):
    """SCV friction with the sign step smoothed to tanh(v/transition_vel).

    Used by fixed-step integrators: the exact sign discontinuity makes
    stuck joints chatter about zero velocity instead of settling.
    Converges to scv_friction as transition_vel -> 0.
    """
    v = np.asarray(joint_vel, dtype=float)
    level = params.coulomb + (params.breakaway - params.coulomb) * np.exp(-(v / params.stribeck_vel) ** 2)
    out = level * np.tanh(v / transition_vel) + params.viscous * v
    return out if out.ndim else float(out)


def motor_torque_from_current(params, current):
    """Joint-side torque delivered through the gearbox, neglecting J_m theta_dd."""
    return params.reduction * params.k_t * np.asarray(current, dtype=float)


def current_from_desired_torque(params, desired_torque, friction_estimate=0.0):
    """Commanded current producing `desired_torque` at the joint after friction."""
    return (np.asarray(desired_torque, dtype=float) + friction_estimate) / (params.reduction * params.k_t)
