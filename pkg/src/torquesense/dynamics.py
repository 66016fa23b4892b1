"""Floating-base rigid-body dynamics: kinematics, RNEA, CRBA, forward dynamics.

Generalized coordinates are (base pose, joint positions s); generalized
velocity is nu = [base twist in the base frame (6), sdot (n)].  All
accelerations are *proper* accelerations: the base rows of a generalized
acceleration vector are the base spatial acceleration minus the gravity
column [R_B^T g, 0].  With this convention gravity never appears inside
the recursions; a body at rest has base proper acceleration
[-R_B^T g, 0] and a body in free fall has proper acceleration zero.
"""

import numpy as np

from .model import FrameError
from .spatial import (Transform, cross3, cross_force, cross_motion,
                      rotation_about_axis, transform_force, transform_motion,
                      transform_motion_inv)


class DynamicsTerms:
    """Mass matrix, bias vector, contact Jacobians and selection matrix.

    `bias` is the full bias vector (Coriolis, centrifugal and gravity)
    of the coordinate-acceleration form: M [accel] + bias = B tau + J^T f
    with accel = proper acceleration + [R^T g, 0] on the base rows.
    At zero velocity `bias` equals the generalized gravity force.
    """

    __slots__ = ("M", "bias", "jacobians", "selection")

    def __init__(self, M, bias, jacobians, selection):
        self.M = M
        self.bias = bias
        self.jacobians = jacobians
        self.selection = selection


def _static_proper_accel(model, base_pose):
    a = np.zeros(model.nv)
    a[:3] = -base_pose.R.T @ model.gravity
    return a


def joint_transforms(model, s):
    """Per-link transforms parent<-link for joint configuration s."""
    Xs = [model.links[0].origin]
    for link in model.links[1:]:
        if link.joint_type == "revolute":
            Rj = rotation_about_axis(link.axis, s[link.dof])
            Xs.append(Transform(link.origin.R @ Rj, link.origin.p))
        else:
            Xs.append(link.origin)
    return Xs

def forward_kinematics(model, base_pose, s, Xs=None):
    """World transform of every link, in link-index order."""
    if Xs is None:
        Xs = joint_transforms(model, s)
    world = [base_pose]
    for link in model.links[1:]:
        world.append(world[link.parent] * Xs[link.index])
    return world


def frame_transform(model, base_pose, s, frame_name):
    """World transform of a named frame (sensor frame or link frame)."""
    idx, offset = model.frame(frame_name)
    return forward_kinematics(model, base_pose, s)[idx] * offset


def generalized_rnea(model, base_pose, s, nu, accel, contact_wrenches=(), Xs=None):
    """Inverse dynamics over the full generalized force vector.

    Returns the (6+n,) vector [base wrench (base frame), joint torques]
    required to realize the given proper acceleration under the given
    contact wrenches.  `contact_wrenches` is a list of (frame_name,
    wrench) with the wrench expressed in the contact frame.
    """
    n_links = len(model.links)
    if Xs is None:
        Xs = joint_transforms(model, s)

    fext = [None] * n_links
    for frame_name, wrench in contact_wrenches:
        idx, offset = model.frame(frame_name)
        w = transform_force(offset, np.asarray(wrench, dtype=float))
        fext[idx] = w if fext[idx] is None else fext[idx] + w

    v = [None] * n_links
    a = [None] * n_links
    f = [None] * n_links
    v[0] = np.asarray(nu[:6], dtype=float)
    a[0] = np.asarray(accel[:6], dtype=float)
    inertias = model._spatial_inertias
    f[0] = inertias[0] @ a[0] + cross_force(v[0], inertias[0] @ v[0])
    if fext[0] is not None:
        f[0] = f[0] - fext[0]

    for link in model.links[1:]:
        i = link.index
        vi = transform_motion_inv(Xs[i], v[link.parent])
        ai = transform_motion_inv(Xs[i], a[link.parent])
        if link.joint_type == "revolute":
            w = link.axis * nu[6 + link.dof]
            vi[3:] += w
            ai[3:] += link.axis * accel[6 + link.dof]
            # cross_motion(vi, [0, w]) exploiting the zero linear part
            ai[:3] += cross3(vi[:3], w)
            ai[3:] += cross3(vi[3:], w)
        v[i] = vi
        a[i] = ai
        fi = inertias[i] @ ai + cross_force(vi, inertias[i] @ vi)
        if fext[i] is not None:
            fi = fi - fext[i]
        f[i] = fi

    out = np.zeros(model.nv)
    for link in reversed(model.links[1:]):
        i = link.index
        if link.joint_type == "revolute":
            out[6 + link.dof] = link.axis @ f[i][3:]
        f[link.parent] = f[link.parent] + transform_force(Xs[i], f[i])
    out[:6] = f[0]
    return out


def rnea(model, base_pose, s, nu, accel, contact_wrenches=()):
    """Joint torques realizing the given proper acceleration (RNEA)."""
    return generalized_rnea(model, base_pose, s, nu, accel, contact_wrenches)[6:]


def crba(model, s, Xs=None):
    """Joint-space mass matrix via the composite-rigid-body algorithm.

    The matrix is expressed in body coordinates [base twist, sdot] and
    therefore depends only on the joint configuration.
    """
    n_links = len(model.links)
    nv = model.nv
    if Xs is None:
        Xs = joint_transforms(model, s)
    # motion transform of the inverse is the transpose of the force transform
    Xf = [X.force_matrix() for X in Xs]

    Ic = [I.copy() for I in model._spatial_inertias]
    for link in reversed(model.links[1:]):
        Xfi = Xf[link.index]
        Ic[link.parent] += Xfi @ Ic[link.index] @ Xfi.T

    M = np.zeros((nv, nv))
    M[:6, :6] = Ic[0]
    for link in model.links[1:]:
        if link.joint_type != "revolute":
            continue
        j = link.dof
        F = Ic[link.index][:, 3:] @ link.axis
        M[6 + j, 6 + j] = link.axis @ F[3:]
        i = link.index
        while model.links[i].parent >= 0:
            F = Xf[i] @ F
            i = model.links[i].parent
            li = model.links[i]
            if li.joint_type == "revolute":
                M[6 + li.dof, 6 + j] = li.axis @ F[3:]
                M[6 + j, 6 + li.dof] = M[6 + li.dof, 6 + j]
        M[:6, 6 + j] = F
        M[6 + j, :6] = F
    return M


def link_states(model, base_pose, s, nu, Xs=None):
    """World transform and body-frame spatial velocity of every link."""
    if Xs is None:
        Xs = joint_transforms(model, s)
    world = forward_kinematics(model, base_pose, s, Xs=Xs)
    vels = [np.asarray(nu[:6], dtype=float)]
    for link in model.links[1:]:
        vp = transform_motion_inv(Xs[link.index], vels[link.parent])
        if link.joint_type == "revolute":
            vp[3:] += link.axis * nu[6 + link.dof]
        vels.append(vp)
    return world, vels


def frame_jacobian(model, base_pose, s, frame_name, world=None):
    """6x(6+n) Jacobian mapping nu to the frame velocity in frame coordinates."""
    idx, offset = model.frame(frame_name)
    if world is None:
        world = forward_kinematics(model, base_pose, s)
    H_frame = world[idx] * offset

    J = np.zeros((6, model.nv))
    H_fb = H_frame.inverse() * base_pose
    J[:, :6] = H_fb.motion_matrix()
    i = idx
    while i > 0:
        link = model.links[i]
        if link.joint_type == "revolute":
            S = np.concatenate([np.zeros(3), link.axis])
            H_fl = H_frame.inverse() * world[i]
            J[:, 6 + link.dof] = transform_motion(H_fl, S)
        i = link.parent
    return J


def compute_dynamics_terms(model, base_pose, s, nu, contact_frames=()):
    """Mass matrix, full bias vector and contact Jacobians at the given state."""
    M = crba(model, s)
    bias = generalized_rnea(model, base_pose, s, nu, _static_proper_accel(model, base_pose))
    jacobians = {name: frame_jacobian(model, base_pose, s, name) for name in contact_frames}
    selection = np.zeros((model.nv, model.ndof))
    selection[6:, :] = np.eye(model.ndof)
    return DynamicsTerms(M, bias, jacobians, selection)


def coriolis_bias(model, base_pose, s, nu, contact_wrenches=(), Xs=None):
    """Generalized Coriolis/centrifugal bias minus contact forces.

    This is the bias of the proper-acceleration form (gravity lives in
    the proper acceleration, not here): M a_prop + coriolis = B tau + J^T f
    rearranged as M a_prop = B tau - coriolis_bias(...).
    """
    return generalized_rnea(model, base_pose, s, nu, np.zeros(model.nv), contact_wrenches, Xs=Xs)


def forward_dynamics(model, base_pose, s, nu, tau, contact_wrenches=(), Xs=None):
    """Generalized proper acceleration given joint torques and contact wrenches."""
    if Xs is None:
        Xs = joint_transforms(model, s)
    M = crba(model, s, Xs=Xs)
    c = coriolis_bias(model, base_pose, s, nu, contact_wrenches, Xs=Xs)
    rhs = -c
    rhs[6:] += tau
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(f"mass matrix solve failed: {exc}") from None


def com_position(model, base_pose, s):
    """World center of mass."""
    world = forward_kinematics(model, base_pose, s)
    com = np.zeros(3)
    for link, H in zip(model.links, world):
        com += link.mass * H.apply(link.com)
    return com / model.total_mass


def com_velocity(model, base_pose, s, nu):
    """World center-of-mass velocity."""
    world = forward_kinematics(model, base_pose, s)
    # link spatial velocities in link frames
    Xs = joint_transforms(model, s)
    v = [np.asarray(nu[:6], dtype=float)]
    for link in model.links[1:]:
        vp = transform_motion_inv(Xs[link.index], v[link.parent])
        if link.joint_type == "revolute":
            vp[3:] += link.axis * nu[6 + link.dof]
        v.append(vp)
    vel = np.zeros(3)
    for link, H, vi in zip(model.links, world, v):
        v_com_local = vi[:3] + cross3(vi[3:], link.com)
        vel += link.mass * (H.R @ v_com_local)
    return vel / model.total_mass


def mechanical_energy(model, base_pose, s, nu):
    """Total kinetic plus gravitational potential energy."""
    world = forward_kinematics(model, base_pose, s)
    Xs = joint_transforms(model, s)
    v = [np.asarray(nu[:6], dtype=float)]
    for link in model.links[1:]:
        vp = transform_motion_inv(Xs[link.index], v[link.parent])
        if link.joint_type == "revolute":
            vp[3:] += link.axis * nu[6 + link.dof]
        v.append(vp)
    kinetic = 0.0
    potential = 0.0
    for link, H, vi, I in zip(model.links, world, v, model._spatial_inertias):
        kinetic += 0.5 * vi @ (I @ vi)
        potential -= link.mass * model.gravity @ H.apply(link.com)
    return kinetic + potential
