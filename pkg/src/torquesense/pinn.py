"""Physics-informed friction estimator.

A small numpy MLP maps motor/joint velocity buffers to a friction
torque.  Training blends a data term against logged friction with a
physics term that pulls predictions toward the closed-form
Stribeck-Coulomb-viscous curve evaluated at the newest motor velocity:

    L = (1 - lam) * mean((pred - true)^2) + lam * mean((pred - scv)^2)

Backprop and Adam are implemented by hand so gradients can be verified
against finite differences.  Hyperparameters (hidden widths, dropout,
lam, buffer length, learning rate, batch size) are random-searched.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .friction import ScvParams, scv_friction


@dataclass
class FrictionSample:
    """One training example: velocity histories plus the friction target."""
    motor: np.ndarray       # motor-side velocity buffer, oldest first, rad/s
    joint: np.ndarray       # joint velocity buffer, oldest first, rad/s
    target: float           # friction torque, N*m

    def __post_init__(self):
        self.motor = np.asarray(self.motor, dtype=float)
        self.joint = np.asarray(self.joint, dtype=float)
        if self.motor.shape != self.joint.shape:
            raise ValueError("motor and joint buffers must have equal length")
        if not np.isfinite(self.target):
            raise ValueError(f"friction target not finite: {self.target}")


class FrictionNet:
    """Two-hidden-layer ReLU MLP with dropout and input normalization."""

    def __init__(self, buffer_len, hidden1, hidden2, dropout, lam, scv,
                 norm_mean=None, norm_std=None, seed=0):
        if not 0.0 <= dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {dropout}")
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"physics weight must lie in [0, 1], got {lam}")
        self.buffer_len = int(buffer_len)
        self.dropout = float(dropout)
        self.lam = float(lam)
        self.scv = scv
        d = 2 * self.buffer_len
        self.norm_mean = np.zeros(d) if norm_mean is None else np.asarray(norm_mean, float)
        self.norm_std = np.ones(d) if norm_std is None else np.asarray(norm_std, float)
        if np.any(self.norm_std <= 0.0):
            raise ValueError("normalization std must be positive")
        rng = np.random.default_rng(seed)
        # He initialization; small random biases keep ReLU preactivations
        # away from the exact kink (important for finite-difference checks)
        self.params = {
            "W1": rng.normal(0.0, np.sqrt(2.0 / d), size=(hidden1, d)),
            "b1": rng.normal(0.0, 0.01, size=hidden1),
            "W2": rng.normal(0.0, np.sqrt(2.0 / hidden1), size=(hidden2, hidden1)),
            "b2": rng.normal(0.0, 0.01, size=hidden2),
            "W3": rng.normal(0.0, np.sqrt(1.0 / hidden2), size=(1, hidden2)),
            "b3": np.zeros(1),
        }

    def features(self, motor, joint):
        """Normalized feature vector(s) from raw velocity buffers."""
        motor = np.atleast_2d(np.asarray(motor, dtype=float))
        joint = np.atleast_2d(np.asarray(joint, dtype=float))
        if motor.shape[1] != self.buffer_len or joint.shape[1] != self.buffer_len:
            raise ValueError(
                f"buffers must have length {self.buffer_len}, "
                f"got {motor.shape[1]} and {joint.shape[1]}")
        X = np.hstack([motor, joint])
        return (X - self.norm_mean) / self.norm_std


def _forward(params, X, masks=None):
    """Forward pass; `masks` are inverted-dropout masks for training."""
    z1 = X @ params["W1"].T + params["b1"]
    h1 = np.maximum(z1, 0.0)
    if masks is not None:
        h1 = h1 * masks[0]
    z2 = h1 @ params["W2"].T + params["b2"]
    h2 = np.maximum(z2, 0.0)
    if masks is not None:
        h2 = h2 * masks[1]
    y = h2 @ params["W3"].T + params["b3"]
    return y[:, 0], (X, z1, h1, z2, h2)


def predict(net, motor, joint):
    """Friction torque prediction(s); dropout disabled (inference mode)."""
    X = net.features(motor, joint)
    y, _ = _forward(net.params, X)
    return y if y.size > 1 else float(y[0])


def predict_bounded(net, motor, joint, margin=1.5):
    """Prediction clipped to the physical friction envelope.

    The friction magnitude can never exceed the breakaway level plus the
    viscous term, so anything outside |F_s + k_v |v|| * margin is
    extrapolation error (the net saw no such regime during training).
    Closed-loop use feeds the net its own consequences, which can push
    the velocity buffers out of distribution; the clip keeps a single
    bad sample from ever injecting a large spurious torque.
    """
    y = predict(net, motor, joint)
    v = np.atleast_2d(np.asarray(motor, dtype=float))[:, -1]
    bound = margin * (net.scv.breakaway + net.scv.viscous * np.abs(v))
    out = np.clip(y, -bound, bound)
    return out if np.ndim(y) else float(out[0])


def physics_targets(net, motor):
    """SCV friction evaluated at the newest motor velocity of each buffer."""
    motor = np.atleast_2d(np.asarray(motor, dtype=float))
    return np.array([scv_friction(net.scv, v) for v in motor[:, -1]])


def _batch_arrays(batch):
    motor = np.stack([s.motor for s in batch])
    joint = np.stack([s.joint for s in batch])
    targets = np.array([s.target for s in batch])
    return motor, joint, targets


def hybrid_loss(net, batch):
    """Blended data/physics loss over a batch of FrictionSamples."""
    if len(batch) == 0:
        raise ValueError("batch must be nonempty")
    motor, joint, targets = _batch_arrays(batch)
    pred = np.atleast_1d(predict(net, motor, joint))
    phys = physics_targets(net, motor)
    data_term = np.mean((pred - targets) ** 2)
    phys_term = np.mean((pred - phys) ** 2)
    return (1.0 - net.lam) * data_term + net.lam * phys_term


def loss_and_grads(net, X, targets, phys, masks=None):
    """Hybrid loss and its gradient w.r.t. every parameter.

    `X` is the normalized feature matrix; `phys` the physics targets.
    """
    p = net.params
    pred, (X, z1, h1, z2, h2) = _forward(p, X, masks)
    n = len(pred)
    r_data = pred - targets
    r_phys = pred - phys
    loss = (1.0 - net.lam) * np.mean(r_data ** 2) + net.lam * np.mean(r_phys ** 2)

    g = 2.0 * ((1.0 - net.lam) * r_data + net.lam * r_phys) / n
    grads = {}
    grads["W3"] = (g @ h2)[None, :]
    grads["b3"] = np.array([g.sum()])
    dh2 = np.outer(g, p["W3"][0])
    if masks is not None:
        dh2 = dh2 * masks[1]
    dz2 = dh2 * (z2 > 0.0)
    grads["W2"] = dz2.T @ h1
    grads["b2"] = dz2.sum(axis=0)
    dh1 = dz2 @ p["W2"]
    if masks is not None:
        dh1 = dh1 * masks[0]
    dz1 = dh1 * (z1 > 0.0)
    grads["W1"] = dz1.T @ X
    grads["b1"] = dz1.sum(axis=0)
    return loss, grads


class AdamState:
    """Adam optimizer state for one FrictionNet."""

    def __init__(self, net, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in net.params.items()}
        self.v = {k: np.zeros_like(v) for k, v in net.params.items()}


def train_step(net, batch, opt, seed=0):
    """One Adam step on a batch; dropout masks drawn from (seed, step).

    Mutates `net.params` and `opt`; returns the pre-step loss.  Raises
    ArithmeticError with the step index if the loss goes non-finite.
    """
    motor, joint, targets = _batch_arrays(batch)
    X = net.features(motor, joint)
    phys = physics_targets(net, motor)
    masks = None
    if net.dropout > 0.0:
        rng = np.random.default_rng((seed, opt.step_count))
        keep = 1.0 - net.dropout
        masks = (rng.random((len(batch), net.params["b1"].size)) < keep) / keep, \
            None
        masks = (masks[0],
                 (rng.random((len(batch), net.params["b2"].size)) < keep) / keep)
    loss, grads = loss_and_grads(net, X, targets, phys, masks)
    if not np.isfinite(loss):
        raise ArithmeticError(f"training diverged at step {opt.step_count}")
    opt.step_count += 1
    b1c = 1.0 - opt.beta1 ** opt.step_count
    b2c = 1.0 - opt.beta2 ** opt.step_count
    for k, gval in grads.items():
        opt.m[k] = opt.beta1 * opt.m[k] + (1.0 - opt.beta1) * gval
        opt.v[k] = opt.beta2 * opt.v[k] + (1.0 - opt.beta2) * gval * gval
        mhat = opt.m[k] / b1c
        vhat = opt.v[k] / b2c
        net.params[k] -= opt.lr * mhat / (np.sqrt(vhat) + opt.eps)
    return float(loss)


def build_samples(t, motor_vel, joint_vel, friction, buffer_len):
    """Slide a length-L window over a log to make FrictionSamples."""
    n = len(t)
    if n < buffer_len:
        raise ValueError(f"log shorter than buffer length {buffer_len}")
    samples = []
    for k in range(buffer_len - 1, n):
        samples.append(FrictionSample(motor_vel[k - buffer_len + 1:k + 1],
                                      joint_vel[k - buffer_len + 1:k + 1],
                                      friction[k]))
    return samples


def fit_normalization(net, samples):
    """Set input normalization from the training set statistics."""
    motor, joint, _ = _batch_arrays(samples)
    X = np.hstack([motor, joint])
    net.norm_mean = X.mean(axis=0)
    std = X.std(axis=0)
    net.norm_std = np.where(std > 1e-8, std, 1.0)


def train(net, samples, epochs=20, batch_size=64, learning_rate=1e-3, seed=0,
          normalize=True):
    """Mini-batch Adam training loop; returns per-epoch mean losses."""
    if normalize:
        fit_normalization(net, samples)
    opt = AdamState(net, learning_rate=learning_rate)
    rng = np.random.default_rng(seed)
    losses = []
    idx = np.arange(len(samples))
    for _ in range(epochs):
        rng.shuffle(idx)
        epoch = []
        for start in range(0, len(idx), batch_size):
            batch = [samples[i] for i in idx[start:start + batch_size]]
            epoch.append(train_step(net, batch, opt, seed=seed))
        losses.append(float(np.mean(epoch)))
    return losses


def validation_mse(net, samples):
    """Plain data MSE on a held-out set (no physics term)."""
    motor, joint, targets = _batch_arrays(samples)
    pred = np.atleast_1d(predict(net, motor, joint))
    return float(np.mean((pred - targets) ** 2))


DEFAULT_SEARCH_SPACE = {
    "hidden1": (8, 64),
    "hidden2": (8, 64),
    "dropout": (0.0, 0.3),
    "lam": (0.0, 0.9),
    "buffer_len": (4, 16),
    "log10_lr": (-3.5, -2.0),
    "batch_size": (32, 128),
}


def random_search(t, motor_vel, joint_vel, friction, scv, budget,
                  space=None, seed=0, epochs=15, val_fraction=0.2):
    """Uniform random hyperparameter search; best by held-out data MSE.

    The split is chronological (last `val_fraction` of the log held
    out) so validation never sees shuffled near-duplicates of training
    windows.  Returns (best net, trial log).
    """
    if budget < 1:
        raise ValueError("search budget must be at least 1")
    space = dict(DEFAULT_SEARCH_SPACE if space is None else space)
    rng = np.random.default_rng(seed)
    split = int(len(t) * (1.0 - val_fraction))
    trials = []
    best = None
    for trial in range(budget):
        hp = {
            "hidden1": int(rng.integers(space["hidden1"][0], space["hidden1"][1] + 1)),
            "hidden2": int(rng.integers(space["hidden2"][0], space["hidden2"][1] + 1)),
            "dropout": float(rng.uniform(*space["dropout"])),
            "lam": float(rng.uniform(*space["lam"])),
            "buffer_len": int(rng.integers(space["buffer_len"][0],
                                           space["buffer_len"][1] + 1)),
            "learning_rate": float(10.0 ** rng.uniform(*space["log10_lr"])),
            "batch_size": int(rng.integers(space["batch_size"][0],
                                           space["batch_size"][1] + 1)),
        }
        net = FrictionNet(hp["buffer_len"], hp["hidden1"], hp["hidden2"],
                          hp["dropout"], hp["lam"], scv, seed=(seed, trial, 1))
        train_samples = build_samples(t[:split], motor_vel[:split],
                                      joint_vel[:split], friction[:split],
                                      hp["buffer_len"])
        val_samples = build_samples(t[split:], motor_vel[split:],
                                    joint_vel[split:], friction[split:],
                                    hp["buffer_len"])
        train(net, train_samples, epochs=epochs, batch_size=hp["batch_size"],
              learning_rate=hp["learning_rate"], seed=trial)
        score = validation_mse(net, val_samples)
        trials.append({"trial": trial, "hyperparams": hp, "val_mse": score})
        if best is None or score < best[0]:
            best = (score, net)
    return best[1], trials


def save_dataset(path, t, motor_vel, joint_vel, friction):
    """Write a friction log as CSV (t, motor-vel, joint-vel, target)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "motor_vel", "joint_vel", "friction_target"])
        for row in zip(t, motor_vel, joint_vel, friction):
            w.writerow([repr(float(x)) for x in row])


def load_dataset(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header != ["t", "motor_vel", "joint_vel", "friction_target"]:
            raise ValueError(f"unexpected dataset header: {header}")
        cols = list(zip(*[[float(x) for x in row] for row in r]))
    return tuple(np.array(c) for c in cols)


def _net_to_dict(net):
    return {
        "buffer_len": net.buffer_len,
        "dropout": net.dropout,
        "lam": net.lam,
        "scv": {"coulomb": net.scv.coulomb, "breakaway": net.scv.breakaway,
                "stribeck_vel": net.scv.stribeck_vel, "viscous": net.scv.viscous},
        "norm_mean": net.norm_mean.tolist(),
        "norm_std": net.norm_std.tolist(),
        "params": {k: v.tolist() for k, v in net.params.items()},
    }


def _net_from_dict(d):
    net = FrictionNet(d["buffer_len"], len(d["params"]["b1"]),
                      len(d["params"]["b2"]), d["dropout"], d["lam"],
                      ScvParams(**d["scv"]),
                      norm_mean=d["norm_mean"], norm_std=d["norm_std"])
    net.params = {k: np.array(v) for k, v in d["params"].items()}
    return net


def save_nets(path, nets):
    """Serialize trained nets keyed by joint name (versioned JSON)."""
    doc = {"schema_version": 1,
           "nets": {name: _net_to_dict(net) for name, net in nets.items()}}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_nets(path):
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return {name: _net_from_dict(d) for name, d in doc["nets"].items()}
