"""A small dense-network training engine on numpy: forward/backward for
fully connected layers with optional batch normalization and ReLU, Huber
loss, a per-user loss weighting rule, Adam, and finite-difference gradient
checking.

Everything is float64 and batch-major: activations are (batch, features)
arrays.  Networks are plain lists of per-layer parameter dicts so training
code can mutate them in place; all randomness comes from explicit seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, TrainingError
from .numerics import rng_from

DENSE = "dense"
DENSE_BN_RELU = "dense_bn_relu"
LAYER_KINDS = (DENSE, DENSE_BN_RELU)

BN_EPS = 1e-5
BN_MOMENTUM = 0.9

#: Keys updated by the optimizer, in a fixed iteration order.
TRAINABLE_KEYS = ("w", "b", "gain", "shift")


@dataclass(frozen=True)
class LayerSpec:
    """One layer: plain affine, or affine + batchnorm + ReLU."""

    kind: str
    in_dim: int
    out_dim: int

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigError(
                f"layer dims must be >= 1, got {self.in_dim}->{self.out_dim}")


def validate_specs(specs):
    """Check that consecutive layer dimensions chain; return the specs."""
    specs = tuple(specs)
    if not specs:
        raise ConfigError("a network needs at least one layer")
    for a, b in zip(specs, specs[1:]):
        if a.out_dim != b.in_dim:
            raise ConfigError(
                f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")
    return specs


def init_network(specs, seed):
    """He-scaled Gaussian weights, zero biases, identity batchnorm."""
    specs = validate_specs(specs)
    rng = rng_from(seed)
    net = []
    for spec in specs:
        layer = {
            "w": rng.standard_normal((spec.out_dim, spec.in_dim))
            * np.sqrt(2.0 / spec.in_dim),
            "b": np.zeros(spec.out_dim),
        }
        if spec.kind == DENSE_BN_RELU:
            layer["gain"] = np.ones(spec.out_dim)
            layer["shift"] = np.zeros(spec.out_dim)
            layer["run_mean"] = np.zeros(spec.out_dim)
            layer["run_var"] = np.ones(spec.out_dim)
        net.append(layer)
    return net


def parameter_count(net):
    """Number of trainable scalars (weights, biases, batchnorm gain/shift)."""
    return sum(layer[k].size for layer in net
               for k in TRAINABLE_KEYS if k in layer)


def relu(x):
    return np.maximum(x, 0.0)


def forward(net, specs, x, mode="infer", update_stats=True):
    """Run the network; returns the output and per-layer caches for backward.

    Train mode normalizes with batch statistics (batch must be >= 2 when a
    batchnorm layer is present) and, unless ``update_stats`` is off, folds
    them into the running averages.  Infer mode is a deterministic affine
    map using the stored running statistics.
    """
    if mode not in ("train", "infer"):
        raise ConfigError(f"mode must be 'train' or 'infer', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"input must be (batch, features), got {x.shape}")
    if x.shape[1] != specs[0].in_dim:
        raise DimensionError(
            f"input has {x.shape[1]} features, spec wants {specs[0].in_dim}")
    caches = []
    for layer, spec in zip(net, specs):
        z = x @ layer["w"].T + layer["b"]
        if spec.kind == DENSE:
            caches.append({"x": x})
            x = z
            continue
        if mode == "train":
            if z.shape[0] < 2:
                raise ConfigError(
                    "batchnorm in train mode needs a batch of >= 2 samples")
            mu = z.mean(axis=0)
            var = z.var(axis=0)
            if update_stats:
                layer["run_mean"] = (BN_MOMENTUM * layer["run_mean"]
                                     + (1.0 - BN_MOMENTUM) * mu)
                layer["run_var"] = (BN_MOMENTUM * layer["run_var"]
                                    + (1.0 - BN_MOMENTUM) * var)
        else:
            mu = layer["run_mean"]
            var = layer["run_var"]
        sigma = np.sqrt(var + BN_EPS)
        zhat = (z - mu) / sigma
        pre = layer["gain"] * zhat + layer["shift"]
        out = relu(pre)
        caches.append({"x": x, "zhat": zhat, "sigma": sigma,
                       "mask": pre > 0, "mode": mode})
        x = out
    return x, caches


def backward(net, specs, caches, grad_out):
    """Backpropagate; returns (per-layer gradient dicts, input gradient).

    Batchnorm gradients go through the batch statistics, so the caches must
    come from a train-mode forward pass.
    """
    if len(caches) != len(net):
        raise ConfigError("cache does not match the network (stale forward?)")
    g = np.asarray(grad_out, dtype=np.float64)
    grads = [None] * len(net)
    for i in range(len(net) - 1, -1, -1):
        layer, spec, cache = net[i], specs[i], caches[i]
        if spec.kind == DENSE_BN_RELU:
            if cache.get("mode") != "train":
                raise ConfigError("backward needs caches from train mode")
            g = g * cache["mask"]
            zhat, sigma = cache["zhat"], cache["sigma"]
            n = zhat.shape[0]
            dgain = np.sum(g * zhat, axis=0)
            dshift = np.sum(g, axis=0)
            dzhat = g * layer["gain"]
            dz = (n * dzhat - dzhat.sum(axis=0)
                  - zhat * np.sum(dzhat * zhat, axis=0)) / (n * sigma)
            grads[i] = {"w": dz.T @ cache["x"], "b": dz.sum(axis=0),
                        "gain": dgain, "shift": dshift}
            g = dz @ layer["w"]
        else:
            grads[i] = {"w": g.T @ cache["x"], "b": g.sum(axis=0)}
            g = g @ layer["w"]
    return grads, g


def huber_elements(err):
    """Elementwise piecewise loss: quadratic inside |e|<=1, linear outside."""
    a = np.abs(err)
    return np.where(a <= 1.0, 0.5 * err ** 2, a - 0.5)


def huber(pred, target):
    """Mean Huber loss between two equal-shape real arrays."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(
            f"prediction {pred.shape} and target {target.shape} differ")
    return float(np.mean(huber_elements(pred - target)))


def huber_grad(pred, target):
    """Gradient of :func:`huber` with respect to the prediction."""
    err = np.asarray(pred, dtype=np.float64) - np.asarray(target,
                                                          dtype=np.float64)
    return np.clip(err, -1.0, 1.0) / err.size


@dataclass(frozen=True)
class WeightedLossState:
    """Per-user loss weights on the probability simplex."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1 or w.size < 1:
            raise ConfigError("weights must be a nonempty vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ConfigError("weights must be nonnegative and sum to 1")


def uniform_weights(n_users):
    return WeightedLossState(np.full(n_users, 1.0 / n_users))


def weighted_loss(per_user_losses, state):
    """Combine per-user losses with the current weights and reweight.

    Returns the weighted average and a new state whose weights are
    proportional to the losses (renormalized to the simplex), so users with
    larger loss get more attention on the next update.  All-zero losses
    leave the weights untouched.
    """
    losses = np.asarray(per_user_losses, dtype=np.float64)
    if losses.shape != state.weights.shape:
        raise DimensionError(
            f"{losses.shape} losses for {state.weights.shape} weights")
    if np.any(losses < 0):
        raise ConfigError("per-user losses must be >= 0")
    total = float(state.weights @ losses)
    if np.all(losses == 0.0):
        return 0.0, state
    raw = losses / total
    return total, WeightedLossState(raw / raw.sum())


@dataclass
class AdamState:
    """Moment accumulators and hyperparameters for Adam."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def init_adam(net, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
    state = AdamState(learning_rate=learning_rate, beta1=beta1, beta2=beta2,
                      eps=eps)
    for layer in net:
        state.m.append({k: np.zeros_like(layer[k])
                        for k in TRAINABLE_KEYS if k in layer})
        state.v.append({k: np.zeros_like(layer[k])
                        for k in TRAINABLE_KEYS if k in layer})
    return state


def adam_step(net, grads, state):
    """One in-place Adam update with bias correction.

    Raises a training error on non-finite gradients instead of silently
    spreading NaNs through the parameters.
    """
    state.step += 1
    b1c = 1.0 - state.beta1 ** state.step
    b2c = 1.0 - state.beta2 ** state.step
    for layer, grad, m, v in zip(net, grads, state.m, state.v):
        for key in TRAINABLE_KEYS:
            if key not in grad or key not in layer:
                continue
            g = grad[key]
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient for {key!r}")
            m[key] = state.beta1 * m[key] + (1.0 - state.beta1) * g
            v[key] = state.beta2 * v[key] + (1.0 - state.beta2) * g ** 2
            layer[key] = layer[key] - state.learning_rate * (
                m[key] / b1c) / (np.sqrt(v[key] / b2c) + state.eps)
    return net, state


def _flat_params(net):
    for li, layer in enumerate(net):
        for key in TRAINABLE_KEYS:
            if key in layer:
                yield li, key


def grad_check(net, specs, x, target, eps=1e-5):
    """Max relative disagreement between backprop and central differences.

    The loss is the mean Huber distance between the network output and the
    target; batch statistics are used (train mode) but the running averages
    stay frozen so repeated evaluations see the same function.

    The relative error divides by max(|analytic|, |numeric|, 1e-6); the
    floor absorbs the rounding noise of central differences on parameters
    whose true gradient is exactly zero (for example a bias feeding a
    batchnorm, which the mean subtraction cancels).
    """
    out, caches = forward(net, specs, x, mode="train", update_stats=False)
    grads, _ = backward(net, specs, caches, huber_grad(out, target))

    def loss_at():
        out2, _ = forward(net, specs, x, mode="train", update_stats=False)
        return huber(out2, target)

    worst = 0.0
    for li, key in _flat_params(net):
        param = net[li][key]
        analytic = grads[li][key]
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            keep = param[idx]
            param[idx] = keep + eps
            up = loss_at()
            param[idx] = keep - eps
            down = loss_at()
            param[idx] = keep
            numeric = (up - down) / (2.0 * eps)
            a = float(analytic[idx])
            denom = max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, abs(a - numeric) / denom)
    return worst
