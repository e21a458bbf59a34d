"""Kernel zoo: Gaussian bump, softplus hat, ReLU hat, and a small MLP.

Every kernel consumes the scaled offsets produced by the node layer,
``y_k = (x_k - X_k) / h``, and is evaluable over plain reals,
hyper-duals, and tape variables alike (see ``ops``).
"""

from __future__ import annotations

import math

import numpy as np

from . import ops
from .hyperdual import softplus_value

LOG2 = math.log(2.0)
RHO1 = softplus_value(1.0)  # softplus(1), the hat normalizer

MLP_LAYERS = ((1, 5), (5, 5), (5, 1))
MLP_EPS = 1e-6  # radius regularizer; keeps sqrt off its kink at node centers


class Gaussian:
    """exp(-q) on the squared scaled distance q (no square root taken)."""

    name = "gaussian"

    def weights(self):
        return {}


class SoftplusHat:
    """Smooth, almost-compact bump built from softplus compositions."""

    name = "softplus-hat"

    def weights(self):
        return {}


class ReluHat:
    """Piecewise-linear unit hat, tensorized over coordinates."""

    name = "relu-hat"

    def weights(self):
        return {}


class Mlp:
    """Shared 1->5->5->1 tanh network applied to the scaled radius."""

    name = "mlp"

    def __init__(self, params=None, rng=None):
        if params is None:
            if rng is None:
                raise ValueError("Mlp kernel needs either explicit params or an rng")
            params = mlp_init(rng)
        self.params = params

    def weights(self):
        return dict(self.params)


def kernel_from_name(name, rng=None):
    table = {
        "gaussian": Gaussian,
        "softplus-hat": SoftplusHat,
        "relu-hat": ReluHat,
    }
    if name == "mlp":
        return Mlp(rng=rng)
    if name in table:
        return table[name]()
    raise ValueError(f"unknown kernel '{name}'; choose from "
                     f"{sorted(list(table) + ['mlp'])}")


# -- individual kernels -----------------------------------------------------

def gaussian(q):
    """Bump value from the squared scaled distance (q >= 0 at its value)."""
    return ops.exp(-q)


def softplus(z):
    """log(1 + exp(z)), overflow-safe for large |z|."""
    return ops.softplus(z)


def softplus_hat(y, axis=-1):
    """Smooth hat over scaled coordinates; equals 1 at the origin.

    ``y`` holds d coordinates along ``axis``; the hat is
    softplus(1 + 2d log 2 - sum_k(softplus(y_k) + softplus(-y_k))) / softplus(1).
    """
    d = np.shape(ops.value_of(y))[axis]
    s = ops.asum(softplus(y) + softplus(-y), axis=axis)
    return softplus((1.0 + 2.0 * d * LOG2) - s) * (1.0 / RHO1)


def softplus_hat_as_network(y):
    """The same hat written as its explicit two-layer network.

    Layer 1: per coordinate, weights (+1, -1), bias 0, softplus.
    Layer 2: one neuron, all weights -1, bias 1 + 2d log 2, softplus.
    Output scaled by 1/softplus(1).  Must match ``softplus_hat`` exactly.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    d = y.shape[-1]
    w1 = np.zeros((d, 2 * d))
    for k in range(d):
        w1[k, 2 * k] = 1.0
        w1[k, 2 * k + 1] = -1.0
    hidden = softplus_value(y @ w1)
    w2 = -np.ones(2 * d)
    z = hidden @ w2 + (1.0 + 2.0 * d * LOG2)
    return softplus_value(z) / RHO1


def relu_hat(x, xm, xc, xp):
    """Piecewise-linear hat on knots xm < xc < xp via three ReLUs."""
    if not (xm < xc < xp):
        raise ValueError(f"hat knots must increase strictly: {xm}, {xc}, {xp}")
    hm = xc - xm
    hp = xp - xc
    return (ops.relu(x - xm) * (1.0 / hm)
            - ops.relu(x - xc) * (1.0 / hm + 1.0 / hp)
            + ops.relu(x - xp) * (1.0 / hp))


def unit_hat(y):
    """Unit-width hat on a scaled coordinate: peak 1 at 0, support [-1, 1]."""
    return ops.relu(y + 1.0) - ops.relu(y) * 2.0 + ops.relu(y - 1.0)


def mlp_init(rng):
    """Uniform +-1/sqrt(fan_in) weights and biases from the run seed."""
    params = {}
    for i, (fan_in, fan_out) in enumerate(MLP_LAYERS, start=1):
        bound = 1.0 / math.sqrt(fan_in)
        params[f"mlp_w{i}"] = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        params[f"mlp_b{i}"] = rng.uniform(-bound, bound, size=(fan_out,))
    return params


def mlp_kernel(r, params):
    """Feed the scaled radius through the shared tanh network.

    ``r`` has any shape; weights may be arrays or tape variables.  Matrix
    products are written as broadcast multiply + sum so every carrier
    type works.
    """
    a = ops.reshape(r, np.shape(ops.value_of(r)) + (1,))
    n_layers = len(MLP_LAYERS)
    for i in range(1, n_layers + 1):
        w = params[f"mlp_w{i}"]
        b = params[f"mlp_b{i}"]
        fan_in, fan_out = MLP_LAYERS[i - 1]
        a_exp = ops.reshape(a, np.shape(ops.value_of(a)) + (1,))
        w_shaped = ops.reshape(w, (1,) * (len(np.shape(ops.value_of(r)))) + (fan_in, fan_out))
        z = ops.asum(a_exp * w_shaped, axis=-2) + b
        a = ops.tanh(z) if i < n_layers else z
    return ops.take(a, 0, axis=-1)


def kernel_phi(kernel, y, weights=None):
    """Evaluate a kernel on scaled offsets ``y`` of shape (..., d).

    ``weights`` substitutes the kernel's trainable parameters (tape
    variables during training); ``None`` uses the stored arrays.
    """
    d = np.shape(ops.value_of(y))[-1]
    if isinstance(kernel, Gaussian):
        q = ops.asum(y * y, axis=-1)
        return gaussian(q)
    if isinstance(kernel, SoftplusHat):
        return softplus_hat(y, axis=-1)
    if isinstance(kernel, ReluHat):
        phi = unit_hat(ops.take(y, 0, axis=-1))
        for k in range(1, d):
            phi = phi * unit_hat(ops.take(y, k, axis=-1))
        return phi
    if isinstance(kernel, Mlp):
        q = ops.asum(y * y, axis=-1)
        r = ops.sqrt(q + MLP_EPS ** 2)
        return mlp_kernel(r, weights if weights is not None else kernel.params)
    raise TypeError(f"unsupported kernel {kernel!r}")
