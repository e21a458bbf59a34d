"""Type-dispatched math so model code runs unchanged on three carriers:

- plain numpy arrays (fast prediction),
- hyper-duals (spatial derivatives without a tape),
- tape variables (training, with gradients).
"""

from __future__ import annotations

import numpy as np

from . import hyperdual as hd
from .hyperdual import HyperDual
from .tape import Var


def _dispatch(x, var_method, hd_fn, np_fn):
    if isinstance(x, Var):
        return var_method(x)
    if isinstance(x, HyperDual):
        return hd_fn(x)
    return np_fn(x)


def exp(x):
    return _dispatch(x, Var.exp, hd.exp, np.exp)


def log(x):
    return _dispatch(x, Var.log, hd.log, np.log)


def sin(x):
    return _dispatch(x, Var.sin, hd.sin, np.sin)


def cos(x):
    return _dispatch(x, Var.cos, hd.cos, np.cos)


def tanh(x):
    return _dispatch(x, Var.tanh, hd.tanh, np.tanh)


def sqrt(x):
    return _dispatch(x, Var.sqrt, hd.sqrt, np.sqrt)


def softplus(x):
    return _dispatch(x, Var.softplus, hd.softplus, hd.softplus_value)


def relu(x):
    return _dispatch(x, Var.relu, hd.relu, lambda a: np.maximum(a, 0.0))


def asum(x, axis=None):
    if isinstance(x, Var):
        return x.sum(axis=axis)
    if isinstance(x, HyperDual):
        return hd.hd_sum(x, axis=axis)
    return np.sum(x, axis=axis)


def amean(x, axis=None):
    if isinstance(x, Var):
        return x.mean(axis=axis)
    n = np.prod(np.shape(x.v if isinstance(x, HyperDual) else x)) if axis is None else \
        np.shape(x.v if isinstance(x, HyperDual) else x)[axis]
    return asum(x, axis=axis) * (1.0 / float(n))


def reshape(x, shape):
    if isinstance(x, Var):
        return x.reshape(shape)
    if isinstance(x, HyperDual):
        return hd.hd_reshape(x, shape)
    return np.reshape(x, shape)


def take(x, index, axis=-1):
    if isinstance(x, Var):
        return x.take(index, axis=axis)
    if isinstance(x, HyperDual):
        return hd.hd_take(x, index, axis=axis)
    return np.take(x, index, axis=axis)


def extract(x, slot):
    """Pull one algebra slot out as a plain-valued quantity."""
    if isinstance(x, Var):
        return x.slot(slot)
    if isinstance(x, HyperDual):
        out = getattr(x, slot)
        if np.shape(out) != np.shape(x.v):
            out = np.broadcast_to(out, np.shape(x.v)).copy()
        return out
    return x if slot == "v" else np.zeros_like(np.asarray(x, dtype=float))


def value_of(x):
    """Plain-real view of any carrier (used for guards and reporting)."""
    if isinstance(x, Var):
        return x.hd.v
    if isinstance(x, HyperDual):
        return x.v
    return x
