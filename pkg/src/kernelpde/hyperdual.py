"""Second-order forward-mode arithmetic.

A HyperDual carries a value, two first-derivative slots and one cross
(second-derivative) slot through the truncated Taylor algebra

    a = a.v + a.d1*s1 + a.d2*s2 + a.d12*s1*s2,   s1**2 = s2**2 = 0.

Seeding both slots along the same direction makes ``d12`` the exact
second derivative along that direction.  Every slot may be a float or a
numpy array; all formulas are elementwise, so batched evaluation is just
arithmetic on array slots.
"""

from __future__ import annotations

import numpy as np


class EvaluationError(ArithmeticError):
    """Domain violation during derivative-carrying evaluation."""

    def __init__(self, op, value, detail=""):
        self.op = op
        self.value = value
        msg = f"invalid operand for '{op}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class HyperDual:
    __slots__ = ("v", "d1", "d2", "d12")

    # keep numpy from elementwise-wrapping us; defer to our operators
    __array_ufunc__ = None

    def __init__(self, v, d1=0.0, d2=0.0, d12=0.0):
        self.v = v
        self.d1 = d1
        self.d2 = d2
        self.d12 = d12

    def __repr__(self):
        return f"HyperDual(v={self.v!r}, d1={self.d1!r}, d2={self.d2!r}, d12={self.d12!r})"

    @property
    def shape(self):
        return np.shape(self.v)

    # -- arithmetic -------------------------------------------------------
    # Foreign operand types (e.g. tape variables) get NotImplemented so
    # Python falls back to their reflected operators.

    def __add__(self, other):
        o = _operand(other)
        if o is None:
            return NotImplemented
        return HyperDual(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2, self.d12 + o.d12)

    __radd__ = __add__

    def __sub__(self, other):
        o = _operand(other)
        if o is None:
            return NotImplemented
        return HyperDual(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2, self.d12 - o.d12)

    def __rsub__(self, other):
        o = _operand(other)
        if o is None:
            return NotImplemented
        return o.__sub__(self)

    def __mul__(self, other):
        o = _operand(other)
        if o is None:
            return NotImplemented
        return HyperDual(
            self.v * o.v,
            self.v * o.d1 + self.d1 * o.v,
            self.v * o.d2 + self.d2 * o.v,
            self.v * o.d12 + self.d1 * o.d2 + self.d2 * o.d1 + self.d12 * o.v,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _operand(other)
        if o is None:
            return NotImplemented
        if np.any(o.v == 0.0):
            raise EvaluationError("div", o.v, "zero denominator")
        q = self.v / o.v
        q1 = (self.d1 - q * o.d1) / o.v
        q2 = (self.d2 - q * o.d2) / o.v
        q12 = (self.d12 - q1 * o.d2 - q2 * o.d1 - q * o.d12) / o.v
        return HyperDual(q, q1, q2, q12)

    def __rtruediv__(self, other):
        o = _operand(other)
        if o is None:
            return NotImplemented
        return o.__truediv__(self)

    def __neg__(self):
        return HyperDual(-self.v, -self.d1, -self.d2, -self.d12)

    def __pow__(self, p):
        if isinstance(p, HyperDual):
            # a**b = exp(b*log(a)); only needed for scalar spec coverage
            return exp(self.log() * p)
        if _operand(p) is None:
            return NotImplemented
        return _chain(self, self.v ** p, p * self.v ** (p - 1), p * (p - 1) * self.v ** (p - 2))

    # method forms so generic code can call x.exp() on hyper-duals or
    # tape variables alike
    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sin(self):
        return sin(self)

    def cos(self):
        return cos(self)

    def tanh(self):
        return tanh(self)

    def sqrt(self):
        return sqrt(self)

    def softplus(self):
        return softplus(self)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)


def lift(x, s1=0.0, s2=0.0):
    """Embed a real (or array of reals) into the second-order algebra."""
    if isinstance(x, HyperDual):
        return x
    return HyperDual(x, s1, s2, 0.0)


def _operand(x):
    """Lift known numeric types; None signals an unknown operand."""
    if isinstance(x, HyperDual):
        return x
    if isinstance(x, (int, float, np.ndarray, np.generic)):
        return HyperDual(x)
    return None


def _chain(a, f, df, d2f):
    """Propagate f through the algebra given f(a.v), f'(a.v), f''(a.v)."""
    return HyperDual(
        f,
        df * a.d1,
        df * a.d2,
        df * a.d12 + d2f * a.d1 * a.d2,
    )


def exp(a):
    a = lift(a)
    f = np.exp(a.v)
    return _chain(a, f, f, f)


def log(a):
    a = lift(a)
    if np.any(a.v <= 0.0):
        raise EvaluationError("log", a.v, "requires positive value")
    inv = 1.0 / a.v
    return _chain(a, np.log(a.v), inv, -inv * inv)


def sin(a):
    a = lift(a)
    s, c = np.sin(a.v), np.cos(a.v)
    return _chain(a, s, c, -s)


def cos(a):
    a = lift(a)
    s, c = np.sin(a.v), np.cos(a.v)
    return _chain(a, c, -s, -c)


def tanh(a):
    a = lift(a)
    t = np.tanh(a.v)
    sech2 = 1.0 - t * t
    return _chain(a, t, sech2, -2.0 * t * sech2)


def sqrt(a):
    a = lift(a)
    if np.any(a.v <= 0.0):
        raise EvaluationError("sqrt", a.v, "requires positive value")
    r = np.sqrt(a.v)
    return _chain(a, r, 0.5 / r, -0.25 / (r * a.v))


def softplus_value(z):
    """Overflow-safe log(1 + exp(z)) on plain reals."""
    z = np.asarray(z) if not np.isscalar(z) else z
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


def sigmoid_value(z):
    t = np.exp(-np.abs(z))
    return np.where(np.asarray(z) >= 0.0, 1.0 / (1.0 + t), t / (1.0 + t))


def softplus(a):
    if not isinstance(a, HyperDual):
        return softplus_value(a)
    s = sigmoid_value(a.v)
    return _chain(a, softplus_value(a.v), s, s * (1.0 - s))


def sigmoid(a):
    if not isinstance(a, HyperDual):
        return sigmoid_value(a)
    s = sigmoid_value(a.v)
    ds = s * (1.0 - s)
    return _chain(a, s, ds, ds * (1.0 - 2.0 * s))


def relu(a):
    if not isinstance(a, HyperDual):
        return np.maximum(a, 0.0)
    mask = np.asarray(a.v) > 0.0
    # piecewise linear: slope passes through, curvature contributes nothing
    return HyperDual(
        np.maximum(a.v, 0.0),
        np.where(mask, a.d1, 0.0),
        np.where(mask, a.d2, 0.0),
        np.where(mask, a.d12, 0.0),
    )


_OPS = {
    "add": lambda a, b: lift(a) + b,
    "sub": lambda a, b: lift(a) - b,
    "mul": lambda a, b: lift(a) * b,
    "div": lambda a, b: lift(a) / b,
    "neg": lambda a: -lift(a),
    "exp": exp,
    "log": log,
    "sin": sin,
    "cos": cos,
    "tanh": tanh,
    "sqrt": sqrt,
    "pow": lambda a, p: lift(a) ** p,
    "softplus": softplus,
    "relu": relu,
}


def apply(op, *args):
    """Apply a named primitive to hyper-dual (or liftable) arguments."""
    try:
        fn = _OPS[op]
    except KeyError:
        raise ValueError(f"unknown operation '{op}'; choose from {sorted(_OPS)}") from None
    return fn(*args)


# structural helpers used by batched model evaluation ----------------------

def _full(slot, shape):
    return np.broadcast_to(slot, shape) if np.shape(slot) != shape else slot


def hd_map(fn, a, *args, **kw):
    """Apply a numpy structural function to every slot of a hyper-dual."""
    shape = np.shape(a.v)
    return HyperDual(
        fn(a.v, *args, **kw),
        fn(_full(a.d1, shape), *args, **kw),
        fn(_full(a.d2, shape), *args, **kw),
        fn(_full(a.d12, shape), *args, **kw),
    )


def hd_sum(a, axis=None):
    return hd_map(np.sum, a, axis=axis)


def hd_reshape(a, shape):
    return hd_map(np.reshape, a, shape)


def hd_take(a, index, axis=-1):
    return hd_map(np.take, a, index, axis=axis)


def hd_concat(parts, axis=0):
    parts = [lift(p) for p in parts]
    shapes = [np.shape(p.v) for p in parts]
    return HyperDual(
        np.concatenate([p.v for p in parts], axis=axis),
        np.concatenate([_full(p.d1, s) for p, s in zip(parts, shapes)], axis=axis),
        np.concatenate([_full(p.d2, s) for p, s in zip(parts, shapes)], axis=axis),
        np.concatenate([_full(p.d12, s) for p, s in zip(parts, shapes)], axis=axis),
    )


def seeded_points(x, axis):
    """Lift sample points (m, d), seeding both slots along one coordinate.

    With equal seeds the d12 slot of any downstream result is the exact
    second derivative along ``axis``.
    """
    x = np.asarray(x, dtype=float)
    seed = np.zeros_like(x)
    seed[..., axis] = 1.0
    return HyperDual(x, seed, seed.copy(), np.zeros_like(x))
