"""Reverse-mode recording over hyper-dual values.

The forward pass runs in the second-order algebra (``hyperdual``), so a
single recording yields a loss built from values and exact spatial
derivatives.  The backward pass then produces exact gradients of that
loss with respect to every registered leaf.

Adjoints are four-slot cotangents, one entry per algebra slot.  For an
elementwise operation with local partial ``p`` (itself a hyper-dual),
the cotangent pulls back through the transpose of multiplication by
``p`` in the algebra; see ``_pullback``.  Local partials are stored
eagerly at record time, so the backward pass never re-evaluates
anything and identical recordings give bitwise-identical gradients.
"""

from __future__ import annotations

import numpy as np

from . import hyperdual as hd
from .hyperdual import HyperDual


class TapeUsageError(RuntimeError):
    pass


_SLOTS = ("v", "d1", "d2", "d12")


class _Node:
    __slots__ = ("op", "parents", "partials", "hd", "meta")

    def __init__(self, op, parents, partials, value, meta=None):
        self.op = op
        self.parents = parents
        self.partials = partials
        self.hd = value
        self.meta = meta


class Var:
    """Handle to one recorded node; supports arithmetic like a scalar."""

    __slots__ = ("tape", "index")

    __array_ufunc__ = None

    def __init__(self, tape, index):
        self.tape = tape
        self.index = index

    @property
    def hd(self):
        return self.tape._nodes[self.index].hd

    @property
    def value(self):
        return self.hd.v

    @property
    def shape(self):
        return np.shape(self.hd.v)

    def __repr__(self):
        return f"Var(#{self.index}, v={self.value!r})"

    # -- arithmetic (constants are not recorded) -----------------------

    def __add__(self, other):
        a, b = self.hd, _hd_of(other)
        return self.tape._record("add", a + b, _pair(self, other), (_ONE, _ONE))

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self.hd, _hd_of(other)
        return self.tape._record("sub", a - b, _pair(self, other), (_ONE, _MINUS_ONE))

    def __rsub__(self, other):
        a, b = _hd_of(other), self.hd
        return self.tape._record("sub", a - b, (None, self), (_ONE, _MINUS_ONE))

    def __mul__(self, other):
        a, b = self.hd, _hd_of(other)
        return self.tape._record("mul", a * b, _pair(self, other), (b, a))

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self.hd, _hd_of(other)
        out = a / b
        return self.tape._record("div", out, _pair(self, other), (1.0 / b, -out / b))

    def __rtruediv__(self, other):
        a, b = _hd_of(other), self.hd
        out = a / b
        return self.tape._record("div", out, (None, self), (1.0 / b, -out / b))

    def __neg__(self):
        return self.tape._record("neg", -self.hd, (self,), (_MINUS_ONE,))

    def __pow__(self, p):
        a = self.hd
        return self.tape._record("pow", a ** p, (self,), (p * a ** (p - 1),))

    # -- elementwise transcendentals ------------------------------------

    def exp(self):
        out = hd.exp(self.hd)
        return self.tape._record("exp", out, (self,), (out,))

    def log(self):
        a = self.hd
        return self.tape._record("log", hd.log(a), (self,), (1.0 / a,))

    def sin(self):
        a = self.hd
        return self.tape._record("sin", hd.sin(a), (self,), (hd.cos(a),))

    def cos(self):
        a = self.hd
        return self.tape._record("cos", hd.cos(a), (self,), (-hd.sin(a),))

    def tanh(self):
        a = self.hd
        t = hd.tanh(a)
        return self.tape._record("tanh", t, (self,), (1.0 - t * t,))

    def sqrt(self):
        a = self.hd
        r = hd.sqrt(a)
        return self.tape._record("sqrt", r, (self,), (0.5 / r,))

    def softplus(self):
        a = self.hd
        return self.tape._record("softplus", hd.softplus(a), (self,), (hd.sigmoid(a),))

    def relu(self):
        a = self.hd
        mask = np.asarray(a.v) > 0.0
        gate = HyperDual(np.where(mask, 1.0, 0.0))
        return self.tape._record("relu", hd.relu(a), (self,), (gate,))

    def sigmoid(self):
        a = self.hd
        s = hd.sigmoid(a)
        return self.tape._record("sigmoid", s, (self,), (s * (1.0 - s),))

    # -- structural ops --------------------------------------------------

    def sum(self, axis=None):
        out = hd.hd_sum(self.hd, axis=axis)
        return self.tape._record("sum", out, (self,), None,
                                 meta={"axis": axis, "pshape": self.shape})

    def mean(self, axis=None):
        n = np.prod(self.shape) if axis is None else self.shape[axis]
        return self.sum(axis=axis) * (1.0 / float(n))

    def reshape(self, shape):
        out = hd.hd_reshape(self.hd, shape)
        return self.tape._record("reshape", out, (self,), None,
                                 meta={"pshape": self.shape})

    def take(self, index, axis=-1):
        out = hd.hd_take(self.hd, index, axis=axis)
        return self.tape._record("take", out, (self,), None,
                                 meta={"axis": axis, "index": index, "pshape": self.shape})

    def slot(self, name):
        """Extract one algebra slot as a new (constant-seeded) variable."""
        if name not in _SLOTS:
            raise ValueError(f"unknown slot {name!r}")
        a = self.hd
        val = getattr(a, name)
        if np.shape(val) != np.shape(a.v):
            val = np.broadcast_to(val, np.shape(a.v)).copy()
        return self.tape._record("extract", HyperDual(val), (self,), None,
                                 meta={"slot": _SLOTS.index(name)})


def _pair(self, other):
    return (self, other) if isinstance(other, Var) else (self, None)


def _hd_of(x):
    if isinstance(x, Var):
        return x.hd
    return hd.lift(x)


_ONE = HyperDual(1.0)
_MINUS_ONE = HyperDual(-1.0)


class Tape:
    """Append-only record of one loss evaluation."""

    def __init__(self):
        self._nodes = []

    def __len__(self):
        return len(self._nodes)

    def leaf(self, value):
        """Register a differentiable input (a real scalar or array)."""
        value = np.asarray(value, dtype=float)
        return self._record("leaf", HyperDual(value), (), ())

    def constant(self, value):
        """Record a value so Var arithmetic can start from it (no gradient)."""
        return self._record("const", hd.lift(value), (), ())

    def _record(self, op, value, parents, partials, meta=None):
        idx = [p.index if isinstance(p, Var) else None for p in parents]
        self._nodes.append(_Node(op, tuple(idx), partials, value, meta))
        return Var(self, len(self._nodes) - 1)

    def concat(self, parts, axis=0):
        """Concatenate a mix of variables and constants along an axis."""
        blocks = [p.hd if isinstance(p, Var) else hd.lift(np.asarray(p, dtype=float))
                  for p in parts]
        out = hd.hd_concat(blocks, axis=axis)
        meta = {"axis": axis,
                "sizes": [np.shape(b.v)[axis] for b in blocks],
                "pshapes": [np.shape(b.v) for b in blocks]}
        parents = tuple(p if isinstance(p, Var) else None for p in parts)
        return self._record("concat", out, parents, None, meta=meta)

    # -- backward ---------------------------------------------------------

    def gradient(self, loss, leaves):
        """Exact d(loss)/d(leaf) for every leaf; unreached leaves get zeros.

        ``loss`` must be a scalar-shaped Var on this tape; the derivative is
        taken of its value slot.
        """
        if not self._nodes:
            raise TapeUsageError("backward requested before any forward recording")
        if not isinstance(loss, Var) or loss.tape is not self:
            raise TapeUsageError("loss does not belong to this tape")
        if np.shape(loss.hd.v) != ():
            raise TapeUsageError(f"loss must be scalar, got shape {np.shape(loss.hd.v)}")

        cot = {}

        def _acc(idx, slot, contrib, shape):
            if _is_zero(contrib):
                return
            entry = cot.get(idx)
            if entry is None:
                entry = [None, None, None, None]
                cot[idx] = entry
            contrib = _unbroadcast(contrib, shape)
            if entry[slot] is None:
                entry[slot] = np.array(contrib, dtype=float, copy=True)
            else:
                entry[slot] = entry[slot] + contrib

        _acc(loss.index, 0, 1.0, ())

        for idx in range(loss.index, -1, -1):
            entry = cot.get(idx)
            if entry is None:
                continue
            node = self._nodes[idx]
            g = [e if e is not None else 0.0 for e in entry]
            if node.op in ("leaf", "const"):
                continue
            if node.partials is not None:
                for pidx, p, pshape in zip(node.parents, node.partials,
                                           self._parent_shapes(node)):
                    if pidx is None:
                        continue
                    gv, g1, g2, g12 = _pullback(p, g)
                    _acc(pidx, 0, gv, pshape)
                    _acc(pidx, 1, g1, pshape)
                    _acc(pidx, 2, g2, pshape)
                    _acc(pidx, 3, g12, pshape)
            else:
                self._backward_structural(node, g, _acc)

        out = []
        for leaf in leaves:
            entry = cot.get(leaf.index)
            shape = np.shape(leaf.hd.v)
            if entry is None or entry[0] is None:
                out.append(np.zeros(shape))
            else:
                out.append(np.broadcast_to(entry[0], shape).astype(float, copy=True))
        return out

    def _parent_shapes(self, node):
        return [None if i is None else np.shape(self._nodes[i].hd.v)
                for i in node.parents]

    def _backward_structural(self, node, g, _acc):
        op, meta = node.op, node.meta
        (pidx,) = node.parents if op != "concat" else (None,)
        if op == "extract":
            # child value = one slot of the parent; adjoint flows from the
            # child's value slot into that parent slot
            _acc(node.parents[0], meta["slot"], g[0], np.shape(self._nodes[node.parents[0]].hd.v))
        elif op == "sum":
            pshape = meta["pshape"]
            axis = meta["axis"]
            for slot in range(4):
                gs = g[slot]
                if _is_zero(gs):
                    continue
                if axis is not None:
                    gs = np.expand_dims(gs, axis)
                _acc(pidx, slot, np.broadcast_to(gs, pshape), pshape)
        elif op == "reshape":
            pshape = meta["pshape"]
            for slot in range(4):
                if _is_zero(g[slot]):
                    continue
                _acc(pidx, slot, np.reshape(g[slot], pshape), pshape)
        elif op == "take":
            pshape = meta["pshape"]
            axis = meta["axis"] % len(pshape)
            sel = [slice(None)] * len(pshape)
            sel[axis] = meta["index"]
            for slot in range(4):
                if _is_zero(g[slot]):
                    continue
                full = np.zeros(pshape)
                full[tuple(sel)] = g[slot]
                _acc(pidx, slot, full, pshape)
        elif op == "concat":
            axis = meta["axis"]
            offsets = np.cumsum([0] + meta["sizes"])
            for k, pidx_k in enumerate(node.parents):
                if pidx_k is None:
                    continue
                pshape = meta["pshapes"][k]
                sel = [slice(None)] * len(pshape)
                sel[axis] = slice(offsets[k], offsets[k + 1])
                for slot in range(4):
                    if _is_zero(g[slot]):
                        continue
                    block = np.broadcast_to(g[slot], np.shape(node.hd.v))[tuple(sel)]
                    _acc(pidx_k, slot, block, pshape)
        else:  # pragma: no cover
            raise TapeUsageError(f"no backward rule for op '{op}'")


def _is_zero(x):
    return np.isscalar(x) and x == 0.0


def _pullback(p, g):
    """Cotangent through multiplication by partial ``p`` in the algebra.

    Transpose of the multiplication operator: with p = (v, d1, d2, d12)
    and incoming cotangent g per slot, the parent receives

        g.v'   = p.v g.v + p.d1 g.d1 + p.d2 g.d2 + p.d12 g.d12
        g.d1'  = p.v g.d1 + p.d2 g.d12
        g.d2'  = p.v g.d2 + p.d1 g.d12
        g.d12' = p.v g.d12
    """
    gv, g1, g2, g12 = g
    out_v = p.v * gv
    if not _is_zero(g1):
        out_v = out_v + p.d1 * g1
    if not _is_zero(g2):
        out_v = out_v + p.d2 * g2
    if not _is_zero(g12):
        out_v = out_v + p.d12 * g12
    out_1 = p.v * g1 if not _is_zero(g1) else 0.0
    if not _is_zero(g12):
        out_1 = out_1 + p.d2 * g12
    out_2 = p.v * g2 if not _is_zero(g2) else 0.0
    if not _is_zero(g12):
        out_2 = out_2 + p.d1 * g12
    out_12 = p.v * g12 if not _is_zero(g12) else 0.0
    return out_v, out_1, out_2, out_12


def _unbroadcast(arr, shape):
    """Reduce an adjoint contribution back to the parent's shape."""
    if np.isscalar(arr):
        if shape == ():
            return arr
        return np.broadcast_to(arr, shape)
    if arr.shape == shape:
        return arr
    extra = arr.ndim - len(shape)
    if extra > 0:
        arr = arr.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (a, s) in enumerate(zip(arr.shape, shape)) if s == 1 and a != 1)
    if axes:
        arr = arr.sum(axis=axes, keepdims=True)
    if shape == () and arr.ndim > 0:
        arr = arr.sum()
    return arr


def loss_gradient(loss, leaves):
    """Module-level convenience wrapper around ``Tape.gradient``."""
    if not isinstance(loss, Var):
        raise TapeUsageError("loss must be a recorded variable")
    return loss.tape.gradient(loss, leaves)
