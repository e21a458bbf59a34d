"""Trainable ansatz: kernel expansions over fixed/free nodes, plus the
Fourier variant.

A model evaluates over three carriers (arrays, hyper-duals, tape
variables); the value slot of a hyper-dual evaluation reproduces the
plain evaluation bit for bit because both paths run the same numpy
expressions.
"""

from __future__ import annotations

import json

import numpy as np

from . import ops
from .geometry import GeometryError
from .hyperdual import EvaluationError, HyperDual, seeded_points
from .kernels import Mlp, kernel_from_name, kernel_phi

H_MIN = 1e-3       # kernel width floor, enforced by projection
POU_DELTA = 1e-30  # smallest admissible partition-of-unity denominator


def _expand(x, axis):
    if isinstance(x, HyperDual):
        from .hyperdual import hd_map
        return hd_map(np.expand_dims, x, axis)
    return np.expand_dims(x, axis)


class ModelParams:
    """Node positions, widths, and weights of the kernel expansion.

    Fixed nodes keep their positions; their widths and weights still
    train.  ``variant`` selects the plain sum or the normalized
    (partition-of-unity) form.
    """

    def __init__(self, fixed_X, free_X, h, U, kernel, variant="plain"):
        self.fixed_X = np.atleast_2d(np.asarray(fixed_X, dtype=float))
        self.free_X = np.atleast_2d(np.asarray(free_X, dtype=float))
        if self.fixed_X.size == 0:
            self.fixed_X = np.zeros((0, self.free_X.shape[1]))
        self.h = np.asarray(h, dtype=float)
        self.U = np.asarray(U, dtype=float)
        self.kernel = kernel
        if variant not in ("plain", "pou"):
            raise ValueError(f"unknown variant '{variant}'")
        self.variant = variant
        n = len(self.fixed_X) + len(self.free_X)
        if not (len(self.h) == len(self.U) == n):
            raise ValueError(
                f"inconsistent node counts: {len(self.fixed_X)} fixed + "
                f"{len(self.free_X)} free vs {len(self.h)} widths, {len(self.U)} weights")

    @property
    def n_nodes(self):
        return len(self.h)

    @property
    def dim(self):
        return self.free_X.shape[1] if self.free_X.size else self.fixed_X.shape[1]

    # -- trainable state -------------------------------------------------

    def parameters(self):
        out = {"free_X": self.free_X, "h": self.h, "U": self.U}
        out.update(self.kernel.weights())
        return out

    def set_parameters(self, params):
        self.free_X = np.asarray(params["free_X"], dtype=float)
        self.h = np.asarray(params["h"], dtype=float)
        self.U = np.asarray(params["U"], dtype=float)
        if isinstance(self.kernel, Mlp):
            for key in self.kernel.params:
                self.kernel.params[key] = np.asarray(params[key], dtype=float)

    def project(self):
        """Clamp widths to the floor after an optimizer step."""
        np.maximum(self.h, H_MIN, out=self.h)

    def bind(self, tape):
        """Register every trainable array as a tape leaf."""
        return {name: tape.leaf(value) for name, value in self.parameters().items()}

    def copy(self):
        kernel = Mlp({k: v.copy() for k, v in self.kernel.params.items()}) \
            if isinstance(self.kernel, Mlp) else self.kernel
        return ModelParams(self.fixed_X.copy(), self.free_X.copy(),
                           self.h.copy(), self.U.copy(), kernel, self.variant)

    # -- evaluation --------------------------------------------------------

    def evaluate(self, x, bound=None):
        """u at points ``x`` of shape (m, d); any carrier type."""
        if bound is None:
            X = np.concatenate([self.fixed_X, self.free_X], axis=0)
            h = self.h
            U = self.U
            weights = None
        else:
            free = bound["free_X"]
            X = free.tape.concat([self.fixed_X, free], axis=0) \
                if self.fixed_X.size else free
            h = bound["h"]
            U = bound["U"]
            weights = {k: bound[k] for k in self.kernel.weights()}
        n, d = self.n_nodes, self.dim

        xe = _expand(x, 1)                                   # (m, 1, d)
        offsets = xe - ops.reshape(X, (1, n, d))             # (m, n, d)
        y = offsets / ops.reshape(h, (1, n, 1))
        phi = kernel_phi(self.kernel, y, weights=weights)    # (m, n)
        num = ops.asum(ops.reshape(U, (1, n)) * phi, axis=1)
        if self.variant == "plain":
            return num
        den = ops.asum(phi, axis=1)
        dv = np.asarray(ops.value_of(den))
        if np.any(dv <= POU_DELTA):
            bad = np.atleast_2d(ops.value_of(x))[np.argmin(dv)]
            raise EvaluationError("pou", bad,
                                  "all kernels vanished at this point")
        return num / den

    # -- serialization ------------------------------------------------------

    def to_json_dict(self):
        out = {
            "variant": self.variant,
            "kernel": {"name": self.kernel.name,
                       "params": {k: v.tolist() for k, v in self.kernel.weights().items()}},
            "fixed_X": self.fixed_X.tolist(),
            "free_X": self.free_X.tolist(),
            "h": self.h.tolist(),
            "U": self.U.tolist(),
        }
        return out

    @classmethod
    def from_json_dict(cls, doc):
        kname = doc["kernel"]["name"]
        if kname == "mlp":
            kernel = Mlp({k: np.asarray(v, dtype=float)
                          for k, v in doc["kernel"]["params"].items()})
        else:
            kernel = kernel_from_name(kname)
        return cls(np.asarray(doc["fixed_X"], dtype=float),
                   np.asarray(doc["free_X"], dtype=float),
                   np.asarray(doc["h"], dtype=float),
                   np.asarray(doc["U"], dtype=float),
                   kernel, doc["variant"])

    def save(self, path, extra=None):
        doc = self.to_json_dict()
        if extra:
            doc.update(extra)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


class FourierModel:
    """Truncated trigonometric series on an interval; coefficients train,
    frequencies stay fixed at multiples of the base frequency."""

    def __init__(self, a0, a, b, lo, hi):
        self.a0 = np.asarray(a0, dtype=float)
        self.a = np.asarray(a, dtype=float)
        self.b = np.asarray(b, dtype=float)
        if self.a.shape != self.b.shape or self.a.size < 1:
            raise ValueError("need matching cosine/sine coefficients, at least one mode")
        if not hi > lo:
            raise ValueError(f"bad interval [{lo}, {hi}]")
        self.lo = float(lo)
        self.hi = float(hi)

    @classmethod
    def zeros(cls, n_modes, lo=0.0, hi=1.0):
        return cls(0.0, np.zeros(n_modes), np.zeros(n_modes), lo, hi)

    @property
    def omega(self):
        return 2.0 * np.pi / (self.hi - self.lo)

    @property
    def n_modes(self):
        return self.a.size

    @property
    def dim(self):
        return 1

    def parameters(self):
        return {"a0": self.a0, "a": self.a, "b": self.b}

    def set_parameters(self, params):
        self.a0 = np.asarray(params["a0"], dtype=float)
        self.a = np.asarray(params["a"], dtype=float)
        self.b = np.asarray(params["b"], dtype=float)

    def project(self):
        pass

    def bind(self, tape):
        return {name: tape.leaf(value) for name, value in self.parameters().items()}

    def copy(self):
        return FourierModel(self.a0.copy(), self.a.copy(), self.b.copy(),
                            self.lo, self.hi)

    def evaluate(self, x, bound=None):
        a0, a, b = (self.a0, self.a, self.b) if bound is None else \
            (bound["a0"], bound["a"], bound["b"])
        k = np.arange(1, self.n_modes + 1) * self.omega
        xcol = ops.take(x, 0, axis=-1) if np.ndim(ops.value_of(x)) > 1 else x
        ang = _expand(xcol, -1) * k                       # (m, K), never trained
        c = ops.cos(ang)
        s = ops.sin(ang)
        K = self.n_modes
        series = ops.asum(ops.reshape(a, (1, K)) * c
                          + ops.reshape(b, (1, K)) * s, axis=1)
        return a0 + series

    def to_json_dict(self):
        return {"variant": "fourier", "a0": float(self.a0),
                "a": self.a.tolist(), "b": self.b.tolist(),
                "lo": self.lo, "hi": self.hi}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(doc["a0"], np.asarray(doc["a"]), np.asarray(doc["b"]),
                   doc["lo"], doc["hi"])

    def save(self, path, extra=None):
        doc = self.to_json_dict()
        if extra:
            doc.update(extra)
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)


class AnalyticModel:
    """Closed-form field wearing the model interface.

    Carries no trainable state; useful for pushing exact solutions
    through the same loss/derivative pipeline as trained models.
    """

    def __init__(self, fn, dim=1):
        self.fn = fn
        self.dim = dim
        self.variant = "analytic"

    def parameters(self):
        return {}

    def set_parameters(self, params):
        pass

    def project(self):
        pass

    def bind(self, tape):
        return {}

    def copy(self):
        return AnalyticModel(self.fn, self.dim)

    def evaluate(self, x, bound=None):
        return self.fn(x)


def eval_plain(model, x):
    if model.variant != "plain":
        raise ValueError("model is not in plain form")
    return model.evaluate(x)


def eval_pou(model, x):
    if model.variant != "pou":
        raise ValueError("model is not in partition-of-unity form")
    return model.evaluate(x)


def eval_fourier(model, x):
    x = np.atleast_1d(np.asarray(x, dtype=float)) if not isinstance(x, HyperDual) else x
    if not isinstance(x, HyperDual) and x.ndim == 1:
        return model.evaluate(x[:, None])
    return model.evaluate(x)


def spatial_derivs(model, x, axis=0):
    """(u, du/dx_axis, d2u/dx_axis2) at points ``x`` of shape (m, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if not 0 <= axis < x.shape[1]:
        raise ValueError(f"axis {axis} out of range for dimension {x.shape[1]}")
    out = model.evaluate(seeded_points(x, axis))
    shape = np.shape(out.v)
    return (np.asarray(out.v),
            np.broadcast_to(out.d1, shape).astype(float),
            np.broadcast_to(out.d12, shape).astype(float))


def init_nodes(geometry, n_interior, n_fixed_boundary=0, rng=None, *,
               dirichlet_segments=(), kernel=None, variant="plain"):
    """Lattice-place free nodes and pin fixed nodes on Dirichlet segments.

    Free nodes sit on the interior lattice closest to ``n_interior``
    points (actual count may differ); widths start at the lattice
    spacing and output weights at zero, so the initial model is
    identically zero.
    """
    if n_interior < 1:
        raise ValueError("need at least one interior node")
    free_X, spacing = geometry.lattice(n_interior)
    if len(free_X) == 0:
        raise GeometryError("empty domain: interior lattice has no points")
    if kernel is None:
        kernel = kernel_from_name("gaussian")
    if isinstance(kernel, str):
        kernel = kernel_from_name(kernel, rng=rng)

    fixed = []
    segments = [s for s in dirichlet_segments]
    if segments and n_fixed_boundary > 0:
        points = [s for s in segments if s.is_point]
        lines = [s for s in segments if not s.is_point]
        for seg in points:
            fixed.append(seg.start[None, :])
        remaining = max(0, n_fixed_boundary - len(points))
        total_len = sum(s.length() for s in lines)
        for seg in lines:
            count = max(1, int(round(remaining * seg.length() / total_len))) \
                if total_len > 0 else 0
            if count:
                fixed.append(seg.sample(count))
    fixed_X = np.concatenate(fixed, axis=0) if fixed else np.zeros((0, geometry.dim))

    n = len(fixed_X) + len(free_X)
    h0 = float(np.mean(spacing))
    return ModelParams(fixed_X, free_X, np.full(n, h0), np.zeros(n),
                       kernel, variant)
