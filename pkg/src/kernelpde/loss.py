"""Loss assembly: pointwise operator residuals with boundary penalties,
and the quadrature (energy) alternative for 1-D problems.

All three terms are means over their sample sets, so the weights keep
their meaning when resolutions change.  Boundary sets are never
subsampled; the interior set optionally is, by a per-iteration random
fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import ops
from .hyperdual import seeded_points
from .problems import sample_boundary, sample_interior


class ConfigError(ValueError):
    pass


@dataclass
class LossConfig:
    w_interior: float = 1.0
    w_dirichlet: float = 100.0
    w_neumann: float = 100.0
    fraction: float = 1.0
    n_interior: int | None = None        # None: problem's auto rule
    boundary_per_segment: int | None = None
    mode: str = "collocation"
    n_cells: int = 1000                  # quadrature cells, energy mode

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ConfigError(f"sampling fraction must be in (0, 1], got {self.fraction}")
        if self.mode not in ("collocation", "variational"):
            raise ConfigError(f"unknown loss mode '{self.mode}'")
        if min(self.w_interior, self.w_dirichlet, self.w_neumann) < 0:
            raise ConfigError("loss weights must be nonnegative")


@dataclass
class SampleSet:
    interior: np.ndarray
    dirichlet_points: np.ndarray
    dirichlet_values: np.ndarray
    neumann_points: np.ndarray
    neumann_values: np.ndarray
    neumann_normals: np.ndarray


@dataclass
class LossParts:
    total: object
    interior: object
    dirichlet: object
    neumann: object
    bound: dict = field(default_factory=dict)

    def values(self):
        tot = float(ops.value_of(self.total))
        return (tot,
                float(ops.value_of(self.interior)),
                float(ops.value_of(self.dirichlet)),
                float(ops.value_of(self.neumann)))


def build_samples(problem, cfg, n_nodes=None):
    """Deterministic sample sets: interior lattice plus full boundary."""
    n_int = cfg.n_interior
    if n_int is None:
        if n_nodes is None:
            raise ConfigError("need n_interior or a node count for the auto rule")
        n_int = problem.auto_samples(n_nodes)
    per_seg = cfg.boundary_per_segment
    if per_seg is None:
        per_seg = 1 if problem.dim == 1 else max(4, int(round(math.sqrt(n_int))))
    interior = sample_interior(problem, n_int, lattice=True)
    b = sample_boundary(problem, per_seg)
    return SampleSet(interior=interior, **b)


def subsample(points, fraction, rng):
    """Ceil(fraction * m) distinct rows, uniform without replacement."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"fraction must be in (0, 1], got {fraction}")
    if fraction == 1.0:
        return points
    k = int(math.ceil(fraction * len(points)))
    idx = rng.choice(len(points), size=k, replace=False)
    return points[idx]


def model_derivatives(model, bound, pts, lap_axes):
    """u, its gradient components, and the Laplacian over ``lap_axes``.

    One seeded pass per coordinate axis; the cross slot of each pass is
    the exact same-axis second derivative.
    """
    d = pts.shape[1]
    u = None
    grads = []
    lap = None
    for axis in range(d):
        out = model.evaluate(seeded_points(pts, axis), bound=bound)
        if axis == 0:
            u = ops.extract(out, "v")
        grads.append(ops.extract(out, "d1"))
        if axis in lap_axes:
            d2 = ops.extract(out, "d12")
            lap = d2 if lap is None else lap + d2
    return u, grads, lap


def collocation_loss(model, problem, cfg, samples, tape, rng=None):
    """Weighted mean-square residual + boundary penalty terms."""
    if not problem.is_stationary:
        raise ConfigError(f"problem '{problem.name}' has no pointwise residual; "
                          "march it or use its space-time form")
    bound = model.bind(tape)

    pts = samples.interior
    if cfg.fraction < 1.0:
        if rng is None:
            raise ConfigError("random interior sampling needs an rng")
        pts = subsample(pts, cfg.fraction, rng)
    if cfg.w_interior > 0 and len(pts) == 0:
        raise ConfigError("interior term active but no interior samples")

    u, grads, lap = model_derivatives(model, bound, pts, problem.lap_axes)
    res = problem.residual(pts, u, grads, lap)
    interior = ops.amean(res * res)

    dirichlet = _dirichlet_term(model, bound, samples, cfg)
    neumann = _neumann_term(model, bound, problem, samples, cfg)

    total = cfg.w_interior * interior + cfg.w_dirichlet * dirichlet \
        + cfg.w_neumann * neumann
    return LossParts(total, interior, dirichlet, neumann, bound)


def _dirichlet_term(model, bound, samples, cfg):
    if len(samples.dirichlet_points) == 0:
        if cfg.w_dirichlet > 0 and samples.dirichlet_values.size:
            raise ConfigError("dirichlet term active but no boundary samples")
        return 0.0
    ub = model.evaluate(samples.dirichlet_points, bound=bound)
    gap = ub - samples.dirichlet_values
    return ops.amean(gap * gap)


def _neumann_term(model, bound, problem, samples, cfg):
    if len(samples.neumann_points) == 0:
        if cfg.w_neumann > 0 and problem.neumann:
            raise ConfigError("neumann term active but no boundary samples")
        return 0.0
    normals = samples.neumann_normals
    flux = None
    for axis in range(samples.neumann_points.shape[1]):
        if not np.any(normals[:, axis]):
            continue
        out = model.evaluate(seeded_points(samples.neumann_points, axis), bound=bound)
        comp = ops.extract(out, "d1") * normals[:, axis]
        flux = comp if flux is None else flux + comp
    gap = flux - samples.neumann_values
    return ops.amean(gap * gap)


def variational_loss(model, problem, cfg, samples, tape):
    """Left-endpoint quadrature of the 1-D energy functional.

    Integrand 0.5 u'(x)^2 - f(x) u(x); flux-type boundary data would
    fold into the functional, so only the Dirichlet penalty is added.
    """
    if problem.dim != 1 or problem.variational_f is None:
        raise ConfigError(
            f"problem '{problem.name}' has no 1-D energy functional form")
    bound = model.bind(tape)
    lo, hi = problem.geometry.lows[0], problem.geometry.highs[0]
    n = cfg.n_cells
    dx = (hi - lo) / n
    xs = (lo + dx * np.arange(n))[:, None]

    out = model.evaluate(seeded_points(xs, 0), bound=bound)
    u = ops.extract(out, "v")
    du = ops.extract(out, "d1")
    f = problem.variational_f(xs)
    integral = ops.asum(0.5 * (du * du) - f * u) * dx

    dirichlet = _dirichlet_term(model, bound, samples, cfg)
    total = integral + cfg.w_dirichlet * dirichlet
    return LossParts(total, integral, dirichlet, 0.0, bound)


def compute_loss(model, problem, cfg, samples, tape, rng=None):
    if cfg.mode == "variational":
        return variational_loss(model, problem, cfg, samples, tape)
    return collocation_loss(model, problem, cfg, samples, tape, rng=rng)
