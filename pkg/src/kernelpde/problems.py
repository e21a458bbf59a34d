"""Benchmark problem definitions: operators, domains, boundary data,
exact solutions, and samplers.

Exact-solution callables are written against ``ops`` so they evaluate on
plain arrays and on hyper-duals alike (the latter gives their exact
derivatives for residual checks).
"""

from __future__ import annotations

import numpy as np

from . import ops
from .geometry import Box, Polygon, Segment, SlitBox, interior_lattice, rejection_sample
from .model import init_nodes

K_BUMP = 0.01  # width parameter of the forcing bump in 1d-C


class UnknownProblemError(ValueError):
    def __init__(self, name):
        super().__init__(
            f"unknown problem '{name}'; valid names: {', '.join(PROBLEM_NAMES)}")
        self.name = name


class MarchInfo:
    """Everything time marching needs for a 1-D evolution problem."""

    def __init__(self, ic, spatial_residual, t_end, exact_t=None, reference=None):
        self.ic = ic
        self.spatial_residual = spatial_residual  # (u, grad, lap) -> du/dt
        self.t_end = t_end
        self.exact_t = exact_t                    # (x, t) -> u, when known
        self.reference = reference                # oracle id, when no closed form


class ProblemSpec:
    """One boundary-value (or evolution) problem, ready to sample."""

    def __init__(self, name, dim, geometry, residual=None, lap_axes=None,
                 dirichlet=(), neumann=(), exact=None, fixed_segments=None,
                 variational_f=None, march=None, reference=None,
                 time_axis=None):
        self.name = name
        self.dim = dim
        self.geometry = geometry
        self.residual = residual
        self.lap_axes = tuple(range(dim)) if lap_axes is None else tuple(lap_axes)
        self.dirichlet = list(dirichlet)            # (Segment, value_fn) pairs
        self.neumann = list(neumann)                # (Segment, value_fn) pairs
        self.exact = exact
        self.fixed_segments = [seg for seg, _ in self.dirichlet] \
            if fixed_segments is None else list(fixed_segments)
        self.variational_f = variational_f
        self.march = march
        self.reference = reference
        self.time_axis = time_axis

    @property
    def is_stationary(self):
        return self.residual is not None

    def interior_spacing(self, n_nodes):
        _, spacing = interior_lattice(self.geometry, n_nodes)
        return float(np.mean(spacing))

    def default_fixed_count(self, n_free):
        """Boundary node count giving roughly the interior lattice spacing."""
        points = sum(1 for s in self.fixed_segments if s.is_point)
        lines = [s for s in self.fixed_segments if not s.is_point]
        if not lines:
            return points
        spacing = self.interior_spacing(n_free)
        return points + max(len(lines), int(round(sum(s.length() for s in lines) / spacing)))

    def default_model(self, n_free, kernel="gaussian", variant="plain", rng=None,
                      n_fixed=None):
        if n_fixed is None:
            n_fixed = self.default_fixed_count(n_free)
        return init_nodes(self.geometry, n_free, n_fixed, rng,
                          dirichlet_segments=self.fixed_segments,
                          kernel=kernel, variant=variant)

    def auto_samples(self, n_nodes):
        """Interior sample count rule: 20 per node in 1-D, 4 per node above."""
        return 20 * n_nodes if self.dim == 1 else 4 * n_nodes


def residual_eval(problem, x, u, grad, lap, extra=None):
    """Signed operator residual; zero iff the equation holds at x."""
    if not problem.is_stationary:
        raise ValueError(f"problem '{problem.name}' has no stationary residual; "
                         "use time marching or its space-time form")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    grad = list(grad) if isinstance(grad, (list, tuple)) else [grad]
    if len(grad) != problem.dim:
        raise ValueError(f"gradient arity {len(grad)} does not match "
                         f"dimension {problem.dim}")
    return problem.residual(x, u, grad, lap)


def sample_interior(problem, count, rng=None, lattice=False):
    """Interior points: uniform lattice or seeded rejection sampling."""
    if count < 1:
        raise ValueError("need at least one interior sample")
    if lattice:
        pts, _ = interior_lattice(problem.geometry, count)
        return pts
    if rng is None:
        raise ValueError("random interior sampling needs an rng")
    return rejection_sample(problem.geometry, count, rng)


def sample_boundary(problem, count_per_segment):
    """Equispaced boundary points: Dirichlet values, Neumann values+normals."""
    if count_per_segment < 1:
        raise ValueError("need at least one point per boundary segment")
    d_pts, d_vals = [], []
    for seg, value in problem.dirichlet:
        pts = seg.sample(1 if seg.is_point else count_per_segment)
        d_pts.append(pts)
        d_vals.append(np.asarray(value(pts), dtype=float) * np.ones(len(pts)))
    n_pts, n_vals, n_nrm = [], [], []
    for seg, value in problem.neumann:
        pts = seg.sample(1 if seg.is_point else count_per_segment)
        n_pts.append(pts)
        n_vals.append(np.asarray(value(pts), dtype=float) * np.ones(len(pts)))
        n_nrm.append(seg.normals_for(pts))
    empty = np.zeros((0, problem.dim))
    return {
        "dirichlet_points": np.concatenate(d_pts) if d_pts else empty,
        "dirichlet_values": np.concatenate(d_vals) if d_vals else np.zeros(0),
        "neumann_points": np.concatenate(n_pts) if n_pts else empty,
        "neumann_values": np.concatenate(n_vals) if n_vals else np.zeros(0),
        "neumann_normals": np.concatenate(n_nrm) if n_nrm else empty,
    }


def error_metrics(u_model, u_ref):
    """(L1, L2, Linf) of the pointwise error, mean-based norms."""
    u_model = np.asarray(u_model, dtype=float)
    u_ref = np.asarray(u_ref, dtype=float)
    if u_model.shape != u_ref.shape:
        raise ValueError(f"grid mismatch: {u_model.shape} vs {u_ref.shape}")
    e = np.abs(u_model - u_ref)
    return float(np.mean(e)), float(np.sqrt(np.mean(e * e))), float(np.max(e))


# -- problem constructions ---------------------------------------------------

def _x0(x):
    return ops.take(x, 0, axis=-1)


def _zero(pts):
    return np.zeros(len(pts))


def _interval_points(lo, hi):
    left = Segment([lo], [lo], normal=[-1.0])
    right = Segment([hi], [hi], normal=[1.0])
    return left, right


def _box_edges(lo, hi):
    """Counterclockwise edges of a rectangle with outward normals."""
    (x0, y0), (x1, y1) = lo, hi
    return [
        Segment([x0, y0], [x1, y0], normal=[0.0, -1.0]),
        Segment([x1, y0], [x1, y1], normal=[1.0, 0.0]),
        Segment([x1, y1], [x0, y1], normal=[0.0, 1.0]),
        Segment([x0, y1], [x0, y0], normal=[-1.0, 0.0]),
    ]


def bump_forcing(x):
    """Sharp localized source used by 1d-C."""
    t = x - 1.0 / 3.0
    return x * (np.exp(-t * t / K_BUMP) - np.exp(-4.0 / (9.0 * K_BUMP)))


def heat_initial(x):
    return 2.0 * np.sin(np.pi * x)


def heat_exact(x, t):
    return 2.0 * np.exp(-np.pi ** 2 * t) * np.sin(np.pi * x)


ADVECTION_SPEED = 0.5


def advection_initial(x):
    return np.exp(-(((x + 0.3) / 0.3) ** 2))


def advection_exact(x, t):
    return advection_initial(x - ADVECTION_SPEED * t)


def burgers_initial(x):
    return np.sin(2.0 * np.pi * x)


IRREGULAR_VERTICES = (
    (0.0, 0.0), (1.6, 0.0), (2.0, 0.9), (1.2, 1.5),
    (0.7, 0.9), (-0.2, 1.1), (-0.4, 0.4),
)


def _make_1d_a():
    left, right = _interval_points(0.0, 1.0)
    return ProblemSpec(
        "1d-A", 1, Box([0.0], [1.0]),
        residual=lambda x, u, grad, lap: lap + 1.0,
        dirichlet=[(left, _zero), (right, _zero)],
        exact=lambda x: _x0(x) * (1.0 - _x0(x)) * 0.5,
        variational_f=lambda x: np.ones(len(np.atleast_2d(x))),
    )


def _make_1d_b():
    left, right = _interval_points(0.0, 1.0)
    pi = np.pi
    return ProblemSpec(
        "1d-B", 1, Box([0.0], [1.0]),
        residual=lambda x, u, grad, lap:
            lap + (pi ** 2) * u - pi * np.sin(pi * x[:, 0]),
        dirichlet=[(left, _zero)],
        neumann=[(right, lambda pts: np.full(len(pts), 0.5))],
        exact=lambda x: ops.cos(pi * _x0(x)) * _x0(x) * (-0.5),
    )


def _make_1d_c():
    left, right = _interval_points(0.0, 1.0)
    return ProblemSpec(
        "1d-C", 1, Box([0.0], [1.0]),
        residual=lambda x, u, grad, lap: lap + bump_forcing(x[:, 0]),
        dirichlet=[(left, _zero), (right, _zero)],
        variational_f=lambda x: bump_forcing(np.atleast_2d(x)[:, 0]),
        reference="ode_fd",
    )


def _make_2d_a():
    pi = np.pi

    def forcing(x):
        return 20.0 * pi ** 2 * np.sin(2 * pi * x[:, 0]) * np.sin(4 * pi * x[:, 1])

    return ProblemSpec(
        "2d-A", 2, Box([0.0, 0.0], [1.0, 1.0]),
        residual=lambda x, u, grad, lap: lap + forcing(x),
        dirichlet=[(seg, _zero) for seg in _box_edges((0, 0), (1, 1))],
        exact=lambda x: ops.sin(2 * pi * ops.take(x, 0, axis=-1))
                        * ops.sin(4 * pi * ops.take(x, 1, axis=-1)),
    )


def _make_2d_b():
    geo = SlitBox()
    slit = Segment([geo.slit_x0, geo.slit_y], [geo.slit_x1, geo.slit_y])
    segs = _box_edges((-1, -1), (1, 1)) + [slit]
    return ProblemSpec(
        "2d-B", 2, geo,
        residual=lambda x, u, grad, lap: lap + 1.0,
        dirichlet=[(seg, _zero) for seg in segs],
        reference="poisson_fd",
    )


def _make_irregular():
    poly = Polygon(IRREGULAR_VERTICES)
    v = poly.vertices
    segs = [Segment(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]
    return ProblemSpec(
        "irregular", 2, poly,
        residual=lambda x, u, grad, lap: lap + 1.0,
        dirichlet=[(seg, _zero) for seg in segs],
    )


def _make_heat():
    left, right = _interval_points(0.0, 1.0)
    c = 1.0
    return ProblemSpec(
        "heat", 1, Box([0.0], [1.0]),
        dirichlet=[(left, _zero), (right, _zero)],
        march=MarchInfo(
            ic=heat_initial,
            spatial_residual=lambda u, grad, lap: (c ** 2) * lap,
            t_end=0.1,
            exact_t=heat_exact,
        ),
    )


def _make_advection():
    left, right = _interval_points(-1.0, 1.0)
    a = ADVECTION_SPEED
    return ProblemSpec(
        "advection", 1, Box([-1.0], [1.0]),
        dirichlet=[(left, _zero), (right, _zero)],
        march=MarchInfo(
            ic=advection_initial,
            spatial_residual=lambda u, grad, lap: -a * grad[0],
            t_end=1.0,
            exact_t=advection_exact,
        ),
    )


def _make_burgers():
    left, right = _interval_points(0.0, 1.0)
    return ProblemSpec(
        "burgers", 1, Box([0.0], [1.0]),
        dirichlet=[(left, _zero), (right, _zero)],
        march=MarchInfo(
            ic=burgers_initial,
            spatial_residual=lambda u, grad, lap: -(u * grad[0]),
            t_end=0.3,
            reference="burgers_fv",
        ),
    )


_BUILDERS = {
    "1d-A": _make_1d_a,
    "1d-B": _make_1d_b,
    "1d-C": _make_1d_c,
    "2d-A": _make_2d_a,
    "2d-B": _make_2d_b,
    "irregular": _make_irregular,
    "heat": _make_heat,
    "advection": _make_advection,
    "burgers": _make_burgers,
}

SPACETIME_NAMES = ("heat-st", "advection-st", "burgers-st")
PROBLEM_NAMES = tuple(sorted(_BUILDERS)) + SPACETIME_NAMES


def make_problem(name, polygon_file=None):
    """Construct a benchmark problem by name.

    ``polygon_file`` replaces the built-in irregular-domain vertices.
    Names ending in ``-st`` give the space-time form of an evolution
    problem.
    """
    if name in _BUILDERS:
        if name == "irregular" and polygon_file is not None:
            poly = Polygon.from_file(polygon_file)
            v = poly.vertices
            segs = [Segment(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]
            return ProblemSpec(
                "irregular", 2, poly,
                residual=lambda x, u, grad, lap: lap + 1.0,
                dirichlet=[(seg, _zero) for seg in segs],
            )
        return _BUILDERS[name]()
    if name in SPACETIME_NAMES:
        from .timestepping import spacetime_problem
        return spacetime_problem(name[:-3])
    raise UnknownProblemError(name)


def evaluation_points(problem, resolution=None):
    """Default comparison grid for error reporting."""
    geo = problem.geometry
    if problem.dim == 1:
        n = resolution or 201
        return np.linspace(geo.lows[0], geo.highs[0], n)[:, None]
    n = resolution or 51
    xs = np.linspace(geo.lows[0], geo.highs[0], n)
    ys = np.linspace(geo.lows[1], geo.highs[1], n)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = geo.contains(pts)
    if isinstance(geo, Box) and not isinstance(geo, SlitBox):
        return pts  # boxes include their boundary in reports
    return pts[inside]
