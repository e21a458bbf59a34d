"""Independent classical reference solvers.

These share no code with the kernel-model evaluation path; they exist to
produce trusted values for problems without closed forms (and to
cross-check the ones that have them).  Outputs cache as CSV under a
references directory keyed by problem and resolution.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .problems import bump_forcing, burgers_initial

REF_DIR_ENV = "SPINN_REF_DIR"


class SolverError(RuntimeError):
    pass


@dataclass
class Grid1D:
    x: np.ndarray
    u: np.ndarray

    def interp(self, pts):
        return np.interp(np.asarray(pts).ravel(), self.x, self.u)


@dataclass
class Grid2D:
    x: np.ndarray          # (nx,)
    y: np.ndarray          # (ny,)
    u: np.ndarray          # (nx, ny)

    def points(self):
        gx, gy = np.meshgrid(self.x, self.y, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel()], axis=1)

    def values(self):
        return self.u.ravel()


def ode_fd_solve(name, n):
    """Second-order central differences on n cells for the 1-D suite."""
    if n < 16:
        raise SolverError("need at least 16 cells")
    x = np.linspace(0.0, 1.0, n + 1)
    h = 1.0 / n

    if name == "1d-A":
        c, g = 0.0, -np.ones(n + 1)
    elif name == "1d-B":
        c = np.pi ** 2
        g = np.pi * np.sin(np.pi * x)
    elif name == "1d-C":
        c, g = 0.0, -bump_forcing(x)
    else:
        raise SolverError(f"no finite-difference form for '{name}'")

    # rows: u'' + c u = g at interior points, Dirichlet at x=0
    main = np.full(n + 1, -2.0 / h ** 2 + c)
    off = np.full(n, 1.0 / h ** 2)
    A = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    b = np.asarray(g, dtype=float).copy()
    A[0, :] = 0.0
    A[0, 0] = 1.0
    b[0] = 0.0
    if name == "1d-B":
        # one-sided second-order stencil for u'(1) = 1/2
        A[n, :] = 0.0
        A[n, n] = 3.0 / (2 * h)
        A[n, n - 1] = -4.0 / (2 * h)
        A[n, n - 2] = 1.0 / (2 * h)
        b[n] = 0.5
    else:
        A[n, :] = 0.0
        A[n, n] = 1.0
        b[n] = 0.0

    u = spla.spsolve(A.tocsr(), b)
    if not np.all(np.isfinite(u)):
        raise SolverError(f"singular system for '{name}' at n={n}")
    return Grid1D(x=x, u=u)


def poisson_fd_solve(name, n):
    """5-point Laplacian with zero Dirichlet data, solved by CG.

    For the slit square, grid nodes lying on the cut are pinned to zero,
    so n must be odd (the slit line must be a grid row).
    """
    if n < 32:
        raise SolverError("need at least a 32x32 interior grid")

    if name == "2d-A":
        lo, hi = 0.0, 1.0
        xs = np.linspace(lo, hi, n + 2)[1:-1]
        ys = xs.copy()
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        rhs = -20.0 * np.pi ** 2 * np.sin(2 * np.pi * gx) * np.sin(4 * np.pi * gy)
        pinned = np.zeros((n, n), dtype=bool)
    elif name == "2d-B":
        if n % 2 == 0:
            raise SolverError("slit grid needs odd n so y=0 is a grid row")
        xs = np.linspace(-1.0, 1.0, n + 2)[1:-1]
        ys = xs.copy()
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        rhs = -np.ones((n, n))
        pinned = (np.abs(gy) < 1e-14) & (gx >= 0.0) & (gx < 1.0)
    else:
        raise SolverError(f"no 5-point form for '{name}'")

    h = xs[1] - xs[0]
    lap1d = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)],
                     [-1, 0, 1]) / h ** 2
    eye = sp.identity(n)
    A = (sp.kron(lap1d, eye) + sp.kron(eye, lap1d)).tocsr()
    b = rhs.ravel()

    mask = pinned.ravel()
    if mask.any():
        A = A.tolil()
        idx = np.where(mask)[0]
        for i in idx:
            A.rows[i] = [i]
            A.data[i] = [1.0]
        A = A.tocsr()
        b = b.copy()
        b[idx] = 0.0

    u, info = spla.cg(A, b, rtol=0.0, atol=1e-10, maxiter=100000)
    if info != 0:
        raise SolverError(f"conjugate gradients failed to reach 1e-10 (info={info})")
    return Grid2D(x=xs, y=ys, u=u.reshape(n, n))


def burgers_fv_solve(u0=burgers_initial, n=400, t_end=0.3, cfl=0.5,
                     snapshot_times=()):
    """Godunov finite volumes for u_t + (u^2/2)_x = 0 with zero ghost cells.

    Returns (centers, {time: cell averages}) including t_end.
    """
    if cfl > 0.9:
        raise SolverError(f"CFL {cfl} too large; need <= 0.9")
    dx = 1.0 / n
    xc = (np.arange(n) + 0.5) * dx
    u = np.asarray(u0(xc), dtype=float)

    want = sorted(set(float(t) for t in snapshot_times) | {float(t_end)})
    snaps = {}
    t = 0.0
    wi = 0
    while wi < len(want):
        if t >= want[wi] - 1e-12:
            snaps[want[wi]] = u.copy()
            wi += 1
            continue
        smax = max(np.max(np.abs(u)), 1e-12)
        dt = min(cfl * dx / smax, want[wi] - t)
        ul = np.concatenate([[0.0], u])      # zero-value ghost cells
        ur = np.concatenate([u, [0.0]])
        flux = _godunov_flux(ul, ur)
        u = u - dt / dx * (flux[1:] - flux[:-1])
        t += dt
    return xc, snaps


def _godunov_flux(ul, ur):
    """Exact Riemann flux for the quadratic flux f(u) = u^2/2."""
    f = lambda v: 0.5 * v * v
    return np.maximum(f(np.maximum(ul, 0.0)), f(np.minimum(ur, 0.0)))


# -- reference cache ---------------------------------------------------------

def reference_dir(base=None):
    if base is not None:
        return base
    return os.environ.get(REF_DIR_ENV, "references")


def reference_path(problem_name, resolution, base=None):
    return os.path.join(reference_dir(base), f"{problem_name}_n{resolution}.csv")


def compute_reference(problem_name, resolution):
    if problem_name in ("1d-A", "1d-B", "1d-C"):
        g = ode_fd_solve(problem_name, resolution)
        return np.column_stack([g.x, g.u]), "x,u"
    if problem_name in ("2d-A", "2d-B"):
        g = poisson_fd_solve(problem_name, resolution)
        return np.column_stack([g.points(), g.values()]), "x,y,u"
    if problem_name == "burgers":
        xc, snaps = burgers_fv_solve(n=resolution, t_end=0.3,
                                     snapshot_times=(0.1, 0.2, 0.3))
        cols = [xc] + [snaps[t] for t in sorted(snaps)]
        header = "x," + ",".join(f"u_t{t:g}" for t in sorted(snaps))
        return np.column_stack(cols), header
    raise SolverError(f"no reference solver for '{problem_name}'")


def ensure_reference(problem_name, resolution, base=None, force=False):
    """Compute-and-cache; returns the CSV path. Fresh caches are reused."""
    path = reference_path(problem_name, resolution, base)
    if os.path.exists(path) and not force:
        return path
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    data, header = compute_reference(problem_name, resolution)
    np.savetxt(path, data, delimiter=",", header=header, comments="")
    return path


def load_reference(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    with open(path) as fh:
        header = fh.readline().strip()
    return header.split(","), np.atleast_2d(data)
