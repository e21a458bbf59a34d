"""Domain geometry: boxes, the slit square, and polygons.

All membership tests are vectorized over point arrays of shape (m, d).
"""

from __future__ import annotations

import numpy as np

SLIT_EPS = 1e-9  # exclusion tube half-width around the slit


class GeometryError(ValueError):
    pass


class Box:
    """Axis-aligned box in d dimensions (interval, rectangle, space-time)."""

    def __init__(self, lows, highs):
        self.lows = np.atleast_1d(np.asarray(lows, dtype=float))
        self.highs = np.atleast_1d(np.asarray(highs, dtype=float))
        if self.lows.shape != self.highs.shape or np.any(self.highs <= self.lows):
            raise GeometryError(f"degenerate box: lows={lows}, highs={highs}")

    @property
    def dim(self):
        return self.lows.size

    @property
    def lengths(self):
        return self.highs - self.lows

    def contains(self, pts):
        pts = np.atleast_2d(pts)
        return np.all((pts > self.lows) & (pts < self.highs), axis=1)

    def sample_random(self, n, rng):
        return rng.uniform(self.lows, self.highs, size=(n, self.dim))

    def lattice_counts(self, n):
        """Per-axis counts of the interior lattice closest to n points."""
        if self.dim == 1:
            return (int(n),)
        lengths = self.lengths
        base = (n / np.prod(lengths)) ** (1.0 / self.dim)
        return tuple(max(1, int(round(base * length))) for length in lengths)

    def lattice(self, n):
        """Uniform interior lattice: points (m, d) and per-axis spacing."""
        counts = self.lattice_counts(n)
        spacing = self.lengths / (np.array(counts) + 1.0)
        axes = [self.lows[k] + spacing[k] * np.arange(1, counts[k] + 1)
                for k in range(self.dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return pts, spacing


class SlitBox(Box):
    """[-1,1]^2 with the segment [0,1) x {0} removed.

    Membership excludes a thin tube around the slit so interior samples
    never straddle the cut.
    """

    def __init__(self, lows=(-1.0, -1.0), highs=(1.0, 1.0),
                 slit_y=0.0, slit_x0=0.0, slit_x1=1.0):
        super().__init__(lows, highs)
        self.slit_y = slit_y
        self.slit_x0 = slit_x0
        self.slit_x1 = slit_x1

    def on_slit(self, pts):
        pts = np.atleast_2d(pts)
        return ((np.abs(pts[:, 1] - self.slit_y) <= SLIT_EPS)
                & (pts[:, 0] >= self.slit_x0 - SLIT_EPS)
                & (pts[:, 0] < self.slit_x1))

    def contains(self, pts):
        return super().contains(pts) & ~self.on_slit(pts)


class Polygon:
    """Simple closed polygon given by ordered vertices (v, 2)."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError("polygon needs at least 3 planar vertices")
        self.vertices = v
        if abs(self.signed_area()) < 1e-14:
            raise GeometryError("polygon has zero area")
        if self._self_intersects():
            raise GeometryError("polygon edges self-intersect")

    @property
    def dim(self):
        return 2

    @classmethod
    def from_file(cls, path):
        """Load vertices from a text file: one \"x y\" pair per line."""
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                x, y = line.split()
                rows.append((float(x), float(y)))
        return cls(rows)

    def signed_area(self):
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)

    def _self_intersects(self):
        v = self.vertices
        n = len(v)
        edges = [(v[i], v[(i + 1) % n]) for i in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                if j == i or (j + 1) % n == i or (i + 1) % n == j:
                    continue  # shared endpoints
                if _segments_cross(*edges[i], *edges[j]):
                    return True
        return False

    @property
    def lows(self):
        return self.vertices.min(axis=0)

    @property
    def highs(self):
        return self.vertices.max(axis=0)

    @property
    def lengths(self):
        return self.highs - self.lows

    def contains(self, pts):
        """Crossing-number membership test, vectorized over points."""
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0], pts[:, 1]
        inside = np.zeros(len(pts), dtype=bool)
        v = self.vertices
        n = len(v)
        for i in range(n):
            x0, y0 = v[i]
            x1, y1 = v[(i + 1) % n]
            crosses = ((y0 <= y) & (y1 > y)) | ((y0 > y) & (y1 <= y))
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (y - y0) / (y1 - y0)
                xi = x0 + t * (x1 - x0)
            inside ^= crosses & (x < xi)
        return inside

    def sample_random(self, n, rng):
        return rng.uniform(self.lows, self.highs, size=(n, 2))

    def lattice_counts(self, n):
        lengths = self.lengths
        # oversample the bounding box so the inside count lands near n
        bbox_area = np.prod(lengths)
        target = n * bbox_area / abs(self.signed_area())
        base = (target / bbox_area) ** 0.5
        return tuple(max(1, int(round(base * length))) for length in lengths)

    def lattice(self, n):
        counts = self.lattice_counts(n)
        spacing = self.lengths / (np.array(counts) + 1.0)
        axes = [self.lows[k] + spacing[k] * np.arange(1, counts[k] + 1)
                for k in range(2)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        return pts[self.contains(pts)], spacing


def _segments_cross(p0, p1, q0, q1):
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1 = orient(p0, p1, q0)
    d2 = orient(p0, p1, q1)
    d3 = orient(q0, q1, p0)
    d4 = orient(q0, q1, p1)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


class Segment:
    """Straight boundary piece with equispaced sampling.

    ``half_open`` drops the far endpoint so that walking a closed loop
    edge by edge never duplicates corners.
    """

    def __init__(self, start, end, normal=None, half_open=True):
        self.start = np.atleast_1d(np.asarray(start, dtype=float))
        self.end = np.atleast_1d(np.asarray(end, dtype=float))
        self.normal = None if normal is None else np.asarray(normal, dtype=float)
        self.half_open = half_open

    @property
    def is_point(self):
        return np.allclose(self.start, self.end)

    def length(self):
        return float(np.linalg.norm(self.end - self.start))

    def sample(self, n):
        if self.is_point:
            return self.start[None, :].repeat(1, axis=0)
        if self.half_open:
            t = np.arange(n) / n
        else:
            t = np.linspace(0.0, 1.0, n)
        return self.start[None, :] + t[:, None] * (self.end - self.start)[None, :]

    def normals_for(self, pts):
        if self.normal is None:
            raise GeometryError("segment has no outward normal attached")
        return np.broadcast_to(self.normal, (len(pts), self.normal.size)).copy()


def interior_lattice(geometry, n):
    """Deterministic interior sample/lattice set; returns (points, spacing)."""
    return geometry.lattice(n)


def rejection_sample(geometry, n, rng):
    """Uniform interior points by rejection; errors out after 1000*n draws."""
    out = []
    drawn = 0
    limit = 1000 * n
    while sum(len(o) for o in out) < n:
        batch = geometry.sample_random(min(4 * n, limit), rng)
        drawn += len(batch)
        keep = batch[geometry.contains(batch)]
        if len(keep):
            out.append(keep)
        if drawn > limit:
            raise GeometryError(
                f"rejection sampling failed: {drawn} draws produced "
                f"{sum(len(o) for o in out)}/{n} interior points")
    return np.concatenate(out, axis=0)[:n]
