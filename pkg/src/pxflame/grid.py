"""Uniform rectangular grids in one or two dimensions.

Gradients live on a staggered layout.  In 1D there is one sample per cell
(the face between two nodes).  In 2D every cell carries four samples, one per
corner triangle (the corner and its two cell neighbours), which is the average
of both diagonal triangulations of the cell.  Each sample holds a full
d-vector, its x-component is the difference along the horizontal cell edge and
its y-component the difference along the vertical one, so a sample value is
exact at the corresponding edge midpoints for quadratics.

The discrete divergence is defined as the negative adjoint of the gradient with
respect to the sample weights and the lumped (trapezoid) node volumes, so
summation by parts holds to rounding error.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator


class GridMismatchError(ValueError):
    """Raised when fields defined on different grids are combined."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform node lattice on ``[lower, upper]`` along each axis."""

    shape: tuple[int, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        lower = tuple(float(a) for a in self.lower)
        upper = tuple(float(b) for b in self.upper)
        if len(shape) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        if not (len(shape) == len(lower) == len(upper)):
            raise ValueError("shape, lower and upper must have the same length")
        if any(n < 3 for n in shape):
            raise ValueError("each axis needs at least 3 nodes")
        if any(b <= a for a, b in zip(lower, upper)):
            raise ValueError("upper bounds must exceed lower bounds")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def uniform(cls, n: int | Sequence[int], lower=0.0, upper=1.0) -> "Grid":
        if np.isscalar(n):
            n = (int(n),)
        d = len(n)
        lower = (lower,) * d if np.isscalar(lower) else tuple(lower)
        upper = (upper,) * d if np.isscalar(upper) else tuple(upper)
        return cls(tuple(n), lower, upper)

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (n - 1) for a, b, n in zip(self.lower, self.upper, self.shape))

    @property
    def h(self) -> float:
        """Smallest spacing over the axes."""
        return min(self.spacing)

    @property
    def extents(self) -> tuple[float, ...]:
        return tuple((n - 1) * h for n, h in zip(self.shape, self.spacing))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(a, b, n) for a, b, n in zip(self.lower, self.upper, self.shape))

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (dim,)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def points(self) -> np.ndarray:
        """Flattened node coordinates, shape ``(size, dim)``."""
        return self.coords.reshape(-1, self.dim)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.dim):
            idx = [slice(None)] * self.dim
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        return mask

    @property
    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask

    def contains(self, points, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = np.asarray(self.lower) - tol
        hi = np.asarray(self.upper) + tol
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def distance_to_boundary(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        lo = pts - np.asarray(self.lower)
        hi = np.asarray(self.upper) - pts
        return np.minimum(lo, hi).min(axis=1)

    def same_as(self, other: "Grid") -> bool:
        return (
            self is other
            or (self.shape == other.shape and self.lower == other.lower and self.upper == other.upper)
        )

    def check_same(self, *others: "Grid") -> None:
        for g in others:
            if not self.same_as(g):
                raise GridMismatchError(f"grid mismatch: {self} vs {g}")

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def evaluate(self, fn) -> "ScalarField":
        """Sample ``fn(*coords)`` at the nodes."""
        c = self.coords
        return ScalarField(self, fn(*[c[..., k] for k in range(self.dim)]))

    @cached_property
    def ops(self) -> "StaggeredOperators":
        return StaggeredOperators.build(self)

    def __repr__(self) -> str:
        return f"Grid(shape={self.shape}, lower={self.lower}, upper={self.upper})"


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One value per node."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size == 1 and self.grid.size != 1:
            v = np.full(self.grid.shape, float(v))
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def __neg__(self):
        return self.with_values(-self.values)

    def __mul__(self, t: float):
        return self.with_values(t * self.values)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, ScalarField):
            self.grid.check_same(other.grid)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    def __sub__(self, other):
        if isinstance(other, ScalarField):
            self.grid.check_same(other.grid)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def to_csv(self, name: str = "value") -> str:
        return field_to_csv(self, name)


@dataclass(frozen=True, eq=False)
class VectorField:
    """One d-vector per gradient sample, ``values`` has shape ``(n_samples, dim)``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        n = self.grid.ops.n_samples
        if v.shape != (n, self.grid.dim):
            raise ValueError(f"expected shape {(n, self.grid.dim)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vector field entries must be finite")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    @property
    def locations(self) -> np.ndarray:
        """Sample centroids, shape ``(n_samples, dim)``."""
        return self.grid.ops.centers

    def cell_view(self) -> np.ndarray:
        """Values reshaped to ``cells + (samples_per_cell, dim)``."""
        cells = tuple(n - 1 for n in self.grid.shape)
        return self.values.reshape(cells + (-1, self.grid.dim))


@dataclass(frozen=True, eq=False)
class StaggeredOperators:
    """Sparse difference matrices, sample weights and node volumes for a grid."""

    diff: tuple[sp.csr_matrix, ...]
    weights: np.ndarray
    vertices: np.ndarray
    centers: np.ndarray
    node_volume: np.ndarray
    average: sp.csr_matrix = field(repr=False)

    @property
    def n_samples(self) -> int:
        return self.weights.size

    @classmethod
    def build(cls, grid: Grid) -> "StaggeredOperators":
        if grid.dim == 1:
            return cls._build_1d(grid)
        return cls._build_2d(grid)

    @classmethod
    def _build_1d(cls, grid: Grid) -> "StaggeredOperators":
        n = grid.shape[0]
        (h,) = grid.spacing
        m = n - 1
        rows = np.repeat(np.arange(m), 2)
        cols = np.stack([np.arange(m), np.arange(1, n)], axis=1).ravel()
        vals = np.tile([-1.0 / h, 1.0 / h], m)
        dx = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
        verts = np.stack([np.arange(m), np.arange(1, n)], axis=1)
        centers = 0.5 * (grid.axes[0][:-1] + grid.axes[0][1:])
        weights = np.full(m, h)
        return cls._finish(grid, (dx,), weights, verts, centers[:, None])

    @classmethod
    def _build_2d(cls, grid: Grid) -> "StaggeredOperators":
        nx, ny = grid.shape
        hx, hy = grid.spacing
        idx = np.arange(grid.size).reshape(nx, ny)
        sw = idx[:-1, :-1].ravel()
        se = idx[1:, :-1].ravel()
        nw = idx[:-1, 1:].ravel()
        ne = idx[1:, 1:].ravel()
        ncell = sw.size
        # (x edge: from, to), (y edge: from, to), triangle vertices
        corners = [
            ((sw, se), (sw, nw), (sw, se, nw)),
            ((sw, se), (se, ne), (se, sw, ne)),
            ((nw, ne), (sw, nw), (nw, ne, sw)),
            ((nw, ne), (se, ne), (ne, nw, se)),
        ]
        # sample index = 4 * cell + corner
        sample = lambda k: 4 * np.arange(ncell) + k  # noqa: E731
        mats = []
        for axis, hh in ((0, hx), (1, hy)):
            r, c, v = [], [], []
            for k, corner in enumerate(corners):
                a, b = corner[axis]
                s = sample(k)
                r += [s, s]
                c += [a, b]
                v += [np.full(ncell, -1.0 / hh), np.full(ncell, 1.0 / hh)]
            mats.append(
                sp.csr_matrix(
                    (np.concatenate(v), (np.concatenate(r), np.concatenate(c))),
                    shape=(4 * ncell, grid.size),
                )
            )
        verts = np.empty((4 * ncell, 3), dtype=np.int64)
        for k, corner in enumerate(corners):
            verts[k::4] = np.stack(corner[2], axis=1)
        pts = grid.points
        centers = pts[verts].mean(axis=1)
        weights = np.full(4 * ncell, hx * hy / 4.0)
        return cls._finish(grid, tuple(mats), weights, verts, centers)

    @classmethod
    def _finish(cls, grid, diff, weights, verts, centers):
        nv = verts.shape[1]
        rows = np.repeat(np.arange(verts.shape[0]), nv)
        avg = sp.csr_matrix(
            (np.full(verts.size, 1.0 / nv), (rows, verts.ravel())),
            shape=(verts.shape[0], grid.size),
        )
        node_volume = avg.T @ weights
        for a in (weights, verts, centers, node_volume):
            a.setflags(write=False)
        return cls(diff, weights, verts, centers, node_volume, avg)


def gradient(u: ScalarField) -> VectorField:
    ops = u.grid.ops
    g = np.stack([D @ u.flat for D in ops.diff], axis=1)
    return VectorField(u.grid, g)


def divergence(F: VectorField) -> ScalarField:
    """Discrete divergence at interior nodes (boundary entries are zero).

    Defined by ``<div F, phi> = -<F, grad phi>`` for ``phi`` vanishing on the
    boundary, with node volumes as the scalar inner product weights.
    """
    ops = F.grid.ops
    wF = F.values * ops.weights[:, None]
    acc = sum(D.T @ wF[:, k] for k, D in enumerate(ops.diff))
    out = -acc / ops.node_volume
    out = out.reshape(F.grid.shape)
    out[F.grid.boundary_mask] = 0.0
    return ScalarField(F.grid, out)


def integrate(u: ScalarField) -> float:
    """Trapezoid quadrature (cell midpoint rule on nodal averages)."""
    return float(u.grid.ops.node_volume @ u.flat)


def inner_nodes(u: ScalarField, v: ScalarField) -> float:
    u.grid.check_same(v.grid)
    return float(np.sum(u.grid.ops.node_volume * u.flat * v.flat))


def inner_samples(F: VectorField, G: VectorField) -> float:
    F.grid.check_same(G.grid)
    return float(np.sum(F.grid.ops.weights[:, None] * F.values * G.values))


def sample_average(u: ScalarField) -> np.ndarray:
    """Arithmetic mean of nodal values over each sample's vertices."""
    return u.grid.ops.average @ u.flat


def interpolate(u: ScalarField, point) -> float | np.ndarray:
    """Multilinear interpolation at one point or an ``(m, dim)`` array of points."""
    pts = np.asarray(point, dtype=float)
    single = pts.ndim <= 1
    pts = pts.reshape(-1, u.grid.dim)
    if not np.all(u.grid.contains(pts)):
        raise ValueError("interpolation point outside the domain")
    lo = np.asarray(u.grid.lower)
    hi = np.asarray(u.grid.upper)
    pts = np.clip(pts, lo, hi)
    interp = RegularGridInterpolator(u.grid.axes, u.values, method="linear")
    out = interp(pts)
    return float(out[0]) if single else out


def nodal_gradient(u: ScalarField) -> np.ndarray:
    """Second-order node-centred gradient, shape ``shape + (dim,)``."""
    g = np.gradient(u.values, *u.grid.spacing, edge_order=2)
    if u.grid.dim == 1:
        g = [g]
    return np.stack(g, axis=-1)


def interpolate_gradient(u: ScalarField, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    g = nodal_gradient(u)
    comps = [interpolate(ScalarField(u.grid, g[..., k]), pts) for k in range(u.grid.dim)]
    return np.stack(comps, axis=1)


def field_to_csv(u: ScalarField, name: str = "value") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    axes = ["x", "y"][: u.grid.dim]
    w.writerow(["index", *axes, name])
    for i, (pt, val) in enumerate(zip(u.grid.points, u.flat)):
        w.writerow([i, *(fmt(c) for c in pt), fmt(val)])
    return buf.getvalue()


def fmt(x: float) -> str:
    """Deterministic float formatting for CSV output."""
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return f"{float(x):.12g}"
