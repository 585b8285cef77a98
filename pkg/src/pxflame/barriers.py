"""Gaussian annulus barrier and the monotonicity of the p(x)-Laplacian flux."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import extract_free_boundary_report
from .exponent import ExponentField
from .grid import ScalarField, interpolate
from .solver import p_laplacian


@dataclass(frozen=True)
class BarrierSpec:
    """Radial barrier of height ``amplitude`` on the sphere of radius delta/4, zero at radius delta."""

    center: tuple[float, ...]
    mu: float
    delta: float
    amplitude: float
    lower_bound: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        for name in ("mu", "delta", "amplitude", "lower_bound"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be finite and positive")
        if self.delta > self.amplitude:
            raise ValueError("barrier needs delta <= amplitude")

    @property
    def scale(self) -> float:
        """Prefactor A / (exp(-mu/16) - exp(-mu))."""
        return self.amplitude / (np.exp(-self.mu / 16.0) - np.exp(-self.mu))

    def radius(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.norm(x - np.asarray(self.center), axis=1)


def barrier_value(spec: BarrierSpec, x):
    """Evaluate the barrier at one point (returns float) or at an (m, d) array of points."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim <= 1 and arr.size == len(spec.center)
    r = spec.radius(arr.reshape(1, -1) if single else arr.reshape(-1, len(spec.center)))
    val = spec.scale * (np.exp(-spec.mu * r**2 / spec.delta**2) - np.exp(-spec.mu))
    return float(val[0]) if single else val


def laplacian_closed_form(spec: BarrierSpec, r, dim: int):
    """Ordinary Laplacian of the barrier at radius r (the p = 2 case)."""
    r = np.asarray(r, dtype=float)
    mu, d = spec.mu, spec.delta
    return spec.scale * np.exp(-mu * r**2 / d**2) * (4 * mu**2 * r**2 / d**4 - 2 * dim * mu / d**2)


@dataclass
class BarrierCheck:
    minimum: float
    node_minimum: float
    sample_minimum: float
    argmin: np.ndarray
    n_nodes: int
    closed_form_minimum: float | None

    @property
    def holds(self) -> bool:
        return self.minimum > 0


def barrier_subsolution_check(spec: BarrierSpec, p: ExponentField, n_samples: int = 1000,
                              seed: int = 0) -> BarrierCheck:
    """Minimum of the discrete p(x)-Laplacian of the barrier over the open annulus.

    Every grid node in the annulus is used, plus ``n_samples`` random points where the
    nodal operator is linearly interpolated (only cells whose corners are all in the
    annulus contribute, so interpolation never mixes in values from outside).
    """
    grid = p.grid
    if grid.dim != len(spec.center):
        raise ValueError("barrier and grid dimensions differ")
    c = np.asarray(spec.center)
    if np.any(c - spec.delta < np.asarray(grid.lower)) or np.any(c + spec.delta > np.asarray(grid.upper)):
        raise ValueError("annulus is not inside the grid domain")
    psi = ScalarField(grid, barrier_value(spec, grid.points).reshape(grid.shape))
    lap = p_laplacian(psi, p, delta=0.0)
    r = spec.radius(grid.points)
    inner = grid.interior_mask.reshape(-1)
    ann = (r > spec.delta / 4) & (r < spec.delta) & inner
    if not np.any(ann):
        raise ValueError("no grid nodes inside the annulus")
    vals = lap.flat[ann]
    k = int(np.argmin(vals))
    node_min = float(vals[k])
    argmin = grid.points[ann][k]

    rng = np.random.default_rng(seed)
    pts = []
    h = grid.h
    while len(pts) < n_samples:
        m = 4 * n_samples
        rad = rng.uniform(spec.delta / 4 + 2 * h, spec.delta - 2 * h, m)
        if grid.dim == 1:
            cand = c + rad[:, None] * rng.choice([-1.0, 1.0], m)[:, None]
        else:
            th = rng.uniform(0, 2 * np.pi, m)
            cand = c + rad[:, None] * np.stack([np.cos(th), np.sin(th)], axis=1)
        pts.extend(cand[: n_samples - len(pts)])
    pts = np.asarray(pts)
    sample_min = float(np.min(interpolate(lap, pts))) if n_samples else np.inf
    if sample_min < node_min:
        argmin = pts[int(np.argmin(interpolate(lap, pts)))]

    closed = None
    if p.is_constant and p.p_min == 2.0:
        closed = float(np.min(laplacian_closed_form(spec, r[ann], grid.dim)))
    return BarrierCheck(min(node_min, sample_min), node_min, sample_min, argmin, int(ann.sum()), closed)


def _flux(v: np.ndarray, p: np.ndarray) -> np.ndarray:
    mag = np.linalg.norm(v, axis=-1)
    safe = np.where(mag > 0, mag, 1.0)
    return np.where(mag[..., None] > 0, (safe ** (p - 2.0))[..., None] * v, 0.0)


def monotonicity_check(eta, xi, p_val):
    """(lhs, rhs) of the strict monotonicity inequality for A(xi) = |xi|^(p-2) xi.

    lhs is |eta - xi|^p for p >= 2 and |eta - xi|^2 (|eta| + |xi|)^(p-2) for p < 2;
    rhs is (A(eta) - A(xi)) . (eta - xi). Works on single vectors or stacked arrays.
    """
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    p = np.asarray(p_val, dtype=float)
    if np.any(p <= 1):
        raise ValueError("exponent must exceed 1")
    diff = eta - xi
    dn = np.linalg.norm(diff, axis=-1)
    rhs = np.sum((_flux(eta, p) - _flux(xi, p)) * diff, axis=-1)
    s = np.linalg.norm(eta, axis=-1) + np.linalg.norm(xi, axis=-1)
    safe = np.where(s > 0, s, 1.0)
    lhs = np.where(p >= 2, dn**p, np.where(s > 0, dn**2 * safe ** (p - 2.0), 0.0))
    if np.ndim(lhs) == 0:
        return float(lhs), float(rhs)
    return lhs, rhs


def monotonicity_constant_bound(p_val: float) -> float:
    """Classical constant: 2^(p-2) for p >= 2 and 1/(p-1) for p < 2."""
    return 2.0 ** (p_val - 2.0) if p_val >= 2 else 1.0 / (p_val - 1.0)


def calibrate_monotonicity(p_val: float, n: int = 10_000, dim: int = 2, seed: int = 0) -> float:
    """Empirical smallest C with lhs <= C rhs on random vector pairs."""
    rng = np.random.default_rng(seed)
    eta = rng.normal(size=(n, dim)) * np.exp(rng.uniform(-3, 3, (n, 1)))
    xi = rng.normal(size=(n, dim)) * np.exp(rng.uniform(-3, 3, (n, 1)))
    lhs, rhs = monotonicity_check(eta, xi, np.full(n, p_val))
    keep = rhs > 0
    return float(np.max(lhs[keep] / rhs[keep]))


@dataclass
class ComparisonConfiguration:
    spec: BarrierSpec
    max_violation: float
    n_nodes: int


def barrier_below_solution(u: ScalarField, eps: float, p: ExponentField, center, mu: float = 64.0,
                           n_ring: int = 256) -> ComparisonConfiguration:
    """Place the barrier in the largest ball around ``center`` inside ``{u > eps}`` and compare.

    delta is the distance to the interpolated level set ``{u = eps}`` (so u >= eps on the
    closed ball up to interpolation error), the amplitude is the infimum of u - eps over
    the inner ball B_{delta/4}. Returns max(psi - (u - eps)) over the nodes of the
    closed outer ball minus the open inner ball.
    """
    grid = u.grid
    x0 = np.asarray(center, dtype=float).reshape(-1)
    low = u.flat <= eps
    if not np.any(low):
        raise ValueError("u exceeds eps everywhere")
    d = np.linalg.norm(grid.points - x0, axis=1)
    level = extract_free_boundary_report(u, eps).positions
    delta = float(d[low].min())
    if level.size:
        delta = min(delta, float(np.linalg.norm(level - x0, axis=1).min()))
    if grid.distance_to_boundary(x0)[0] < delta:
        raise ValueError("ball around the center leaves the domain")
    inner_vals = np.concatenate([
        u.flat[d <= delta / 4],
        np.atleast_1d(interpolate(u, _ring(x0, delta / 4, n_ring))),
        [interpolate(u, x0)],
    ])
    amp = float(inner_vals.min()) - eps
    spec = BarrierSpec(tuple(x0), mu, delta, amp, 1.0)
    ann = (d >= delta / 4) & (d <= delta)
    psi = barrier_value(spec, grid.points[ann])
    gap = psi - (u.flat[ann] - eps)
    return ComparisonConfiguration(spec, float(gap.max()), int(ann.sum()))


def _ring(x0, r, n):
    if x0.size == 1:
        return np.array([[x0[0] - r], [x0[0] + r]])
    th = 2 * np.pi * np.arange(n) / n
    return x0 + r * np.stack([np.cos(th), np.sin(th)], axis=1)
