"""Free boundary extraction and limit diagnostics for computed solutions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from skimage import measure

from .exponent import ExponentField
from .grid import (
    ScalarField,
    gradient,
    interpolate,
    interpolate_gradient,
    sample_average,
)
from .reaction import ReactionProfile, lambda_star

DEGENERATE_GRAD = 1e-12


@dataclass
class FreeBoundaryPoint:
    position: np.ndarray
    normal: np.ndarray
    slope: float = float("nan")
    lambda_star: float = float("nan")
    rel_error: float = float("nan")


@dataclass
class FreeBoundaryReport:
    points: list[FreeBoundaryPoint]
    threshold: float
    curves: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def positions(self) -> np.ndarray:
        if not self.points:
            return np.empty((0, 0))
        return np.array([pt.position for pt in self.points])

    @property
    def slopes(self) -> np.ndarray:
        return np.array([pt.slope for pt in self.points])

    @property
    def rel_errors(self) -> np.ndarray:
        return np.array([pt.rel_error for pt in self.points])

    @property
    def mean_slope(self) -> float:
        return float(np.mean(self.slopes)) if self.points else float("nan")

    @property
    def max_rel_error(self) -> float:
        return float(np.max(self.rel_errors)) if self.points else float("nan")

    @property
    def mean_rel_error(self) -> float:
        return float(np.mean(self.rel_errors)) if self.points else float("nan")

    @property
    def length(self) -> float:
        """Total curve length in 2D, number of points in 1D."""
        if not self.curves:
            return float(len(self.points))
        return float(sum(np.linalg.norm(np.diff(c, axis=0), axis=1).sum() for c in self.curves))


# -- extraction ----------------------------------------------------------------


def free_boundary_curves(u: ScalarField, threshold: float) -> list[np.ndarray]:
    """Polylines of the ``threshold`` level set in physical coordinates (2D only)."""
    grid = u.grid
    out = []
    for c in measure.find_contours(u.values, threshold):
        pts = np.asarray(grid.lower) + c * np.asarray(grid.spacing)
        out.append(pts)
    return out


def extract_free_boundary(u: ScalarField, threshold: float) -> list[FreeBoundaryPoint]:
    """Points of the ``threshold`` level with inward unit normals (into ``{u > threshold}``).

    Crossings where |grad u| is below 1e-12 are degenerate and dropped.
    """
    return extract_free_boundary_report(u, threshold).points


def extract_free_boundary_report(u: ScalarField, threshold: float) -> FreeBoundaryReport:
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    grid = u.grid
    if grid.dim == 1:
        x = grid.axes[0]
        v = u.values
        pos = v > threshold
        cross = np.nonzero(pos[:-1] != pos[1:])[0]
        pts = []
        (h,) = grid.spacing
        for i in cross:
            a, b = v[i], v[i + 1]
            slope = (b - a) / h
            if abs(slope) < DEGENERATE_GRAD:
                continue
            xs = x[i] + (threshold - a) / slope
            nu = np.array([np.sign(slope)])
            pts.append(FreeBoundaryPoint(np.array([xs]), nu))
        return FreeBoundaryReport(pts, threshold)

    curves = free_boundary_curves(u, threshold)
    curves = [c[:-1] if len(c) > 1 and np.allclose(c[0], c[-1]) else c for c in curves]
    if not curves:
        return FreeBoundaryReport([], threshold)
    allpts = np.concatenate(curves)
    g = interpolate_gradient(u, allpts)
    mag = np.linalg.norm(g, axis=1)
    pts = [
        FreeBoundaryPoint(allpts[k].copy(), g[k] / mag[k])
        for k in range(len(allpts))
        if mag[k] >= DEGENERATE_GRAD
    ]
    closed = [np.vstack([c, c[:1]]) if _is_closed(c, grid) else c for c in curves]
    return FreeBoundaryReport(pts, threshold, closed)


def _is_closed(c: np.ndarray, grid) -> bool:
    ends_on_boundary = grid.distance_to_boundary(c[[0, -1]]).max() < 1e-9
    return len(c) > 2 and not ends_on_boundary


# -- slopes ----------------------------------------------------------------------


def slope_report(u: ScalarField, p: ExponentField, points, mass: float, threshold: float,
                 k: int = 4, skip_outside: bool = False) -> FreeBoundaryReport:
    """Measured |grad u| at each point versus the limit slope at the local exponent.

    The slope is the two-point Richardson extrapolation of
    ``(u(x0 + s nu) - threshold) / s`` with ``s = k h`` and ``2 k h``.
    """
    if isinstance(points, FreeBoundaryReport):
        curves = points.curves
        points = points.points
    else:
        curves = []
    grid = u.grid
    s1 = k * grid.h
    s2 = 2 * s1
    kept = []
    for pt in points:
        probes = np.array([pt.position + s1 * pt.normal, pt.position + s2 * pt.normal])
        if not np.all(grid.contains(probes)):
            if skip_outside:
                continue
            raise ValueError(f"slope probes leave the domain at {pt.position}")
        vals = interpolate(u, probes)
        m1 = (vals[0] - threshold) / s1
        m2 = (vals[1] - threshold) / s2
        slope = max(2.0 * m1 - m2, 0.0)
        p_loc = interpolate(ScalarField(grid, p.values), pt.position)
        lam = lambda_star(p_loc, mass)
        kept.append(FreeBoundaryPoint(pt.position, pt.normal, slope, lam, abs(slope - lam) / lam))
    return FreeBoundaryReport(kept, threshold, curves)


def lipschitz_monitor(sweep, margin: float) -> list[float]:
    """Max |grad u| over gradient samples at distance >= margin from the boundary, per result."""
    out = []
    for res in sweep:
        u = getattr(res, "u", res)
        grid = u.grid
        if not margin > 0 or 2 * margin >= min(grid.extents):
            raise ValueError("margin must be positive and smaller than half the domain")
        g = gradient(u)
        keep = grid.distance_to_boundary(g.locations) >= margin
        out.append(float(g.magnitude[keep].max()) if np.any(keep) else 0.0)
    return out


def upper_gradient_excess(u: ScalarField, report: FreeBoundaryReport, mass: float, p: ExponentField,
                          radius_cells: int = 5) -> float:
    """max over FB points of max |grad u| / lambda* on the positive side within ``radius_cells`` h."""
    grid = u.grid
    g = gradient(u)
    vals = sample_average(u)
    loc = g.locations
    tree = cKDTree(loc)
    worst = 0.0
    pfield = ScalarField(grid, p.values)
    for pt in report.points:
        idx = tree.query_ball_point(pt.position, radius_cells * grid.h)
        idx = [i for i in idx if vals[i] > report.threshold]
        if not idx:
            continue
        lam = lambda_star(interpolate(pfield, pt.position), mass)
        worst = max(worst, float(g.magnitude[idx].max()) / lam)
    return worst


# -- Harnack ---------------------------------------------------------------------


@dataclass
class HarnackSample:
    center: np.ndarray
    radius: float
    sup: float
    inf: float
    mu: float
    quotient: float


def harnack_quotient(u: ScalarField, f: ScalarField, p: ExponentField, center, radius: float,
                     positivity: float = 0.0, n_ring: int = 64) -> HarnackSample:
    """sup_{B_R} u / (inf_{B_R} u + R + R mu) with mu = (R ||f||_inf(B_4R))^(1/(p_-^{4R} - 1))."""
    grid = u.grid
    x0 = np.asarray(center, dtype=float).reshape(-1)
    R = float(radius)
    if not 0 < R <= 1:
        raise ValueError("need 0 < R <= 1")
    if grid.distance_to_boundary(x0)[0] < 4 * R - 1e-12:
        raise ValueError("B_4R must lie inside the domain")
    d = np.linalg.norm(grid.points - x0, axis=1)
    big = d <= 4 * R
    ring4 = _sphere_points(x0, 4 * R, n_ring)
    if np.any(u.flat[big] <= positivity) or np.any(interpolate(u, ring4) <= positivity):
        raise ValueError("u must be positive on B_4R")
    ring = _sphere_points(x0, R, n_ring)
    vals = np.concatenate([u.flat[d <= R], interpolate(u, ring), [interpolate(u, x0)]])
    fmax = float(np.abs(f.flat[big]).max()) if np.any(big) else abs(interpolate(f, x0))
    p_lo, _ = p.local_range(x0, 4 * R)
    mu = (R * fmax) ** (1.0 / (p_lo - 1.0))
    sup, inf = float(vals.max()), float(vals.min())
    return HarnackSample(x0, R, sup, inf, mu, sup / (inf + R + R * mu))


def admissible_balls(u: ScalarField, n: int, radii=(None, None), positivity: float = 0.0,
                     seed: int = 0, max_tries: int = 100_000) -> list[tuple[np.ndarray, float]]:
    """Random (center, R) with B_4R inside the domain and inside ``{u > positivity}``."""
    grid = u.grid
    rng = np.random.default_rng(seed)
    rmin = radii[0] if radii[0] is not None else 2 * grid.h
    rmax = radii[1] if radii[1] is not None else min(grid.extents) / 8
    lo, hi = np.asarray(grid.lower), np.asarray(grid.upper)
    pos = grid.points[u.flat > positivity]
    tree = cKDTree(grid.points[u.flat <= positivity]) if np.any(u.flat <= positivity) else None
    balls = []
    for _ in range(max_tries):
        if len(balls) == n:
            break
        R = float(np.exp(rng.uniform(np.log(rmin), np.log(rmax))))
        c = pos[rng.integers(len(pos))] + rng.uniform(-0.5, 0.5, grid.dim) * np.asarray(grid.spacing)
        if np.any(c - 4 * R < lo) or np.any(c + 4 * R > hi):
            continue
        # keep a cell of clearance from the non-positive set
        if tree is not None and tree.query(c)[0] <= 4 * R + 2 * grid.h:
            continue
        balls.append((c, R))
    return balls


# -- nondegeneracy ----------------------------------------------------------------


@dataclass
class NondegeneracyReport:
    positions: np.ndarray
    radii: np.ndarray
    ball_average: np.ndarray
    sphere_average: np.ndarray
    sup: np.ndarray
    zero_density: np.ndarray

    def min_ratio(self) -> float:
        return float(min(self.ball_average.min(), self.sphere_average.min(), self.sup.min()))

    def spread(self) -> float:
        """Largest factor between the three ratios at a matched (point, r)."""
        stack = np.stack([self.ball_average, self.sphere_average, self.sup])
        return float(np.max(stack.max(axis=0) / stack.min(axis=0)))


def _sphere_points(x0, r, n):
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size == 1:
        return np.array([[x0[0] - r], [x0[0] + r]])
    th = 2 * np.pi * (np.arange(n) + 0.5) / n
    return x0 + r * np.stack([np.cos(th), np.sin(th)], axis=1)


def _ball_quadrature(x0, r, n_r: int = 48, n_th: int = 128):
    """Points and normalised weights for the average over B_r(x0)."""
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size == 1:
        t, w = np.polynomial.legendre.leggauss(4 * n_r)
        # composite: split at the centre so a kink there is a panel edge
        pts = np.concatenate([x0[0] - r * (1 + t) / 2, x0[0] + r * (1 + t) / 2])
        wts = np.concatenate([w, w]) / 4.0
        return pts[:, None], wts
    rho = (np.arange(n_r) + 0.5) / n_r
    th = 2 * np.pi * (np.arange(n_th) + 0.5) / n_th
    R, T = np.meshgrid(rho, th, indexing="ij")
    pts = x0 + r * np.stack([(R * np.cos(T)).ravel(), (R * np.sin(T)).ravel()], axis=1)
    wts = R.ravel() / R.sum()
    return pts, wts


def nondegeneracy_report(u: ScalarField, points, radii, zero_threshold: float) -> NondegeneracyReport:
    """Ball average / r, sphere average / r, sup / r and zero-set density per (point, r)."""
    if isinstance(points, FreeBoundaryReport):
        points = points.points
    grid = u.grid
    pos = np.array([np.asarray(getattr(pt, "position", pt), dtype=float).reshape(-1) for pt in points])
    radii = np.asarray(radii, dtype=float)
    shape = (len(pos), radii.size)
    ball, sph, sup, dens = (np.empty(shape) for _ in range(4))
    for i, x0 in enumerate(pos):
        for j, r in enumerate(radii):
            if grid.distance_to_boundary(x0)[0] < r - 1e-12:
                raise ValueError(f"ball of radius {r:g} at {x0} is clipped by the boundary")
            bp, bw = _ball_quadrature(x0, r)
            bv = interpolate(u, bp)
            sv = interpolate(u, _sphere_points(x0, r, 256))
            ball[i, j] = float(bw @ bv) / r
            sph[i, j] = float(sv.mean()) / r
            sup[i, j] = max(float(bv.max()), float(sv.max())) / r
            dens[i, j] = float(bw @ (bv < zero_threshold))
    return NondegeneracyReport(pos, radii, ball, sph, sup, dens)


# -- chi and reaction concentration ----------------------------------------------------


def chi_field(u: ScalarField, eps: float, reaction: ReactionProfile) -> ScalarField:
    return ScalarField(u.grid, reaction.big_b_eps(u.values, eps))


def transition_fraction(chi: ScalarField, mass: float, lo: float = 0.05, hi: float = 0.95) -> float:
    """Fraction of nodes where chi is strictly between lo*M and hi*M."""
    v = chi.values
    return float(np.mean((v > lo * mass) & (v < hi * mass)))


def reaction_concentration(u: ScalarField, eps: float, reaction: ReactionProfile, p: ExponentField,
                           report: FreeBoundaryReport, width: float,
                           allow_clipping: bool = False) -> float | None:
    """Integral of beta_eps(u) over a strip of half-width ``width`` per unit free-boundary measure.

    Returns None when there is no free boundary.
    """
    if not report.points:
        return None
    grid = u.grid
    vol = grid.ops.node_volume
    beta = reaction.beta_eps(u.flat, eps)
    pos = report.positions
    if not allow_clipping and np.any(grid.distance_to_boundary(pos) < width):
        raise ValueError("strip leaves the domain")
    if grid.dim == 1:
        x = grid.points[:, 0]
        total = 0.0
        for xf in pos[:, 0]:
            sel = np.abs(x - xf) <= width
            total += float(vol[sel] @ beta[sel])
        return total / len(pos)
    dense = []
    for c in report.curves:
        for a, b in zip(c[:-1], c[1:]):
            m = max(2, int(np.ceil(np.linalg.norm(b - a) / (0.25 * grid.h))) + 1)
            dense.append(a + np.linspace(0, 1, m)[:, None] * (b - a))
    tree = cKDTree(np.concatenate(dense))
    dist, _ = tree.query(grid.points)
    sel = dist <= width
    return float(vol[sel] @ beta[sel]) / report.length


def expected_concentration(report: FreeBoundaryReport, p: ExponentField, mass: float) -> float:
    """Mean of lambda*(x)^(p(x) - 1) over the free-boundary points."""
    pf = ScalarField(p.grid, p.values)
    pv = interpolate(pf, report.positions)
    return float(np.mean(lambda_star(pv, mass) ** (pv - 1.0)))


# -- identity for the domain variation ------------------------------------------------------


@dataclass(frozen=True)
class Bump:
    """Smooth compactly supported test function exp(1 - 1 / (1 - |x - c|^2 / r^2))."""

    center: tuple[float, ...]
    radius: float
    amplitude: float = 1.0

    def _rho2(self, pts):
        c = np.asarray(self.center, dtype=float)
        return np.sum((pts - c) ** 2, axis=1) / self.radius**2

    def value(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        q = self._rho2(pts)
        inside = q < 1
        out = np.zeros(len(pts))
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - q[inside]))
        return out

    def gradient(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        q = self._rho2(pts)
        inside = q < 1
        val = self.value(pts)
        fac = np.zeros(len(pts))
        fac[inside] = -2.0 / (self.radius**2 * (1.0 - q[inside]) ** 2)
        return (val * fac)[:, None] * (pts - np.asarray(self.center, dtype=float))


def identity_4_2_check(u: ScalarField, eps: float, p: ExponentField, f: ScalarField, psi,
                       reaction: ReactionProfile) -> tuple[float, float, float]:
    """Both sides of the domain-variation identity in the x1 direction, and their gap.

    lhs = -int |Du|^p/p psi_1 + int |Du|^(p-2) (Du . Dpsi) u_1 + int f u_1 psi
    rhs =  int |Du|^p/p log|Du| p_1 psi - int |Du|^p/p^2 p_1 psi + int B_eps(u) psi_1
    """
    grid = u.grid
    grid.check_same(p.grid, f.grid)
    if psi is None:
        return 0.0, 0.0, 0.0
    if isinstance(psi, Bump):
        c = np.asarray(psi.center, dtype=float)
        if np.any(c - psi.radius <= np.asarray(grid.lower)) or np.any(c + psi.radius >= np.asarray(grid.upper)):
            raise ValueError("test function support touches the boundary")
    ops = grid.ops
    w = ops.weights
    loc = ops.centers
    g = gradient(u).values
    mag = np.linalg.norm(g, axis=1)
    ps = p.at_samples()
    p1 = ops.diff[0] @ p.flat
    phi = psi.value(loc)
    dphi = psi.gradient(loc)
    if not np.any(phi) and not np.any(dphi):
        return 0.0, 0.0, 0.0
    pos = mag > 0
    safe = np.where(pos, mag, 1.0)
    powp = np.where(pos, safe**ps, 0.0)
    powp2 = np.where(pos, safe ** (ps - 2.0), 0.0)
    logm = np.where(pos, np.log(safe), 0.0)
    u1 = g[:, 0]
    fs = sample_average(f)
    bs = sample_average(ScalarField(grid, reaction.big_b_eps(u.values, eps)))
    lhs = (
        -np.sum(w * powp / ps * dphi[:, 0])
        + np.sum(w * powp2 * np.einsum("ij,ij->i", g, dphi) * u1)
        + np.sum(w * fs * u1 * phi)
    )
    rhs = (
        np.sum(w * powp / ps * logm * p1 * phi)
        - np.sum(w * powp / ps**2 * p1 * phi)
        + np.sum(w * bs * dphi[:, 0])
    )
    return float(lhs), float(rhs), float(abs(lhs - rhs))
