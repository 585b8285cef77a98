"""Variable exponents and the variable exponent Lebesgue space toolkit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, GridMismatchError, ScalarField, VectorField, gradient, interpolate

LUX_RTOL = 1e-10


def max_neighbour_slope(grid: Grid, v: np.ndarray) -> float:
    """Largest |p_i - p_j| / dist over nodes sharing a cell."""
    v = np.asarray(v, dtype=float).reshape(grid.shape)
    out = 0.0
    for ax, h in enumerate(grid.spacing):
        out = max(out, float(np.abs(np.diff(v, axis=ax)).max() / h))
    if grid.dim == 2:
        d = np.hypot(*grid.spacing)
        out = max(out, float(np.abs(v[1:, 1:] - v[:-1, :-1]).max() / d))
        out = max(out, float(np.abs(v[1:, :-1] - v[:-1, 1:]).max() / d))
    return out


@dataclass(frozen=True, eq=False)
class ExponentField:
    """Nodal exponent values with declared bounds and Lipschitz constant."""

    grid: Grid
    values: np.ndarray
    p_min: float
    p_max: float
    lipschitz: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(self.grid.shape)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if not 1.0 < self.p_min <= self.p_max < np.inf:
            raise ValueError("need 1 < p_min <= p_max < inf")
        tol = 1e-12 * self.p_max
        if v.min() < self.p_min - tol or v.max() > self.p_max + tol:
            raise ValueError("exponent values outside the declared [p_min, p_max]")
        slope = max_neighbour_slope(self.grid, v)
        if slope > self.lipschitz * (1 + 1e-9) + 1e-12:
            raise ValueError(
                f"discrete Lipschitz constant {slope:.6g} exceeds declared {self.lipschitz:.6g}"
            )

    @classmethod
    def constant(cls, grid: Grid, p: float) -> "ExponentField":
        return cls(grid, np.full(grid.shape, float(p)), float(p), float(p), 0.0)

    @classmethod
    def from_values(cls, grid: Grid, values, lipschitz: float | None = None) -> "ExponentField":
        v = np.asarray(values, dtype=float).reshape(grid.shape)
        L = max_neighbour_slope(grid, v) if lipschitz is None else lipschitz
        return cls(grid, v, float(v.min()), float(v.max()), float(L))

    @classmethod
    def from_function(cls, grid: Grid, fn, lipschitz: float | None = None) -> "ExponentField":
        return cls.from_values(grid, grid.evaluate(fn).values, lipschitz)

    @property
    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    @property
    def is_constant(self) -> bool:
        return self.p_min == self.p_max

    def at_samples(self) -> np.ndarray:
        """Exponent at gradient samples: mean over the sample's vertices."""
        return self.grid.ops.average @ self.flat

    def gradient(self) -> VectorField:
        return gradient(ScalarField(self.grid, self.values))

    def conjugate(self) -> "ExponentField":
        q = self.values / (self.values - 1.0)
        return ExponentField.from_values(self.grid, q)

    def local_range(self, center, radius: float) -> tuple[float, float]:
        """(inf, sup) of p over the nodes of a closed ball."""
        d = np.linalg.norm(self.grid.points - np.asarray(center, dtype=float), axis=1)
        sel = self.flat[d <= radius + 1e-12]
        if sel.size == 0:
            val = interpolate(ScalarField(self.grid, self.values), center)
            return val, val
        return float(sel.min()), float(sel.max())


def _check(u_grid: Grid, p: ExponentField) -> None:
    if not u_grid.same_as(p.grid):
        raise GridMismatchError("field and exponent live on different grids")


def _modular_raw(values: np.ndarray, weights: np.ndarray, exps: np.ndarray) -> float:
    a = np.abs(values)
    with np.errstate(divide="ignore"):
        terms = np.where(a > 0, np.exp(exps * np.log(np.where(a > 0, a, 1.0))), 0.0)
    return float(np.sum(weights * terms))


def _luxemburg_raw(values, weights, exps, rtol: float = LUX_RTOL) -> float:
    values = np.abs(np.asarray(values, dtype=float))
    if not np.any(values > 0):
        return 0.0
    rho = _modular_raw(values, weights, exps)
    pmin, pmax = float(exps.min()), float(exps.max())
    a, b = rho ** (1.0 / pmin), rho ** (1.0 / pmax)
    lo, hi = min(a, b), max(a, b)
    f = lambda lam: _modular_raw(values / lam, weights, exps) - 1.0  # noqa: E731
    # guard against rounding at the bracket ends
    while f(lo) < 0:
        lo *= 0.5
    while f(hi) > 0:
        hi *= 2.0
    if hi - lo <= rtol * hi:
        return 0.5 * (lo + hi)
    # bisection in log(lambda): the map is monotone decreasing
    llo, lhi = np.log(lo), np.log(hi)
    while lhi - llo > rtol * 0.25:
        mid = 0.5 * (llo + lhi)
        if f(np.exp(mid)) > 0:
            llo = mid
        else:
            lhi = mid
    return float(np.exp(0.5 * (llo + lhi)))


def modular(u: ScalarField, p: ExponentField) -> float:
    """Quadrature of int |u|^p(x) dx."""
    _check(u.grid, p)
    return _modular_raw(u.flat, u.grid.ops.node_volume, p.flat)


def luxemburg_norm(u: ScalarField, p: ExponentField) -> float:
    """inf{lam > 0 : modular(u / lam) <= 1}, by bisection to relative 1e-10."""
    _check(u.grid, p)
    return _luxemburg_raw(u.flat, u.grid.ops.node_volume, p.flat)


def gradient_modular(u: ScalarField, p: ExponentField) -> float:
    _check(u.grid, p)
    g = gradient(u)
    return _modular_raw(g.magnitude, u.grid.ops.weights, p.at_samples())


def gradient_norm(u: ScalarField, p: ExponentField) -> float:
    """Luxemburg norm of |grad u| with the exponent averaged onto samples."""
    _check(u.grid, p)
    g = gradient(u)
    return _luxemburg_raw(g.magnitude, u.grid.ops.weights, p.at_samples())


def modular_bracket(u: ScalarField, p: ExponentField) -> tuple[float, float]:
    """Lower and upper bounds of the norm in terms of the modular."""
    rho = modular(u, p)
    a, b = rho ** (1.0 / p.p_min), rho ** (1.0 / p.p_max)
    return min(a, b), max(a, b)


def check_log_holder(p: ExponentField, max_exhaustive: int = 10_000, n_pairs: int = 1_000_000,
                     seed: int = 0) -> float:
    """Smallest C with |p(x) - p(y)| <= C / |log|x - y|| over pairs closer than 1/2.

    All pairs are scanned up to ``max_exhaustive`` nodes; above that a fixed-seed
    random subsample of ``n_pairs`` pairs is used.
    """
    pts = p.grid.points
    vals = p.flat
    n = vals.size
    best = 0.0
    if n <= max_exhaustive:
        chunk = max(1, 2_000_000 // n)
        for start in range(0, n, chunk):
            stop = min(n, start + chunk)
            d = np.linalg.norm(pts[start:stop, None, :] - pts[None, :, :], axis=2)
            dp = np.abs(vals[start:stop, None] - vals[None, :])
            ok = (d > 0) & (d < 0.5)
            if np.any(ok):
                best = max(best, float(np.max(dp[ok] * np.abs(np.log(d[ok])))))
        return best
    rng = np.random.default_rng(seed)
    i = rng.integers(0, n, n_pairs)
    j = rng.integers(0, n, n_pairs)
    d = np.linalg.norm(pts[i] - pts[j], axis=1)
    ok = (d > 0) & (d < 0.5)
    if not np.any(ok):
        return 0.0
    return float(np.max(np.abs(vals[i] - vals[j])[ok] * np.abs(np.log(d[ok]))))


def holder_inequality_check(f: ScalarField, g: ScalarField, p: ExponentField) -> float:
    """int |f||g| / (2 ||f||_p ||g||_p'); zero when the numerator vanishes."""
    _check(f.grid, p)
    _check(g.grid, p)
    if p.p_min <= 1:
        raise ValueError("conjugate exponent needs p_min > 1")
    w = f.grid.ops.node_volume
    lhs = float(np.sum(w * np.abs(f.flat) * np.abs(g.flat)))
    if lhs == 0.0:
        return 0.0
    q = p.flat / (p.flat - 1.0)
    nf = _luxemburg_raw(f.flat, w, p.flat)
    ng = _luxemburg_raw(g.flat, w, q)
    return lhs / (2.0 * nf * ng)


def poincare_ratio(u: ScalarField, p: ExponentField, atol: float = 1e-14) -> float:
    """||u||_p / ||grad u||_p for u vanishing on the boundary."""
    _check(u.grid, p)
    if np.any(np.abs(u.values[u.grid.boundary_mask]) > atol):
        raise ValueError("u must vanish on the boundary")
    den = gradient_norm(u, p)
    if den == 0.0:
        raise ValueError("grad u vanishes identically")
    return luxemburg_norm(u, p) / den
