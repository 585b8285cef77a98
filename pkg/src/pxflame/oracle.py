"""Quadrature oracle for one-dimensional travelling-front profiles.

With constant exponent p0 and no forcing, a 1D solution satisfies the first
integral ``((p0 - 1) / p0) |u'|^p0 = B_eps(u)`` across the reaction layer, so the
profile is recovered by the quadrature

    x(u) = int_u^eps ds / ((p0 / (p0 - 1)) B_eps(s))^(1/p0)

which shares no code with the finite difference solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

from .grid import Grid, ScalarField
from .reaction import ReactionProfile, lambda_star


@dataclass(frozen=True, eq=False)
class Profile1D:
    """Reaction layer profile; ``x`` is the distance from the ``u = eps`` edge."""

    eps: float
    p0: float
    reaction: ReactionProfile
    u: np.ndarray
    x: np.ndarray
    lambda_edge: float

    @property
    def mass(self) -> float:
        return self.reaction.mass

    @property
    def u_floor(self) -> float:
        return float(self.u[-1])

    @property
    def width(self) -> float:
        """Distance from the edge at which the profile reaches ``u_floor``."""
        return float(self.x[-1])

    def slope(self, u):
        """|u'| as a function of the level u."""
        c = self.p0 / (self.p0 - 1.0)
        return (c * self.reaction.big_b_eps(u, self.eps)) ** (1.0 / self.p0)

    def x_of(self, u: float) -> float:
        """Distance from the edge by direct quadrature (no table lookup)."""
        return _segment(self, float(u), self.eps)

    def u_at(self, dist):
        """Profile value at distance ``dist >= 0`` past the edge; zero beyond the floor."""
        d = np.asarray(dist, dtype=float)
        spline = _spline(self)
        inside = d <= self.width
        out = np.where(inside, np.exp(spline(np.clip(d, 0.0, self.width))), 0.0)
        return np.where(d < 0, np.nan, out)


def _spline(profile: Profile1D) -> CubicSpline:
    sp = profile.__dict__.get("_spline")
    if sp is None:
        sp = CubicSpline(profile.x, np.log(profile.u))
        object.__setattr__(profile, "_spline", sp)
    return sp


def _segment(profile: Profile1D, a: float, b: float) -> float:
    val, _ = integrate.quad(
        lambda s: 1.0 / profile.slope(s), a, b, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return val


def profile_quadrature(reaction: ReactionProfile, p0: float, eps: float,
                       u_floor: float | None = None, n: int = 1200) -> Profile1D:
    """Tabulate the reaction-layer profile on a log-spaced grid of levels."""
    if not p0 > 1:
        raise ValueError("p0 must exceed 1")
    if u_floor is None:
        u_floor = 1e-6 * eps
    if not 0 < u_floor < eps:
        raise ValueError("need 0 < u_floor < eps")
    levels = eps * np.logspace(0.0, np.log10(u_floor / eps), n)
    # also resolve the top of the layer where log spacing is coarse
    top = eps * (1.0 - np.linspace(0.0, 0.5, n // 4) ** 2)
    levels = np.unique(np.concatenate([levels, top]))[::-1]
    stub = Profile1D(eps, p0, reaction, levels, np.zeros_like(levels), 0.0)
    pieces = np.empty(levels.size - 1)
    for k in range(levels.size - 1):
        val, err = integrate.quad(
            lambda s: 1.0 / stub.slope(s), levels[k + 1], levels[k],
            epsabs=1e-13, epsrel=1e-12, limit=200, full_output=False,
        )
        if not np.isfinite(val) or err > 1e-10:
            raise RuntimeError(f"quadrature failed on [{levels[k + 1]:.3g}, {levels[k]:.3g}]")
        pieces[k] = val
    x = np.concatenate([[0.0], np.cumsum(pieces)])
    lam = lambda_star(p0, reaction.mass)
    return Profile1D(eps, p0, reaction, levels, x, lam)


def compose_full_profile(profile: Profile1D, a: float, grid: Grid) -> ScalarField:
    """Affine ramp of slope ``lambda_edge`` from ``u(lower) = a`` down to ``eps``, then the layer."""
    if grid.dim != 1:
        raise ValueError("1D grids only")
    if not a > profile.eps:
        raise ValueError("boundary value must exceed eps")
    x = grid.axes[0] - grid.lower[0]
    edge = (a - profile.eps) / profile.lambda_edge
    if grid.extents[0] < edge + profile.width:
        raise ValueError("domain too short to hold the profile down to u_floor")
    u = np.where(x <= edge, a - profile.lambda_edge * x, 0.0)
    past = x > edge
    u[past] = profile.u_at(x[past] - edge)
    return ScalarField(grid, u)


def edge_position(profile: Profile1D, a: float, lower: float = 0.0) -> float:
    return lower + (a - profile.eps) / profile.lambda_edge


def oracle_reaction_integral(profile: Profile1D, p0: float | None = None) -> float:
    """int beta_eps(u(x)) dx through the layer, via the substitution w = B_eps(u)."""
    p0 = profile.p0 if p0 is None else p0
    c = ((p0 - 1.0) / p0) ** (1.0 / p0)
    val, _ = integrate.quad(lambda w: c, 0.0, profile.mass, weight="alg", wvar=(-1.0 / p0, 0.0))
    return val


def profile_reaction_integral(profile: Profile1D) -> float:
    """Same integral taken directly over the profile, int beta_eps(s) / |u'(s)| ds."""
    r, eps = profile.reaction, profile.eps
    val, _ = integrate.quad(
        lambda s: r.beta_eps(s, eps) / profile.slope(s), profile.u_floor, eps,
        epsabs=1e-12, epsrel=1e-11, limit=400,
    )
    return val
