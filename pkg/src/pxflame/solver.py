"""Regularised p(x)-Laplacian with singular reaction: energy, residual, Newton solver.

The discrete problem is the Euler-Lagrange system of

    E(u) = sum_s w_s [(delta^2 + |g_s|^2)^(p_s/2) - delta^p_s] / p_s
           + sum_i V_i [B_eps(u_i) + f_i u_i]

where ``g_s`` are the staggered gradient samples.  The residual
``div(flux(u)) - beta_eps(u) - f`` at interior nodes equals ``-dE/du_i / V_i``,
so Newton on the residual uses the (symmetric) energy Hessian.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exponent import ExponentField
from .grid import Grid, ScalarField, VectorField, divergence, gradient
from .reaction import ReactionProfile

log = logging.getLogger(__name__)


class BoundaryMismatchError(ValueError):
    """The field does not carry the problem's Dirichlet data."""


class NotConvergedError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    grid: Grid
    p: ExponentField
    f: ScalarField
    reaction: ReactionProfile
    eps: float
    boundary: ScalarField
    """Nodal field whose boundary entries are the Dirichlet data; interior entries unused."""

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        self.grid.check_same(self.p.grid, self.f.grid, self.boundary.grid)
        if np.any(self.boundary.values[self.grid.boundary_mask] < 0):
            raise ValueError("Dirichlet data must be nonnegative")

    def with_eps(self, eps: float) -> "DirichletProblem":
        return replace(self, eps=float(eps))

    def lift(self, interior: np.ndarray | None = None) -> np.ndarray:
        """Nodal array with boundary data and the given interior values."""
        u = self.boundary.flat.copy()
        inner = self.grid.interior_mask.reshape(-1)
        u[inner] = 0.0 if interior is None else interior
        return u


@dataclass(frozen=True)
class SolverConfig:
    delta: float | None = None
    tol: float = 1e-7
    max_iter: int = 200
    backtrack: float = 0.5
    min_step: float = 2.0**-30
    schedule: tuple[tuple[float, float | None], ...] = ()
    project_nonnegative: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be nonnegative")
        eps = [e for e, _ in self.schedule]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("continuation schedule must be strictly decreasing in eps")

    def delta_for(self, grid: Grid, override: float | None = None) -> float:
        if override is not None:
            return float(override)
        if self.delta is not None:
            return float(self.delta)
        return max(1e-8, grid.h)


@dataclass(frozen=True, eq=False)
class SolveResult:
    u: ScalarField
    residual_norm: float
    iterations: int
    energy: float
    converged: bool
    nonnegative: bool
    eps: float
    delta: float
    message: str = ""
    history: tuple[float, ...] = field(default=(), repr=False)


# -- pointwise flux -----------------------------------------------------------------


def _phi(t: np.ndarray, p: np.ndarray) -> np.ndarray:
    """t^((p-2)/2) with the value 0 at t = 0."""
    pos = t > 0
    safe = np.where(pos, t, 1.0)
    return np.where(pos, np.exp(0.5 * (p - 2.0) * np.log(safe)), 0.0)


def flux_values(g: np.ndarray, p: np.ndarray, delta: float) -> np.ndarray:
    """(delta^2 + |g|^2)^((p-2)/2) g for an ``(n, d)`` array of gradients."""
    t = delta**2 + np.einsum("ij,ij->i", g, g)
    return _phi(t, p)[:, None] * g


def flux_jacobian(g: np.ndarray, p: np.ndarray, delta: float) -> np.ndarray:
    """d flux_k / d g_l, shape ``(n, d, d)``."""
    t = delta**2 + np.einsum("ij,ij->i", g, g)
    phi = _phi(t, p)
    pos = t > 0
    dphi = np.where(pos, 0.5 * (p - 2.0) * phi / np.where(pos, t, 1.0), 0.0)
    d = g.shape[1]
    J = phi[:, None, None] * np.eye(d)[None] + 2.0 * dphi[:, None, None] * g[:, :, None] * g[:, None, :]
    return J


def energy_density(g: np.ndarray, p: np.ndarray, delta: float) -> np.ndarray:
    t = delta**2 + np.einsum("ij,ij->i", g, g)
    with np.errstate(divide="ignore"):
        tp = np.where(t > 0, np.exp(0.5 * p * np.log(np.where(t > 0, t, 1.0))), 0.0)
    return (tp - delta**p) / p


def flux(u: ScalarField, p: ExponentField, delta: float = 0.0) -> VectorField:
    u.grid.check_same(p.grid)
    g = gradient(u).values
    return VectorField(u.grid, flux_values(g, p.at_samples(), delta))


def p_laplacian(u: ScalarField, p: ExponentField, delta: float = 0.0) -> ScalarField:
    """Discrete div((delta^2 + |grad u|^2)^((p-2)/2) grad u) at interior nodes."""
    return divergence(flux(u, p, delta))


# -- residual, energy, Hessian --------------------------------------------------------


def _as_field(prob: DirichletProblem, u) -> ScalarField:
    if isinstance(u, SolveResult):
        u = u.u
    if not isinstance(u, ScalarField):
        u = ScalarField(prob.grid, u)
    prob.grid.check_same(u.grid)
    return u


def _check_boundary(prob: DirichletProblem, u: ScalarField, atol: float = 1e-12) -> None:
    bm = prob.grid.boundary_mask
    if np.any(np.abs(u.values[bm] - prob.boundary.values[bm]) > atol * max(1.0, np.abs(u.values).max())):
        raise BoundaryMismatchError("u does not match the Dirichlet data")


def residual(prob: DirichletProblem, u, delta: float = 0.0) -> ScalarField:
    """div(flux(u)) - beta_eps(u) - f at interior nodes, zero on the boundary."""
    u = _as_field(prob, u)
    _check_boundary(prob, u)
    r = p_laplacian(u, prob.p, delta).values - prob.reaction.beta_eps(u.values, prob.eps) - prob.f.values
    r = np.where(prob.grid.boundary_mask, 0.0, r)
    return ScalarField(prob.grid, r)


def energy(prob: DirichletProblem, u, delta: float = 0.0) -> float:
    u = _as_field(prob, u)
    _check_boundary(prob, u)
    ops = prob.grid.ops
    g = gradient(u).values
    bulk = float(ops.weights @ energy_density(g, prob.p.at_samples(), delta))
    react = prob.reaction.big_b_eps(u.flat, prob.eps) + prob.f.flat * u.flat
    return bulk + float(ops.node_volume @ react)


def energy_gradient(prob: DirichletProblem, u, delta: float = 0.0) -> np.ndarray:
    """dE/du at interior nodes, returned as a full nodal array (zero on the boundary)."""
    u = _as_field(prob, u)
    r = residual(prob, u, delta)
    return -(prob.grid.ops.node_volume * r.flat)


def hessian(prob: DirichletProblem, u: np.ndarray, delta: float, reaction: bool = True,
            convexify: bool = False) -> sp.csr_matrix:
    """Second variation of the energy over all nodes.

    With ``convexify`` the negative part of beta_eps' is dropped, which makes the
    matrix positive definite on interior nodes whenever the flux Jacobian is.
    """
    ops = prob.grid.ops
    g = np.stack([D @ u for D in ops.diff], axis=1)
    J = flux_jacobian(g, prob.p.at_samples(), delta) * ops.weights[:, None, None]
    d = prob.grid.dim
    H = None
    for k in range(d):
        for l in range(d):
            term = ops.diff[k].T @ sp.diags(J[:, k, l]) @ ops.diff[l]
            H = term if H is None else H + term
    if reaction:
        bp = prob.reaction.beta_eps_prime(u, prob.eps)
        if convexify:
            bp = np.maximum(bp, 0.0)
        H = H + sp.diags(ops.node_volume * bp)
    return H.tocsr()


# -- Newton ---------------------------------------------------------------------------


def _norm(prob: DirichletProblem, r_flat: np.ndarray) -> float:
    return float(np.sqrt(np.sum(prob.grid.ops.node_volume * r_flat**2)))


class _System:
    """Residual/energy evaluation on interior unknowns for one (eps, delta) stage."""

    def __init__(self, prob: DirichletProblem, delta: float, reaction: bool = True):
        self.prob = prob
        self.delta = delta
        self.reaction = reaction
        self.inner = prob.grid.interior_mask.reshape(-1)
        self.base = prob.lift()
        if not reaction:
            self.prob = replace(prob, reaction=_NoReaction(prob.reaction))

    def full(self, x: np.ndarray) -> np.ndarray:
        u = self.base.copy()
        u[self.inner] = x
        return u

    def residual(self, x: np.ndarray) -> np.ndarray:
        return residual(self.prob, self.full(x), self.delta).flat

    def norm(self, x: np.ndarray) -> float:
        return _norm(self.prob, self.residual(x))

    def energy(self, x: np.ndarray) -> float:
        return energy(self.prob, self.full(x), self.delta)

    def step(self, x: np.ndarray, r: np.ndarray, convexify: bool = False) -> np.ndarray:
        H = hessian(self.prob, self.full(x), self.delta, reaction=self.reaction, convexify=convexify)
        H = H[self.inner][:, self.inner].tocsc()
        rhs = (self.prob.grid.ops.node_volume * r)[self.inner]
        lu = spla.splu(H)
        dx = lu.solve(rhs)
        if not np.all(np.isfinite(dx)):
            raise np.linalg.LinAlgError("singular Jacobian")
        return dx


class _NoReaction:
    """Reaction stand-in with beta frozen to zero."""

    def __init__(self, base: ReactionProfile):
        self.mass = base.mass

    def beta_eps(self, s, eps):
        return np.zeros_like(np.asarray(s, dtype=float))

    beta_eps_prime = beta_eps
    big_b_eps = beta_eps


def _line_search(system: _System, x, dx, e, nrm, slope, cfg: SolverConfig):
    """Backtrack until the energy satisfies Armijo, or a full step halves the residual."""
    alpha = 1.0
    while alpha >= cfg.min_step:
        xt = x + alpha * dx
        if cfg.project_nonnegative:
            xt = np.maximum(xt, 0.0)
        et = system.energy(xt)
        armijo = slope < 0 and et <= e + 1e-4 * alpha * slope
        rt = system.residual(xt)
        nt = _norm(system.prob, rt)
        # near convergence energy differences drop below rounding
        if armijo or (alpha == 1.0 and nt <= 0.5 * nrm and et <= e + 1e-12 * (1.0 + abs(e))):
            return xt, rt, nt, et
        alpha *= cfg.backtrack
    return None


def _newton(system: _System, x0: np.ndarray, cfg: SolverConfig) -> tuple[np.ndarray, float, int, bool, str, list]:
    x = x0.copy()
    r = system.residual(x)
    nrm = _norm(system.prob, r)
    e = system.energy(x)
    history = [nrm]
    it = 0
    msg = ""
    vol = system.prob.grid.ops.node_volume[system.inner]
    while nrm > cfg.tol and it < cfg.max_iter:
        it += 1
        grad = -vol * r[system.inner]
        step = None
        for convexify in (False, True):
            dx = system.step(x, r, convexify=convexify)
            slope = float(np.dot(grad, dx))
            step = _line_search(system, x, dx, e, nrm, slope, cfg)
            if step is not None:
                break
        if step is None:
            msg = "line search failed"
            break
        x, r, nrm, e = step
        history.append(nrm)
    converged = nrm <= cfg.tol
    if not converged and not msg:
        msg = "maximum iterations reached"
    return x, nrm, it, converged, msg, history


def _run_stage(prob: DirichletProblem, delta: float, x0: np.ndarray, cfg: SolverConfig,
               reaction: bool = True) -> tuple[SolveResult, np.ndarray]:
    notes = []
    for attempt in range(6):
        system = _System(prob, delta, reaction=reaction)
        try:
            x, nrm, it, conv, msg, hist = _newton(system, x0, cfg)
            break
        except (RuntimeError, np.linalg.LinAlgError):
            new = max(10.0 * delta, 1e-8)
            notes.append(f"singular Jacobian at delta={delta:.3g}, retried with {new:.3g}")
            log.warning(notes[-1])
            delta = new
    else:
        raise NotConvergedError("Jacobian stayed singular after regularisation retries")
    u = system.full(x)
    field_u = ScalarField(prob.grid, u)
    res = SolveResult(
        u=field_u,
        residual_norm=nrm,
        iterations=it,
        energy=energy(system.prob, u, delta),
        converged=conv,
        nonnegative=bool(u.min() >= -cfg.tol),
        eps=prob.eps,
        delta=delta,
        message="; ".join(notes + ([msg] if msg else [])),
        history=tuple(hist),
    )
    return res, x


def initial_guess(prob: DirichletProblem, cfg: SolverConfig, delta: float | None = None) -> np.ndarray:
    """Interior values of the solution with the reaction switched off."""
    delta = cfg.delta_for(prob.grid, delta)
    x0 = np.zeros(int(prob.grid.interior_mask.sum()))
    res, x = _run_stage(prob, delta, x0, cfg, reaction=False)
    return x


def _stages(prob: DirichletProblem, cfg: SolverConfig) -> list[tuple[float, float]]:
    stages = [(float(e), d) for e, d in cfg.schedule]
    if not stages or not np.isclose(stages[-1][0], prob.eps, rtol=1e-12, atol=0):
        if stages and stages[-1][0] < prob.eps:
            raise ValueError("continuation schedule must end at the problem's eps")
        stages.append((prob.eps, None))
    return [(e, cfg.delta_for(prob.grid, d)) for e, d in stages]


def solve(prob: DirichletProblem, cfg: SolverConfig | None = None, initial=None) -> SolveResult:
    """Damped Newton with eps/delta continuation, warm-starting each stage."""
    cfg = cfg or SolverConfig()
    stages = _stages(prob, cfg)
    if initial is None:
        x = initial_guess(prob, cfg, stages[0][1])
    else:
        x = _as_field(prob, initial).flat[prob.grid.interior_mask.reshape(-1)].copy()
    total = 0
    res = None
    for eps, delta in stages:
        res, x = _run_stage(prob.with_eps(eps), delta, x, cfg)
        total += res.iterations
        log.info("eps=%.3g delta=%.3g it=%d |r|=%.3e", eps, delta, res.iterations, res.residual_norm)
    return replace(res, iterations=total)


def continuation_sweep(prob: DirichletProblem, eps_list, cfg: SolverConfig | None = None,
                       initial=None) -> list[SolveResult]:
    """One warm-started solve per eps in a decreasing list."""
    cfg = cfg or SolverConfig()
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps list must be strictly decreasing")
    deltas = dict(cfg.schedule)
    if initial is None:
        x = initial_guess(prob, cfg, deltas.get(eps_list[0]))
    else:
        x = _as_field(prob, initial).flat[prob.grid.interior_mask.reshape(-1)].copy()
    out = []
    for eps in eps_list:
        delta = cfg.delta_for(prob.grid, deltas.get(eps))
        res, x = _run_stage(prob.with_eps(eps), delta, x, cfg)
        log.info("sweep eps=%.3g it=%d |r|=%.3e", eps, res.iterations, res.residual_norm)
        out.append(res)
    return out


def comparison_check(u, v, tol: float = 1e-8) -> bool:
    """True iff u <= v + tol at every node; SolveResults must be converged."""
    fields = []
    for w in (u, v):
        if isinstance(w, SolveResult):
            if not w.converged:
                raise NotConvergedError("comparison needs converged solutions")
            w = w.u
        fields.append(w)
    a, b = fields
    a.grid.check_same(b.grid)
    return bool(np.all(a.values <= b.values + tol))
