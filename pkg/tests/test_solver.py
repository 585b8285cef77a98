import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxflame.exponent import ExponentField
from pxflame.grid import Grid, ScalarField
from pxflame.reaction import ReactionProfile
from pxflame.solver import (
    BoundaryMismatchError,
    DirichletProblem,
    NotConvergedError,
    SolverConfig,
    comparison_check,
    continuation_sweep,
    energy,
    energy_gradient,
    flux_values,
    hessian,
    residual,
    solve,
)


def problem_1d(n=101, p=2.0, left=1.0, right=2.0, eps=0.01, f=0.0, mass=0.5):
    grid = Grid.uniform(n)
    pf = p if isinstance(p, ExponentField) else ExponentField.constant(grid, p)
    bnd = grid.evaluate(lambda x: left + (right - left) * x)
    return DirichletProblem(grid, pf, grid.field(f), ReactionProfile.quadratic(mass), eps, bnd)


def test_flux_examples():
    g = np.random.default_rng(0).normal(size=(20, 2))
    assert np.allclose(flux_values(g, np.full(20, 2.0), 0.3), g)
    assert np.allclose(flux_values(np.array([[2.0, 0.0]]), np.array([4.0]), 0.0), [[8.0, 0.0]])
    assert np.allclose(flux_values(np.zeros((1, 2)), np.array([1.5]), 0.0), 0.0)


def test_residual_examples():
    prob = problem_1d()
    aff = prob.grid.evaluate(lambda x: 1.0 + x)
    assert np.allclose(residual(prob, aff).values, 0.0, atol=1e-10)
    zero = problem_1d(left=0.0, right=0.0)
    assert np.all(residual(zero, zero.grid.field(0.0)).values == 0.0)
    # u = x^2 with f = 2: residual is -beta_eps(u) at interior nodes
    grid = Grid.uniform(201)
    sq = grid.evaluate(lambda x: x**2)
    prob = DirichletProblem(grid, ExponentField.constant(grid, 2.0), grid.field(2.0),
                            ReactionProfile.quadratic(0.5), 0.05, sq)
    r = residual(prob, sq).values
    expected = -prob.reaction.beta_eps(sq.values, 0.05)
    assert np.allclose(r[1:-1], expected[1:-1], atol=1e-9)
    with pytest.raises(BoundaryMismatchError):
        residual(prob, grid.field(0.5))


def test_energy_examples():
    zero = problem_1d(left=0.0, right=0.0)
    assert energy(zero, zero.grid.field(0.0)) == 0.0
    prob = problem_1d(left=1.0, right=2.0, eps=0.01)
    u = prob.grid.evaluate(lambda x: 1.0 + x)
    assert energy(prob, u) == pytest.approx(0.5 + 0.5, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), p0=st.floats(1.3, 4.0), eps=st.floats(0.02, 0.5))
def test_energy_gradient_property(seed, p0, eps):
    rng = np.random.default_rng(seed)
    grid = Grid.uniform([9, 8])
    p = ExponentField.from_function(grid, lambda x, y: p0 + 0.5 * x * y)
    prob = DirichletProblem(grid, p, ScalarField(grid, rng.normal(size=grid.shape)),
                            ReactionProfile.quadratic(0.5), eps, ScalarField(grid, rng.uniform(0, 1, grid.shape)))
    u = prob.lift(rng.uniform(0, 1, int(grid.interior_mask.sum())))
    d = prob.lift(rng.normal(size=int(grid.interior_mask.sum()))) - prob.lift()
    delta = 0.1
    step = 1e-5
    fd = (energy(prob, u + step * d, delta) - energy(prob, u - step * d, delta)) / (2 * step)
    exact = float(energy_gradient(prob, u, delta) @ d)
    assert fd == pytest.approx(exact, rel=1e-5, abs=1e-9)


def test_hessian_is_symmetric_and_matches_gradient_differences():
    rng = np.random.default_rng(3)
    grid = Grid.uniform([7, 9])
    p = ExponentField.from_function(grid, lambda x, y: 2.5 + x - y)
    prob = DirichletProblem(grid, p, grid.field(0.3), ReactionProfile.quadratic(0.5), 0.4,
                            ScalarField(grid, rng.uniform(0, 1, grid.shape)))
    u = prob.lift(rng.uniform(0.05, 0.35, int(grid.interior_mask.sum())))
    H = hessian(prob, u, 0.1).toarray()
    assert np.allclose(H, H.T, atol=1e-12)
    d = prob.lift(rng.normal(size=int(grid.interior_mask.sum()))) - prob.lift()
    s = 1e-6
    fd = (energy_gradient(prob, u + s * d, 0.1) - energy_gradient(prob, u - s * d, 0.1)) / (2 * s)
    inner = grid.interior_mask.reshape(-1)
    assert np.allclose(fd[inner], (H @ d)[inner], rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("p0", [2.0, 4.0, 1.5])
def test_two_point_problem_is_affine(p0):
    prob = problem_1d(p=p0, eps=0.01)
    res = solve(prob)
    assert res.converged
    assert np.allclose(res.u.values, 1.0 + prob.grid.axes[0], atol=1e-8)


def test_affine_residual_vanishes_with_reaction_off():
    for p in (2.0, 3.3):
        prob = problem_1d(p=p, left=0.5, right=1.5, eps=0.1)
        u = prob.grid.evaluate(lambda x: 0.5 + x)
        assert np.abs(residual(prob, u, delta=0.2).values).max() <= 1e-9
    # with variable p only a unit slope keeps the flux constant
    grid = Grid.uniform(51)
    p = ExponentField.from_function(grid, lambda x: 2.0 + x)
    bnd = grid.evaluate(lambda x: 0.5 + x)
    prob = DirichletProblem(grid, p, grid.field(0.0), ReactionProfile.quadratic(), 0.1, bnd)
    assert np.abs(residual(prob, bnd).values).max() <= 1e-9


def test_single_eps_sweep_equals_solve():
    prob = problem_1d(n=401, left=0.3, right=0.0, eps=0.02)
    a = continuation_sweep(prob, [0.02])[0]
    b = solve(prob)
    assert np.allclose(a.u.values, b.u.values, atol=1e-12)


def test_sweep_rejects_increasing_eps():
    with pytest.raises(ValueError):
        continuation_sweep(problem_1d(), [0.01, 0.02])
    with pytest.raises(ValueError):
        SolverConfig(schedule=((0.01, None), (0.02, None)))


@pytest.mark.parametrize("name", ["flame1d", "flame1d-p3", "flame1d-varp", "flame2d-radial", "flame2d-varp"])
def test_canonical_sweeps_converge_nonnegative(sweep_of, name):
    run, _ = sweep_of(name)
    assert run.converged
    assert all(r.nonnegative for r in run.results)


def test_flame_slopes_inside_5_then_1_percent(sweep_of):
    run, _ = sweep_of("flame1d")
    errs = [s.report.max_rel_error for s in run.stages[:4]]
    assert errs[0] <= 0.05 and errs[-1] <= 0.01


@pytest.mark.xfail(strict=False, reason="1D front slope is eps-invariant; error is discretisation only, see ledger")
def test_flame_slopes_approach_limit_monotonically(sweep_of):
    run, _ = sweep_of("flame1d")
    errs = [s.report.max_rel_error for s in run.stages[:4]]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_radial_slopes_approach_limit_monotonically(sweep_of):
    run, _ = sweep_of("flame2d-radial")
    errs = [abs(s.report.mean_slope - 1.0) for s in run.stages[1:]]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_oracle_error_order_at_least_one(sweep_of):
    from pxflame.oracle import compose_full_profile, profile_quadrature

    errs = []
    for refine in (1, 2):
        run, _ = sweep_of("flame1d", refine)
        res = run.results[-1]
        oracle = compose_full_profile(profile_quadrature(run.problem.reaction, 2.0, res.eps), 0.3,
                                      run.problem.grid)
        sel = res.u.values >= 0.01 * res.eps
        errs.append(np.abs(res.u.values - oracle.values)[sel].max())
    assert np.log2(errs[0] / errs[1]) >= 1.0


def test_comparison_examples():
    grid = Grid.uniform(201)
    p = ExponentField.constant(grid, 2.0)
    zero = grid.field(0.0)
    r = ReactionProfile.quadratic()
    pu = DirichletProblem(grid, p, grid.field(1.0), r, 0.05, zero)
    pv = DirichletProblem(grid, p, zero, r, 0.05, zero)
    u, v = solve(pu), solve(pv)
    x = grid.axes[0]
    assert np.allclose(u.u.values, (x**2 - x) / 2, atol=1e-10)
    assert comparison_check(u, v)
    assert not comparison_check(v, u)
    assert comparison_check(u, u)
    bad = type(u)(**{**u.__dict__, "converged": False})
    with pytest.raises(NotConvergedError):
        comparison_check(bad, v)
