import numpy as np
import pytest

from pxflame import analysis
from pxflame.exponent import ExponentField
from pxflame.grid import Grid
from pxflame.oracle import profile_quadrature
from pxflame.reaction import ReactionProfile, lambda_star

R = ReactionProfile.quadratic(0.5)


def test_extract_1d_linear_crossing():
    grid = Grid.uniform(101)
    u = grid.evaluate(lambda x: np.maximum(0.5 - x, 0.0))
    (pt,) = analysis.extract_free_boundary(u, 0.1)
    assert pt.position[0] == pytest.approx(0.4, abs=1e-12)
    assert np.array_equal(pt.normal, [-1.0])
    assert analysis.extract_free_boundary(grid.field(1.0), 0.1) == []
    with pytest.raises(ValueError):
        analysis.extract_free_boundary(u, 0.0)


def test_extract_2d_circle():
    grid = Grid.uniform([121, 121], -0.6, 0.6)
    u = grid.evaluate(lambda x, y: np.maximum(0.5 - np.hypot(x, y), 0.0))
    rep = analysis.extract_free_boundary_report(u, 0.1)
    pos = rep.positions
    r = np.linalg.norm(pos, axis=1)
    assert len(rep) > 100
    assert np.abs(r - 0.4).max() <= grid.h
    inward = -pos / r[:, None]
    normals = np.array([pt.normal for pt in rep.points])
    assert np.allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-12)
    assert np.min(np.einsum("ij,ij->i", normals, inward)) > 0.99
    assert rep.length == pytest.approx(2 * np.pi * 0.4, rel=1e-3)


@pytest.mark.parametrize("a,err", [(1.0, 0.0), (0.5, 0.5)])
def test_slope_report_planar(a, err):
    grid = Grid.uniform([81, 41], [-1.0, -0.5], [1.0, 0.5])
    u = grid.evaluate(lambda x, y: a * np.maximum(x, 0.0))
    p = ExponentField.constant(grid, 2.0)
    tau = 0.05
    pts = analysis.extract_free_boundary(u, tau)
    rep = analysis.slope_report(u, p, pts, 0.5, tau)
    assert np.allclose(rep.slopes, a, atol=1e-10)
    assert np.allclose(rep.rel_errors, err, atol=1e-10)
    assert np.allclose(rep.positions[:, 0], tau / a)


def test_slope_probes_leaving_domain():
    grid = Grid.uniform(101)
    u = grid.evaluate(lambda x: np.maximum(x - 0.98, 0.0))
    p = ExponentField.constant(grid, 2.0)
    pts = analysis.extract_free_boundary(u, 0.001)
    with pytest.raises(ValueError):
        analysis.slope_report(u, p, pts, 0.5, 0.001)
    assert len(analysis.slope_report(u, p, pts, 0.5, 0.001, skip_outside=True)) == 0


def test_flame_mean_slope_within_2_percent(sweep_of):
    run, _ = sweep_of("flame1d")
    assert abs(run.stages[-1].report.mean_slope - 1.0) <= 0.02


def test_lipschitz_monitor_examples():
    grid = Grid.uniform(201)
    aff = [grid.evaluate(lambda x: 1.0 + 0.7 * x) for _ in range(3)]
    assert np.allclose(analysis.lipschitz_monitor(aff, 0.05), 0.7)
    assert analysis.lipschitz_monitor([grid.field(0.0)], 0.05) == [0.0]
    with pytest.raises(ValueError):
        analysis.lipschitz_monitor(aff, 0.6)


@pytest.mark.parametrize("name", ["flame1d", "flame1d-varp", "flame2d-radial"])
def test_upper_gradient_bound_at_final_eps(sweep_of, name):
    run, _ = sweep_of(name)
    res = run.results[-1]
    ratio = analysis.upper_gradient_excess(res.u, run.stages[-1].report, 0.5, run.problem.p)
    assert 0 < ratio <= 1.05


def test_harnack_examples():
    grid = Grid.uniform([81, 81], -1.0, 1.0)
    p = ExponentField.constant(grid, 2.0)
    f = grid.field(0.0)
    s = analysis.harnack_quotient(grid.field(3.0), f, p, (0.0, 0.0), 0.25)
    assert s.quotient == pytest.approx(3.0 / 3.25)
    u = grid.evaluate(lambda x, y: x + 2.0)
    s = analysis.harnack_quotient(u, f, p, (0.0, 0.0), 0.25)
    assert (s.sup, s.inf, s.mu) == (pytest.approx(2.25), pytest.approx(1.75), 0.0)
    assert s.quotient == pytest.approx(1.125)
    with pytest.raises(ValueError):
        analysis.harnack_quotient(grid.evaluate(lambda x, y: x), f, p, (0.0, 0.0), 0.25)
    with pytest.raises(ValueError):
        analysis.harnack_quotient(u, f, p, (0.5, 0.0), 0.25)


def test_harnack_forcing_enters_through_mu():
    grid = Grid.uniform([41, 41], -1.0, 1.0)
    p = ExponentField.constant(grid, 3.0)
    u = grid.field(1.0)
    s = analysis.harnack_quotient(u, grid.field(4.0), p, (0.0, 0.0), 0.25)
    assert s.mu == pytest.approx((0.25 * 4.0) ** 0.5)


def test_harnack_scaling_bound(sweep_of):
    run, _ = sweep_of("flame2d-radial")
    res, prob = run.results[-1], run.problem
    balls = analysis.admissible_balls(res.u, 20, positivity=res.eps, seed=3)
    for t in (1.0, 2.0, 10.0):
        for c, R_ in balls:
            q = analysis.harnack_quotient(res.u, prob.f, prob.p, c, R_).quotient
            qt = analysis.harnack_quotient(t * res.u, prob.f, prob.p, c, R_).quotient
            assert qt <= t * q * (1 + 1e-12)


def test_admissible_balls_respect_positivity(sweep_of):
    run, _ = sweep_of("flame2d-radial")
    u = run.results[-1].u
    balls = analysis.admissible_balls(u, 50, positivity=0.02, seed=1)
    assert len(balls) == 50
    low = u.grid.points[u.flat <= 0.02]
    for c, R_ in balls:
        assert np.linalg.norm(low - c, axis=1).min() > 4 * R_
        assert u.grid.distance_to_boundary(c)[0] >= 4 * R_


def test_nondegeneracy_planar_fixture():
    grid = Grid.uniform([201, 201], -1.0, 1.0)
    lam = 0.8
    u = grid.evaluate(lambda x, y: lam * np.maximum(x, 0.0))
    nd = analysis.nondegeneracy_report(u, [np.zeros(2)], [0.1, 0.3, 0.6], 1e-12)
    assert np.allclose(nd.ball_average, lam * 2 / (3 * np.pi), rtol=2e-3)
    assert np.allclose(nd.sphere_average, lam / np.pi, rtol=2e-3)
    # sup is sampled at quadrature and sphere points, not at the exact maximiser
    assert np.all(nd.sup <= lam * (1 + 1e-12)) and np.allclose(nd.sup, lam, rtol=1e-3)
    assert np.allclose(nd.zero_density, 0.5, atol=0.01)
    with pytest.raises(ValueError):
        analysis.nondegeneracy_report(u, [np.array([0.95, 0.0])], [0.1], 1e-12)


def test_nondegeneracy_ratios_agree_within_factor_10(sweep_of):
    run, _ = sweep_of("flame2d-radial")
    res, grid = run.results[-1], run.problem.grid
    nd = analysis.nondegeneracy_report(res.u, run.stages[-1].report, grid.h * np.array([4, 12, 20]), res.eps**2)
    assert np.all(nd.ball_average >= 0) and np.all(nd.zero_density >= 0)
    assert nd.spread() <= 10.0
    assert nd.zero_density.min() > 0


def test_chi_examples():
    grid = Grid.uniform(5)
    u = grid.field(np.array([0.0, 0.5, 1.0, 2.0, 0.02]))
    chi = analysis.chi_field(u, 1.0, R).values
    assert chi[0] == 0.0 and chi[2] == 0.5 and chi[3] == 0.5
    assert analysis.transition_fraction(analysis.chi_field(u, 1.0, R), 0.5) == pytest.approx(0.2)


def test_transition_fraction_matches_oracle_width(sweep_of):
    run, _ = sweep_of("flame1d")
    lo_t, hi_t = [np.roots([-2.0, 3.0, 0.0, -c])[1].real for c in (0.05, 0.95)]
    assert 3 * lo_t**2 - 2 * lo_t**3 == pytest.approx(0.05)
    assert 3 * hi_t**2 - 2 * hi_t**3 == pytest.approx(0.95)
    h = run.problem.grid.h
    for stage in run.stages:
        prof = profile_quadrature(R, 2.0, stage.eps)
        width = prof.x_of(lo_t * stage.eps) - prof.x_of(hi_t * stage.eps)
        assert stage.chi_fraction == pytest.approx(width, abs=2 * h)


def test_reaction_concentration_edge_cases():
    grid = Grid.uniform(101)
    p = ExponentField.constant(grid, 2.0)
    u = grid.field(1.0)
    empty = analysis.extract_free_boundary_report(u, 0.01)
    assert analysis.reaction_concentration(u, 0.01, R, p, empty, 0.1) is None
    v = grid.evaluate(lambda x: np.maximum(0.05 - x, 0.0))
    rep = analysis.extract_free_boundary_report(v, 0.01)
    with pytest.raises(ValueError):
        analysis.reaction_concentration(v, 0.01, R, p, rep, 0.1)


def test_reaction_concentration_2d_radial(sweep_of):
    run, _ = sweep_of("flame2d-radial")
    res = run.results[-1]
    rep = run.stages[-1].report
    val = analysis.reaction_concentration(res.u, res.eps, R, run.problem.p, rep, 10 * res.eps)
    assert val == pytest.approx(lambda_star(2.0, 0.5), rel=0.05)


def test_bump_gradient_matches_differences():
    b = analysis.Bump((0.2, -0.1), 0.3, 2.0)
    pts = np.random.default_rng(2).uniform(-0.2, 0.5, (30, 2))
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (b.value(pts + e) - b.value(pts - e)) / (2 * h)
        assert np.allclose(b.gradient(pts)[:, k], fd, atol=1e-6)
    assert b.value(np.array([[0.2, -0.1]]))[0] == pytest.approx(2.0)
    assert b.value(np.array([[0.6, -0.1]]))[0] == 0.0


def test_identity_trivial_cases():
    grid = Grid.uniform(401)
    u = grid.evaluate(lambda x: 0.5 + 0.8 * x)
    f = grid.field(0.0)
    pc = ExponentField.constant(grid, 2.7)
    assert analysis.identity_4_2_check(u, 0.01, pc, f, None, R) == (0.0, 0.0, 0.0)
    far = analysis.Bump((5.0,), 0.1)
    with pytest.raises(ValueError):
        analysis.identity_4_2_check(u, 0.01, pc, f, far, R)
    bump = analysis.Bump((0.5,), 0.2)
    lhs, rhs, gap = analysis.identity_4_2_check(u, 0.01, pc, f, bump, R)
    # constant exponent and constant B_eps = M: every term is a multiple of int psi' = 0
    assert abs(rhs) < 1e-10 and abs(lhs) < 1e-10
    pv = ExponentField.from_function(grid, lambda x: 2.0 + x)
    _, rhs_v, _ = analysis.identity_4_2_check(u, 0.01, pv, f, bump, R)
    assert abs(rhs_v) > 1e-3


def test_identity_gap_second_order_on_flame1d(sweep_of):
    gaps = [sweep_of("flame1d", k)[0].stages[-1].identity_gap for k in (1, 2)]
    assert np.log2(gaps[0] / gaps[1]) >= 1.0
