import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pxflame.grid import (
    Grid,
    GridMismatchError,
    ScalarField,
    VectorField,
    divergence,
    field_to_csv,
    gradient,
    inner_nodes,
    inner_samples,
    integrate,
    interpolate,
    interpolate_gradient,
)

GRIDS = [
    Grid.uniform(11),
    Grid.uniform(17, -1.0, 2.0),
    Grid.uniform([9, 7], [0.0, -1.0], [2.0, 0.5]),
    Grid.uniform([5, 5]),
]


@pytest.mark.parametrize("grid", GRIDS)
def test_gradient_exact_on_affine_and_constant(grid):
    u = grid.evaluate(lambda *x: 3.0 * x[0] + (0.0 if grid.dim == 1 else -2.0 * x[1]))
    g = gradient(u).values
    expected = [3.0] if grid.dim == 1 else [3.0, -2.0]
    assert np.allclose(g, expected, atol=1e-12)
    assert np.allclose(gradient(grid.field(5.0)).values, 0.0)


def test_gradient_of_square_at_edge_midpoints():
    grid = Grid.uniform(11)  # h = 0.1
    g = gradient(grid.evaluate(lambda x: x**2)).values[:, 0]
    mid = 0.5 * (grid.axes[0][1:] + grid.axes[0][:-1])
    assert np.allclose(g, 2 * mid, rtol=0, atol=1e-13)
    g2 = Grid.uniform([11, 6])
    v = gradient(g2.evaluate(lambda x, y: x**2 + y**2)).cell_view()
    xm = 0.5 * (g2.axes[0][1:] + g2.axes[0][:-1])
    # samples 0, 1 use the lower x edge; both rows share the same x midpoint
    assert np.allclose(v[..., 0, 0], 2 * xm[:, None], atol=1e-13)


@pytest.mark.parametrize("grid", GRIDS)
def test_divergence_examples(grid):
    n = grid.ops.n_samples
    F = VectorField(grid, np.tile(np.arange(1.0, grid.dim + 1.0), (n, 1)))
    assert np.allclose(divergence(F).values[grid.interior_mask], 0.0, atol=1e-10)
    lap = divergence(gradient(grid.evaluate(lambda *x: x[0] ** 2)))
    assert np.allclose(lap.values[grid.interior_mask], 2.0, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), k=st.integers(0, len(GRIDS) - 1))
def test_summation_by_parts(seed, k):
    grid = GRIDS[k]
    rng = np.random.default_rng(seed)
    F = VectorField(grid, rng.normal(size=(grid.ops.n_samples, grid.dim)))
    phi = np.where(grid.boundary_mask, 0.0, rng.normal(size=grid.shape))
    phi = ScalarField(grid, phi)
    lhs = inner_nodes(divergence(F), phi) + inner_samples(F, gradient(phi))
    scale = np.linalg.norm(F.values) * np.linalg.norm(phi.values)
    assert abs(lhs) <= 1e-12 * scale


def test_interpolation_examples():
    grid = Grid.uniform([6, 9], [0.0, -1.0], [1.0, 1.0])
    aff = grid.evaluate(lambda x, y: 2 * x - y + 0.5)
    pts = np.random.default_rng(0).uniform([0, -1], [1, 1], (50, 2))
    assert np.allclose(interpolate(aff, pts), 2 * pts[:, 0] - pts[:, 1] + 0.5)
    assert interpolate(aff, grid.points[17]) == pytest.approx(aff.flat[17])
    prod = grid.evaluate(lambda x, y: x * y)
    cx, cy = 0.5 * (grid.axes[0][2] + grid.axes[0][3]), 0.5 * (grid.axes[1][4] + grid.axes[1][5])
    assert interpolate(prod, (cx, cy)) == pytest.approx(cx * cy)
    with pytest.raises(ValueError):
        interpolate(aff, (2.0, 0.0))


def test_gradient_then_interpolate_affine():
    grid = Grid.uniform([7, 7])
    u = grid.evaluate(lambda x, y: 0.3 * x + 1.7 * y)
    assert np.allclose(gradient(u).values, [0.3, 1.7], atol=1e-13)
    pts = np.random.default_rng(1).uniform(0, 1, (40, 2))
    assert np.allclose(interpolate_gradient(u, pts), [0.3, 1.7], atol=1e-12)


def test_quadrature_and_volumes():
    grid = Grid.uniform([21, 11], [0.0, 0.0], [2.0, 1.0])
    assert integrate(grid.field(1.0)) == pytest.approx(2.0)
    assert integrate(grid.evaluate(lambda x, y: x)) == pytest.approx(2.0)
    assert grid.ops.weights.sum() == pytest.approx(2.0)


def test_grid_mismatch_and_validation():
    a, b = Grid.uniform(11), Grid.uniform(12)
    with pytest.raises(GridMismatchError):
        a.field(1.0) + b.field(1.0)
    with pytest.raises(ValueError):
        Grid.uniform(2)
    with pytest.raises(ValueError):
        Grid.uniform([4, 4, 4])
    with pytest.raises(ValueError):
        ScalarField(a, np.full(11, np.nan))


def test_csv_dialect():
    text = field_to_csv(Grid.uniform([3, 3]).evaluate(lambda x, y: x + y), "u")
    lines = text.split("\n")
    assert lines[0] == "index,x,y,u"
    assert "\r" not in text and text.endswith("\n")
    assert lines[5] == "4,0.5,0.5,1"
