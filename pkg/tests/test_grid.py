import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlococ import GridSpec, TimeGrid, h1_seminorm_sq, inner, laplacian_neumann
from nlococ.grid import integrate, norm, spacetime_inner

from oracles import loglog_slope


@pytest.fixture(params=[(1,), (2,)], ids=["1d", "2d"])
def grid(request):
    if request.param == (1,):
        return GridSpec((1.0,), (40,))
    return GridSpec((1.0, 2.0), (12, 20))


def test_gridspec_derived_quantities():
    g = GridSpec((2.0, 1.0), (8, 4))
    assert g.dim == 2
    assert g.size == 32
    assert g.spacing == (0.25, 0.25)
    assert g.cell_volume == pytest.approx(0.0625)
    assert g.measure == pytest.approx(2.0)
    x, y = g.axes()
    assert x[0] == pytest.approx(0.125) and y[-1] == pytest.approx(0.875)


@pytest.mark.parametrize("extent,cells", [((1.0,), (1,)), ((1.0, 1.0), (4,)), ((1.0, 1.0, 1.0), (2, 2, 2)), ((-1.0,), (4,))])
def test_gridspec_rejects_bad_input(extent, cells):
    with pytest.raises(ValueError):
        GridSpec(extent, cells)


def test_timegrid():
    t = TimeGrid(0.5, 10)
    assert t.dt == pytest.approx(0.05)
    assert t.nodes.shape == (11,)
    for bad in [(0.0, 10), (1.0, 0), (-1.0, 3)]:
        with pytest.raises(ValueError):
            TimeGrid(*bad)


def test_laplacian_of_constant_vanishes(grid):
    assert np.max(np.abs(laplacian_neumann(grid, grid.full(3.7)))) < 1e-10


def test_laplacian_sums_to_zero_and_is_self_adjoint(grid, rng):
    for _ in range(5):
        f, g = rng.standard_normal(grid.shape), rng.standard_normal(grid.shape)
        Lf, Lg = laplacian_neumann(grid, f), laplacian_neumann(grid, g)
        assert abs(np.sum(Lf)) <= 1e-12 * np.sum(np.abs(f))
        assert abs(inner(grid, Lf, g) - inner(grid, f, Lg)) <= 1e-12 * norm(grid, f) * norm(grid, g)


def test_laplacian_second_order_on_cosine_eigenfunction():
    """Richardson study against the analytic eigenpair ``-(pi/L)^2 cos(pi x / L)``."""
    L = 2.0
    errors, hs = [], []
    for n in (16, 32, 64, 128):
        g = GridSpec((L,), (n,))
        (x,) = g.axes()
        f = np.cos(np.pi * x / L)
        err = np.max(np.abs(laplacian_neumann(g, f) + (np.pi / L) ** 2 * f))
        errors.append(err)
        hs.append(g.spacing[0])
    slope = loglog_slope(hs, errors)
    assert 1.9 <= slope <= 2.1


def test_inner_basics(rng):
    g = GridSpec((1.0, 1.0), (10, 10))
    assert inner(g, g.full(1.0), g.full(1.0)) == pytest.approx(1.0)
    f, h = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    assert inner(g, f, h) == pytest.approx(inner(g, h, f), rel=1e-14)
    assert inner(g, f, f) > 0
    assert integrate(g, f) == pytest.approx(np.mean(f))
    with pytest.raises(ValueError):
        inner(g, f, np.ones((5, 5)))


def test_h1_seminorm():
    g = GridSpec((1.0,), (64,))
    (x,) = g.axes()
    assert h1_seminorm_sq(g, g.full(2.0)) == 0.0
    # interior faces only: (n - 1) unit slopes over cells of width h
    assert h1_seminorm_sq(g, x) == pytest.approx(63 / 64, rel=1e-13)
    assert h1_seminorm_sq(g, 2 * x) == pytest.approx(4 * h1_seminorm_sq(g, x), rel=1e-13)


def test_h1_seminorm_matches_laplacian_form(grid, rng):
    f = rng.standard_normal(grid.shape)
    assert h1_seminorm_sq(grid, f) == pytest.approx(-inner(grid, laplacian_neumann(grid, f), f), rel=1e-11)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 12), st.integers(2, 12), st.integers(0, 2**31 - 1))
def test_h1_seminorm_zero_only_for_constants(nx, ny, seed):
    g = GridSpec((1.0, 1.0), (nx, ny))
    f = np.random.default_rng(seed).standard_normal(g.shape)
    assert h1_seminorm_sq(g, f) > 0
    assert h1_seminorm_sq(g, g.full(float(f[0, 0]))) == 0.0


def test_spacetime_inner_shape_check():
    g = GridSpec((1.0,), (4,))
    t = TimeGrid(1.0, 2)
    f = np.ones((3, 4))
    assert spacetime_inner(g, t, f, f) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        spacetime_inner(g, t, f, np.ones((2, 4)))
