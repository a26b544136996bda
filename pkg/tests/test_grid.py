import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_ch.errors import DimensionError, ParameterError
from nonlocal_ch.grid import (
    GridFunction,
    PeriodicGrid,
    inner_product,
    mean,
    norm_l2,
    norm_linf,
)

from conftest import random_field


def brute_inner(f, g):
    grid = f.grid
    total = 0.0
    for j in range(grid.ny):
        for i in range(grid.nx):
            total += f.values[j, i] * g.values[j, i]
    return grid.hx * grid.hy * total


class TestPeriodicGrid:
    def test_spacing_identities(self):
        g = PeriodicGrid(1.3, 0.7, 12, 6)
        assert g.hx * g.nx == 2 * g.half_width_x
        assert g.hy * g.ny == 2 * g.half_width_y

    def test_node_coordinates(self):
        g = PeriodicGrid(2.0, 1.0, 4, 8)
        np.testing.assert_allclose(g.x, [-1.0, 0.0, 1.0, 2.0])
        assert g.y[0] == pytest.approx(-1.0 + 0.25)
        assert g.y[-1] == pytest.approx(1.0)

    @pytest.mark.parametrize("n", [3, 2, 0, 7, -4, 4.5])
    def test_rejects_bad_counts(self, n):
        with pytest.raises(ParameterError):
            PeriodicGrid(1.0, 1.0, n, 8)

    @pytest.mark.parametrize("w", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_bad_half_width(self, w):
        with pytest.raises(ParameterError):
            PeriodicGrid(w, 1.0, 8, 8)

    def test_storage_layout(self):
        g = PeriodicGrid(1.0, 1.0, 6, 4)
        f = g.sample(lambda x, y: 10 * x + y)
        # node (i, j) lives at flat offset (j-1)*nx + (i-1)
        i, j = 3, 2
        assert f.flat[(j - 1) * g.nx + (i - 1)] == pytest.approx(10 * g.x[i - 1] + g.y[j - 1])
        assert f.values.shape == (4, 6)


class TestGridFunction:
    def test_flat_input(self, grid8):
        f = GridFunction(grid8, np.arange(64.0))
        assert f.values[1, 0] == 8.0

    def test_wrong_length(self, grid8):
        with pytest.raises(DimensionError):
            GridFunction(grid8, np.zeros(63))

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_rejects_nonfinite(self, grid8, bad):
        vals = np.zeros(grid8.shape)
        vals[2, 3] = bad
        with pytest.raises(ValueError):
            GridFunction(grid8, vals)

    def test_immutable(self, grid8):
        f = grid8.zeros()
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0

    def test_grid_mismatch(self, grid8):
        other = PeriodicGrid.square(8, half_width=1.0)
        with pytest.raises(DimensionError):
            inner_product(grid8.zeros(), other.zeros())
        with pytest.raises(DimensionError):
            grid8.zeros() + other.zeros()


class TestInnerProduct:
    @pytest.mark.parametrize("nx,ny", [(4, 4), (8, 6), (16, 32)])
    def test_constant_gives_area(self, nx, ny):
        g = PeriodicGrid(math.pi, math.pi, nx, ny)
        one = g.constant(1.0)
        assert inner_product(one, one) == pytest.approx(4 * math.pi**2, rel=1e-14)

    def test_zero_annihilates(self, grid8, rng):
        assert inner_product(grid8.zeros(), random_field(grid8, rng)) == 0.0

    def test_sine_squared(self, grid16):
        f = grid16.sample(lambda x, y: np.sin(x))
        assert inner_product(f, f) == pytest.approx(2 * math.pi**2, rel=1e-13)
        assert inner_product(f, f) == pytest.approx(brute_inner(f, f), rel=1e-13)

    def test_matches_brute_force(self, grid8, rng):
        f, g = random_field(grid8, rng), random_field(grid8, rng)
        assert inner_product(f, g) == pytest.approx(brute_inner(f, g), rel=1e-12)

    def test_symmetric(self, grid8, rng):
        f, g = random_field(grid8, rng), random_field(grid8, rng)
        assert inner_product(f, g) == inner_product(g, f)


class TestNorms:
    def test_l2_constant(self):
        g = PeriodicGrid.square(8, half_width=1.0)
        assert norm_l2(g.constant(2.0)) == pytest.approx(4.0, rel=1e-15)

    def test_l2_zero(self, grid8):
        assert norm_l2(grid8.zeros()) == 0.0

    def test_l2_sine(self):
        g = PeriodicGrid.square(32)
        f = g.sample(lambda x, y: np.sin(x))
        assert norm_l2(f) == pytest.approx(math.sqrt(2) * math.pi, rel=1e-13)
        assert norm_l2(f) == pytest.approx(math.sqrt(brute_inner(f, f)), rel=1e-13)

    def test_linf(self, grid16):
        assert norm_linf(grid16.constant(-3.0)) == 3.0
        assert norm_linf(grid16.zeros()) == 0.0
        assert norm_linf(grid16.sample(lambda x, y: np.sin(x))) == pytest.approx(1.0, abs=1e-15)


class TestMean:
    def test_constant(self, grid8):
        assert mean(grid8.constant(-0.7)) == pytest.approx(-0.7, rel=1e-15)

    def test_odd_function(self, grid16):
        assert abs(mean(grid16.sample(lambda x, y: np.sin(x)))) < 1e-15

    def test_tiled_pattern(self):
        g = PeriodicGrid.square(8, 1.0)
        f = GridFunction(g, np.tile(np.array([[1.0, 2.0], [3.0, 4.0]]), (4, 4)))
        assert mean(f) == pytest.approx(2.5, rel=1e-15)


fields = st.integers(0, 2**32 - 1).map(lambda s: np.random.default_rng(s))


@settings(max_examples=50, deadline=None)
@given(seed=fields, a=st.floats(-1e3, 1e3))
def test_bilinearity(seed, a):
    g = PeriodicGrid(1.5, 2.5, 8, 12)
    f, p, h = (random_field(g, seed) for _ in range(3))
    lhs = inner_product(a * f + p, h)
    rhs = a * inner_product(f, h) + inner_product(p, h)
    scale = (abs(a) * norm_l2(f) + norm_l2(p)) * norm_l2(h)
    assert abs(lhs - rhs) <= 1e-12 * scale


@settings(max_examples=50, deadline=None)
@given(seed=fields)
def test_cauchy_schwarz(seed):
    g = PeriodicGrid.square(8)
    f, h = random_field(g, seed), random_field(g, seed)
    assert abs(inner_product(f, h)) <= norm_l2(f) * norm_l2(h) + 1e-12


@settings(max_examples=50, deadline=None)
@given(seed=fields)
def test_norm_is_sqrt_of_inner_product(seed):
    f = random_field(PeriodicGrid.square(8), seed)
    assert norm_l2(f) == math.sqrt(inner_product(f, f))


@settings(max_examples=50, deadline=None)
@given(seed=fields, shift=st.floats(-100, 100))
def test_zero_mean_projection(seed, shift):
    f = random_field(PeriodicGrid.square(16), seed) + shift
    assert abs(mean(f - mean(f))) <= 1e-13
