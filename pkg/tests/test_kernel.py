import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonlocal_ch import spectral
from nonlocal_ch.errors import DimensionError, KernelError, ParameterError
from nonlocal_ch.grid import GridFunction, PeriodicGrid, inner_product, norm_l2, norm_linf
from nonlocal_ch.kernel import (
    Kernel,
    ModelParams,
    convolve,
    convolve_direct,
    kernel_gradient_sup,
    lemma22_check,
    convolution_laplacian_sharp_constant,
    load_kernel,
    make_gaussian_kernel,
    nonlocal_op,
    save_kernel,
)
from nonlocal_ch.oracles import convolution_matrix

from conftest import random_field


def brute_convolution(J, f):
    """Literal double sum with 1-based kernel indices wrapped into 1..n."""
    g = f.grid
    out = np.zeros(g.shape)
    for j in range(1, g.ny + 1):
        for i in range(1, g.nx + 1):
            s = 0.0
            for n in range(1, g.ny + 1):
                for m in range(1, g.nx + 1):
                    ki = (i - m - 1) % g.nx + 1
                    kj = (j - n - 1) % g.ny + 1
                    s += J.values[kj - 1, ki - 1] * f.values[n - 1, m - 1]
            out[j - 1, i - 1] = g.cell_area * s
    return out


def brute_moment(J):
    g = J.grid
    total = 0.0
    for j in range(1, g.ny + 1):
        for i in range(1, g.nx + 1):
            # periodic distance of node (i*hx, j*hy) from the origin
            dx = min(i, g.nx - i) * g.hx
            dy = min(j, g.ny - j) * g.hy
            total += J.values[j - 1, i - 1] * (dx * dx + dy * dy)
    return 0.5 * g.cell_area * total


class TestGaussian:
    @pytest.mark.parametrize("sigma", [0.2, 0.5, math.pi / 4])
    def test_unit_second_moment(self, sigma):
        J = make_gaussian_kernel(PeriodicGrid.square(32), sigma)
        assert J.second_moment == pytest.approx(1.0, abs=1e-12)
        assert brute_moment(J) == pytest.approx(1.0, abs=1e-12)

    def test_j_star_one_continuum_value(self):
        J = make_gaussian_kernel(PeriodicGrid.square(64), 0.2)
        assert J.j_star_one == pytest.approx(2 / 0.2**2, rel=0.01)

    def test_j_star_one_quadrature(self):
        # independent high-resolution quadrature of the normalized continuum kernel
        sigma = 0.3
        s = np.linspace(-math.pi, math.pi, 2001)[:-1] + math.pi / 2000
        xx, yy = np.meshgrid(s, s)
        w = np.exp(-(xx**2 + yy**2) / sigma**2)
        da = (s[1] - s[0]) ** 2
        expected = np.sum(w) * da / (0.5 * np.sum(w * (xx**2 + yy**2)) * da)
        J = make_gaussian_kernel(PeriodicGrid.square(64), sigma)
        assert J.j_star_one == pytest.approx(expected, rel=1e-6)

    def test_even_and_nonnegative(self, kernel16):
        aligned = np.roll(kernel16.values, (1, 1), axis=(0, 1))
        mirrored = np.roll(aligned[::-1, ::-1], (1, 1), axis=(0, 1))
        np.testing.assert_allclose(mirrored, aligned, rtol=1e-12, atol=0)
        assert np.all(kernel16.values >= 0)

    def test_peak_at_origin(self, kernel16):
        assert kernel16.values[-1, -1] == kernel16.values.max()

    @pytest.mark.parametrize("sigma", [0.0, -0.1, math.pi / 4 + 1e-9, math.nan])
    def test_sigma_out_of_range(self, grid8, sigma):
        with pytest.raises(ParameterError):
            make_gaussian_kernel(grid8, sigma)

    def test_hat_real(self, kernel16):
        assert np.max(np.abs(kernel16.hat.imag)) <= 1e-11 * np.max(np.abs(kernel16.hat))


class TestKernelValidation:
    def test_negative_rejected(self, grid8):
        vals = np.ones(grid8.shape)
        vals[0, 0] = -1e-3
        with pytest.raises(KernelError, match="nonnegative"):
            Kernel(grid8, vals)

    def test_odd_kernel_rejected(self, grid8):
        vals = np.ones(grid8.shape)
        vals[0, 0] = 2.0  # offset (h, h) without its mirror (-h, -h)
        with pytest.raises(KernelError, match="even"):
            Kernel(grid8, vals)

    def test_zero_kernel_rejected(self, grid8):
        with pytest.raises(KernelError):
            Kernel(grid8, np.zeros(grid8.shape))

    def test_from_values_moment_check(self, kernel8):
        with pytest.raises(KernelError, match="second-moment"):
            Kernel.from_values(kernel8.grid, 2 * kernel8.values, renormalize=False)
        K = Kernel.from_values(kernel8.grid, 2 * kernel8.values, renormalize=True)
        np.testing.assert_allclose(K.values, kernel8.values, rtol=1e-14)

    def test_file_round_trip(self, kernel16, tmp_path):
        p = tmp_path / "k.dat"
        save_kernel(p, kernel16)
        assert p.read_text().startswith("# nch-kernel v1\n")
        K = load_kernel(p, renormalize=False)
        assert np.array_equal(K.values, kernel16.values)

    def test_file_without_renormalization(self, kernel8, tmp_path):
        p = tmp_path / "k.dat"
        save_kernel(p, Kernel(kernel8.grid, 3 * kernel8.values))
        with pytest.raises(KernelError):
            load_kernel(p, renormalize=False)
        assert load_kernel(p).second_moment == pytest.approx(1.0, abs=1e-12)


class TestModelParams:
    def test_gamma0(self, kernel8):
        p = ModelParams.from_kernel(0.9, kernel8)
        assert p.gamma0 == pytest.approx(0.81 * kernel8.j_star_one - 1)

    def test_kernel_too_wide(self, kernel8):
        with pytest.raises(ParameterError, match="kernel too wide for epsilon: gamma0="):
            ModelParams.from_kernel(0.1, kernel8)

    def test_bad_epsilon(self):
        with pytest.raises(ParameterError):
            ModelParams(0.0, 1.0)


class TestConvolution:
    def test_constant(self, kernel8):
        out = convolve(kernel8, kernel8.grid.constant(1.0))
        np.testing.assert_allclose(out.values, kernel8.j_star_one, rtol=1e-13)

    def test_zero(self, kernel8):
        assert norm_linf(convolve(kernel8, kernel8.grid.zeros())) == 0

    def test_brute_force(self, kernel8, rng):
        f = random_field(kernel8.grid, rng)
        want = brute_convolution(kernel8, f)
        got = convolve(kernel8, f).values
        assert np.max(np.abs(got - want)) <= 1e-11 * np.max(np.abs(want))
        np.testing.assert_allclose(convolve_direct(kernel8, f).values, want, rtol=1e-12)

    def test_rectangular_grid(self, rng):
        g = PeriodicGrid(2.0, 1.0, 12, 8)
        J = make_gaussian_kernel(g, 0.2)
        f = random_field(g, rng)
        assert norm_linf(convolve(J, f) - convolve_direct(J, f)) <= 1e-11 * norm_linf(convolve_direct(J, f))

    def test_matrix_oracle(self, kernel8, rng):
        f = random_field(kernel8.grid, rng)
        np.testing.assert_allclose(convolution_matrix(kernel8) @ f.flat, convolve(kernel8, f).flat, rtol=1e-12)

    def test_grid_mismatch(self, kernel8):
        with pytest.raises(DimensionError):
            convolve(kernel8, PeriodicGrid.square(16).zeros())

    def test_shift_equivariance(self, kernel16, rng):
        f = random_field(kernel16.grid, rng)
        a = convolve(kernel16, f.shifted(3, 5))
        b = convolve(kernel16, f).shifted(3, 5)
        assert norm_linf(a - b) <= 1e-12 * norm_linf(b)


class TestNonlocalOp:
    def test_annihilates_constants(self, kernel8):
        c = 2.5
        out = nonlocal_op(kernel8, kernel8.grid.constant(c))
        assert norm_linf(out) <= 1e-12 * abs(c) * kernel8.j_star_one

    def test_zero(self, kernel8):
        assert norm_linf(nonlocal_op(kernel8, kernel8.grid.zeros())) == 0

    def test_brute_force(self, kernel8, rng):
        f = random_field(kernel8.grid, rng)
        want = kernel8.j_star_one * f.values - brute_convolution(kernel8, f)
        got = nonlocal_op(kernel8, f).values
        assert np.max(np.abs(got - want)) <= 1e-11 * np.max(np.abs(want))

    def test_symbol_matches_operator(self, kernel8, rng):
        f = random_field(kernel8.grid, rng)
        via_symbol = spectral.apply_multiplier(f, kernel8.nonlocal_symbol)
        np.testing.assert_allclose(via_symbol.values, nonlocal_op(kernel8, f).values, atol=1e-12)


class TestConvolutionLaplacianBound:
    def test_zero_f(self, kernel16, rng):
        r = lemma22_check(kernel16, kernel16.grid.zeros(), random_field(kernel16.grid, rng), 1.0)
        assert r.lhs == 0 and r.rhs >= 0

    def test_constant_g(self, kernel16, rng):
        r = lemma22_check(kernel16, random_field(kernel16.grid, rng), kernel16.grid.constant(4.0), 1.0)
        assert r.lhs <= 1e-12

    @pytest.mark.parametrize("alpha", [0.1, 1.0, 10.0])
    def test_random_trials(self, kernel16, rng, alpha):
        for _ in range(100):
            r = lemma22_check(kernel16, random_field(kernel16.grid, rng), random_field(kernel16.grid, rng), alpha)
            assert r.lhs <= r.rhs

    def test_bad_alpha(self, kernel8):
        g = kernel8.grid
        with pytest.raises(ParameterError):
            lemma22_check(kernel8, g.zeros(), g.zeros(), 0.0)

    def test_proof_constant(self, kernel16):
        r = lemma22_check(kernel16, kernel16.grid.zeros(), kernel16.grid.zeros(), 1.0)
        assert r.constant == pytest.approx(0.25 * kernel_gradient_sup(kernel16) ** 2 * kernel16.grid.area**2)

    def test_sharp_constant_attained(self, kernel16):
        # the extremal pair is a single Fourier mode, which makes the bound tight
        C = convolution_laplacian_sharp_constant(kernel16)
        g = kernel16.grid
        lam = spectral.symbols(g).laplace_symbol
        weights = np.sqrt(-lam) * g.cell_area * np.abs(kernel16.hat)
        l, k = np.unravel_index(np.argmax(weights), weights.shape)
        kk, ll = spectral.signed_modes(g.nx)[k], spectral.signed_modes(g.ny)[l]
        f = g.sample(lambda x, y: np.cos(kk * x + ll * y))
        K = math.sqrt(4 * C)
        gx, gy = spectral.gradient(f)
        grad = math.sqrt(inner_product(gx, gx) + inner_product(gy, gy))
        alpha = K * grad / (2 * norm_l2(f))
        lhs = abs(inner_product(convolve(kernel16, f), spectral.laplacian(f)))
        rhs = alpha * norm_l2(f) ** 2 + C / alpha * grad**2
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_sharp_below_proof_constant(self, kernel16):
        r = lemma22_check(kernel16, kernel16.grid.zeros(), kernel16.grid.zeros(), 1.0)
        assert convolution_laplacian_sharp_constant(kernel16) <= r.constant


seeds = st.integers(0, 2**32 - 1).map(np.random.default_rng)
KERNELS = {n: make_gaussian_kernel(PeriodicGrid.square(n), math.pi / 4) for n in (8, 16)}


@settings(max_examples=30, deadline=None)
@given(rng=seeds, n=st.sampled_from([8, 16]))
def test_nonlocal_self_adjoint(rng, n):
    J = KERNELS[n]
    f, g = random_field(J.grid, rng), random_field(J.grid, rng)
    a = inner_product(nonlocal_op(J, f), g)
    b = inner_product(f, nonlocal_op(J, g))
    assert abs(a - b) <= 1e-11 * norm_l2(nonlocal_op(J, f)) * norm_l2(g)


@settings(max_examples=30, deadline=None)
@given(rng=seeds, n=st.sampled_from([8, 16]))
def test_nonlocal_psd(rng, n):
    J = KERNELS[n]
    f = random_field(J.grid, rng)
    assert inner_product(nonlocal_op(J, f), f) >= -1e-11 * norm_l2(f) ** 2


@settings(max_examples=30, deadline=None)
@given(rng=seeds, n=st.sampled_from([8, 16]))
def test_nonlocal_commutes_with_laplacian(rng, n):
    J = KERNELS[n]
    f = random_field(J.grid, rng)
    d = nonlocal_op(J, spectral.laplacian(f)) - spectral.laplacian(nonlocal_op(J, f))
    lam = spectral.symbols(J.grid).max_abs_eigenvalue
    assert norm_linf(d) <= 1e-9 * norm_linf(f) * lam


@settings(max_examples=20, deadline=None)
@given(rng=seeds, n=st.sampled_from([4, 8, 16]), sigma_frac=st.floats(0.05, 1.0))
def test_fft_convolution_matches_direct(rng, n, sigma_frac):
    g = PeriodicGrid.square(n)
    # keep sigma at least one mesh width so the kernel is resolved
    sigma = max(sigma_frac * math.pi / 4, g.hx) if g.hx <= math.pi / 4 else math.pi / 4
    J = make_gaussian_kernel(g, sigma)
    f = random_field(g, rng)
    direct = convolve_direct(J, f)
    assert norm_linf(convolve(J, f) - direct) <= 1e-11 * norm_linf(direct)


def test_unresolved_kernel_rejected():
    with pytest.raises(KernelError, match="second moment"):
        make_gaussian_kernel(PeriodicGrid.square(4), 0.05)
