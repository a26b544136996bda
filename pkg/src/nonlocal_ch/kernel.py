"""Interaction kernels, discrete periodic convolution, and the nonlocal operator.

A kernel is tabulated on the shifted mesh ``(i*hx, j*hy)``, ``1 <= i <= nx``,
``1 <= j <= ny``, using the same ``(ny, nx)`` storage as grid functions.
Because of periodicity, entry ``[ny-1, nx-1]`` is the value at the origin.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, KernelError, ParameterError
from .fieldio import KERNEL_TAG, read_snapshot, write_field
from .grid import (
    GridFunction,
    PeriodicGrid,
    inner_product,
    norm_l2,
    vector_norm_l2,
    vector_norm_linf,
)
from . import spectral

EVENNESS_TOL = 1e-12
MOMENT_TOL = 1e-8


def _origin_aligned(values: np.ndarray) -> np.ndarray:
    # index 0 <-> offset 0, index q <-> offset q*h
    return np.roll(values, (1, 1), axis=(0, 1))


def _from_origin_aligned(arr: np.ndarray) -> np.ndarray:
    return np.roll(arr, (-1, -1), axis=(0, 1))


def _min_image_offsets(grid: PeriodicGrid) -> tuple[np.ndarray, np.ndarray]:
    """Minimum-image displacement of every kernel node, in storage layout."""
    qx = np.arange(grid.nx)
    qy = np.arange(grid.ny)
    dx = np.where(qx <= grid.nx // 2, qx, qx - grid.nx) * grid.hx
    dy = np.where(qy <= grid.ny // 2, qy, qy - grid.ny) * grid.hy
    ddx, ddy = np.meshgrid(dx, dy, indexing="xy")
    return _from_origin_aligned(ddx), _from_origin_aligned(ddy)


def _half_second_moment(grid: PeriodicGrid, values: np.ndarray) -> float:
    ddx, ddy = _min_image_offsets(grid)
    return 0.5 * grid.cell_area * float(np.sum(values * (ddx**2 + ddy**2)))


class Kernel:
    """Discrete interaction kernel with cached transform and moments.

    Use :func:`make_gaussian_kernel`, :func:`load_kernel` or
    :meth:`Kernel.from_values`; the constructor validates nonnegativity,
    evenness and positivity of ``J (*) 1``.
    """

    __slots__ = ("grid", "values", "hat", "j_star_one", "second_moment", "_symbol")

    def __init__(self, grid: PeriodicGrid, values):
        arr = np.array(values, dtype=np.float64)
        if arr.shape != grid.shape:
            raise DimensionError(f"kernel of shape {arr.shape} does not fit grid {grid.shape}")
        if not np.isfinite(arr).all():
            raise KernelError("kernel values must be finite")
        if np.any(arr < 0.0):
            raise KernelError(f"kernel must be nonnegative; min value {arr.min():.3e}")
        aligned = _origin_aligned(arr)
        mirrored = np.roll(aligned[::-1, ::-1], (1, 1), axis=(0, 1))
        scale = float(np.max(np.abs(arr)))
        defect = float(np.max(np.abs(mirrored - aligned)))
        if defect > EVENNESS_TOL * scale:
            raise KernelError(f"kernel is not even: defect {defect:.3e} relative to {scale:.3e}")
        arr.flags.writeable = False
        self.grid = grid
        self.values = arr
        self.hat = np.fft.fft2(aligned)
        self.hat.flags.writeable = False
        self.j_star_one = grid.cell_area * float(np.sum(arr))
        if not self.j_star_one > 0.0:
            raise KernelError("kernel has J(*)1 = 0")
        self.second_moment = _half_second_moment(grid, arr)
        sym = self.j_star_one - grid.cell_area * self.hat.real
        sym.flags.writeable = False
        self._symbol = sym

    @classmethod
    def from_values(cls, grid: PeriodicGrid, values, renormalize: bool = True) -> Kernel:
        """Build a kernel from tabulated values, enforcing unit half-second-moment.

        With ``renormalize=False`` the values must already satisfy it.
        """
        arr = np.asarray(values, dtype=np.float64).reshape(grid.shape)
        moment = _half_second_moment(grid, arr)
        if not moment > 0.0:
            raise KernelError("kernel has vanishing second moment")
        if renormalize:
            arr = arr / moment
        elif abs(moment - 1.0) > MOMENT_TOL:
            raise KernelError(f"kernel half-second-moment is {moment:.12g}, expected 1")
        return cls(grid, arr)

    @property
    def nonlocal_symbol(self) -> np.ndarray:
        """Fourier multiplier of ``L_N``: ``J(*)1 - hx*hy*Jhat`` (FFT order)."""
        return self._symbol

    def as_grid_function(self) -> GridFunction:
        return GridFunction(self.grid, self.values)

    def __repr__(self):
        return (
            f"Kernel(nx={self.grid.nx}, ny={self.grid.ny}, "
            f"j_star_one={self.j_star_one:.6g}, second_moment={self.second_moment:.6g})"
        )


@dataclass(frozen=True)
class ModelParams:
    """Interfacial parameter and the diffusivity margin ``eps^2 J(*)1 - 1``."""

    epsilon: float
    gamma0: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ParameterError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.gamma0 > 0:
            raise ParameterError(f"kernel too wide for epsilon: gamma0={self.gamma0:.6g}")

    @classmethod
    def from_kernel(cls, epsilon: float, kernel: Kernel) -> ModelParams:
        return cls(float(epsilon), epsilon**2 * kernel.j_star_one - 1.0)

    def for_kernel(self, kernel: Kernel) -> ModelParams:
        return ModelParams.from_kernel(self.epsilon, kernel)


def make_gaussian_kernel(grid: PeriodicGrid, sigma: float) -> Kernel:
    """Periodized Gaussian ``alpha*exp(-|x|^2/sigma^2)`` with unit half-second-moment.

    Images over the 3x3 neighbouring periods are summed.  ``alpha`` is
    fixed by the discrete moment, not the continuum one.

    Raises:
        ParameterError: unless ``0 < sigma <= min(X, Y)/4``.
    """
    limit = min(grid.half_width_x, grid.half_width_y) / 4.0
    if not (math.isfinite(sigma) and 0.0 < sigma <= limit):
        raise ParameterError(f"sigma must lie in (0, {limit:.6g}], got {sigma!r}")
    ddx, ddy = _min_image_offsets(grid)
    lx, ly = 2.0 * grid.half_width_x, 2.0 * grid.half_width_y
    raw = np.zeros(grid.shape)
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            raw += np.exp(-((ddx + a * lx) ** 2 + (ddy + b * ly) ** 2) / sigma**2)
    return Kernel.from_values(grid, raw, renormalize=True)


def load_kernel(path: str | os.PathLike, renormalize: bool = True) -> Kernel:
    """Read a tabulated kernel written in the ``nch-kernel v1`` format."""
    snap = read_snapshot(path, KERNEL_TAG)
    return Kernel.from_values(snap.grid, snap.values, renormalize=renormalize)


def save_kernel(path: str | os.PathLike, kernel: Kernel) -> None:
    write_field(path, kernel.as_grid_function(), 0.0, tag=KERNEL_TAG)


def _check_grid(J: Kernel, f: GridFunction) -> None:
    if J.grid != f.grid:
        raise DimensionError(f"kernel grid {J.grid} does not match field grid {f.grid}")


def convolve(J: Kernel, f: GridFunction) -> GridFunction:
    """Discrete periodic convolution ``hx*hy*sum_mn J[i-m, j-n] f[m, n]`` via FFT."""
    _check_grid(J, f)
    out = np.fft.ifft2(J.hat * np.fft.fft2(f.values)) * f.grid.cell_area
    return GridFunction(f.grid, out if f.is_complex else out.real)


def convolve_direct(J: Kernel, f: GridFunction) -> GridFunction:
    """Reference O(N^4) evaluation of the convolution sum."""
    _check_grid(J, f)
    grid = f.grid
    # 1-based kernel index i-m maps to storage offset (i-m-1) mod n
    p = np.arange(grid.nx)
    q = np.arange(grid.ny)
    ix = (p[:, None] - p[None, :] - 1) % grid.nx  # (i, m)
    iy = (q[:, None] - q[None, :] - 1) % grid.ny  # (j, n)
    gathered = J.values[iy[:, None, :, None], ix[None, :, None, :]]  # (j, i, n, m)
    return GridFunction(grid, grid.cell_area * np.einsum("jinm,nm->ji", gathered, f.values))


def nonlocal_op(J: Kernel, f: GridFunction) -> GridFunction:
    """``L_N f = (J(*)1) f - J(*)f``."""
    return J.j_star_one * f - convolve(J, f)


class Lemma22Result(NamedTuple):
    lhs: float
    rhs: float
    constant: float
    grad_kernel_sup: float


def kernel_gradient_sup(J: Kernel) -> float:
    """``||grad_N J||_inf``, the sup of the pointwise Euclidean norm."""
    jx, jy = spectral.gradient(J.as_grid_function())
    return vector_norm_linf(jx, jy)


def lemma22_check(J: Kernel, f: GridFunction, g: GridFunction, alpha: float) -> Lemma22Result:
    """Both sides of ``|<J(*)f, Delta_N g>| <= alpha ||f||^2 + C/alpha ||grad_N g||^2``.

    ``C = |Omega|^2 ||grad_N J||_inf^2 / 4``.
    """
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha!r}")
    _check_grid(J, f)
    _check_grid(J, g)
    c_j = kernel_gradient_sup(J)
    const = 0.25 * c_j**2 * f.grid.area**2
    lhs = abs(inner_product(convolve(J, f), spectral.laplacian(g)))
    gx, gy = spectral.gradient(g)
    rhs = alpha * norm_l2(f) ** 2 + const / alpha * vector_norm_l2(gx, gy) ** 2
    return Lemma22Result(lhs, rhs, const, c_j)


def convolution_laplacian_sharp_constant(J: Kernel) -> float:
    """Smallest ``C`` for which the :func:`lemma22_check` inequality holds for all ``f, g, alpha``.

    ``|<J(*)f, Delta_N g>| <= K ||f|| ||grad_N g||`` with ``K`` the operator
    norm of ``f -> grad_N (J(*)f)``, i.e. ``max_k |kappa_k| hx hy |J^_k|``;
    minimizing over ``alpha`` gives ``C = K^2 / 4``.
    """
    lam = spectral.symbols(J.grid).laplace_symbol
    k = float(np.max(np.sqrt(-lam) * J.grid.cell_area * np.abs(J.hat)))
    return 0.25 * k * k
