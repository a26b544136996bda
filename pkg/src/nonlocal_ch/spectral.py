"""Discrete Fourier transform pair and Fourier collocation operators.

The forward transform is the unnormalized sum

    F[k, l] = sum_{i,j} f_ij exp(-i k pi x_i / X) exp(-i l pi y_j / Y)

over the node coordinates (not the array offsets), and the inverse carries
the ``1/(nx*ny)`` factor.  Coefficients are stored in FFT order: mode
``(k, l)`` with ``-nx/2 < k <= nx/2`` lives at ``coeffs[l % ny, k % nx]``.

Derivative symbols keep the Nyquist mode, ``i*(nx/2)*pi/X`` for the first
x-derivative.  Applied to a real field with Nyquist content this yields a
purely imaginary Nyquist component, so :func:`gradient` and
:func:`divergence` may return complex-valued grid functions.  With that
convention the summation-by-parts identities hold for every grid function.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SymmetryError
from .grid import GridFunction, PeriodicGrid, _require_same_grid, inner_product, mean, norm_linf

SYMMETRY_TOL = 1e-12
ZERO_MEAN_TOL = 1e-10


def signed_modes(n: int) -> np.ndarray:
    """Mode numbers ``k`` in FFT storage order, ``-n/2 < k <= n/2``."""
    idx = np.arange(n)
    return (idx + n // 2 - 1) % n - n // 2 + 1


@dataclass(frozen=True, eq=False)
class SymbolTable:
    """Fourier multipliers of ``D_x``, ``D_y`` and ``Delta_N`` on one grid.

    Arrays have shape ``(ny, nx)`` in FFT storage order and are read-only.
    """

    grid: PeriodicGrid
    dx_symbol: np.ndarray
    dy_symbol: np.ndarray
    laplace_symbol: np.ndarray

    @property
    def max_abs_eigenvalue(self) -> float:
        return float(np.max(-self.laplace_symbol))


@functools.lru_cache(maxsize=64)
def symbols(grid: PeriodicGrid) -> SymbolTable:
    kx = signed_modes(grid.nx) * (math.pi / grid.half_width_x)
    ky = signed_modes(grid.ny) * (math.pi / grid.half_width_y)
    dx = np.broadcast_to(1j * kx[None, :], grid.shape).copy()
    dy = np.broadcast_to(1j * ky[:, None], grid.shape).copy()
    lap = -(kx[None, :] ** 2) - ky[:, None] ** 2
    for a in (dx, dy, lap):
        a.flags.writeable = False
    return SymbolTable(grid, dx, dy, lap)


@functools.lru_cache(maxsize=64)
def _phases(grid: PeriodicGrid) -> np.ndarray:
    # exp(-i k pi x_1 / X) relates the node-based sum to a 0-based FFT
    kx = signed_modes(grid.nx)
    ky = signed_modes(grid.ny)
    px = np.exp(-1j * kx * math.pi * grid.x[0] / grid.half_width_x)
    py = np.exp(-1j * ky * math.pi * grid.y[0] / grid.half_width_y)
    out = py[:, None] * px[None, :]
    out.flags.writeable = False
    return out


class SpectralField:
    """Fourier coefficients of a grid function, paired with its grid."""

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: PeriodicGrid, coeffs):
        arr = np.array(coeffs, dtype=np.complex128)
        if arr.shape != grid.shape:
            raise ValueError(f"coefficient array {arr.shape} does not match grid {grid.shape}")
        arr.flags.writeable = False
        self.grid = grid
        self.coeffs = arr

    def coeff(self, k: int, l: int) -> complex:
        """Coefficient of mode ``(k, l)``; indices are taken modulo the grid."""
        return complex(self.coeffs[l % self.grid.ny, k % self.grid.nx])

    @classmethod
    def from_modes(cls, grid: PeriodicGrid, modes: dict[tuple[int, int], complex]) -> SpectralField:
        arr = np.zeros(grid.shape, dtype=np.complex128)
        for (k, l), c in modes.items():
            arr[l % grid.ny, k % grid.nx] += c
        return cls(grid, arr)

    def conjugate_symmetry_defect(self) -> float:
        """``max |F[-k,-l] - conj(F[k,l])|`` relative to ``max |F|``."""
        c = self.coeffs
        mirrored = np.roll(c[::-1, ::-1], (1, 1), axis=(0, 1))
        scale = float(np.max(np.abs(c)))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(mirrored - np.conj(c)))) / scale


def forward(f: GridFunction) -> SpectralField:
    """Transform a grid function to its Fourier coefficients."""
    return SpectralField(f.grid, np.fft.fft2(f.values) * _phases(f.grid))


def _inverse_complex(F: SpectralField) -> np.ndarray:
    return np.fft.ifft2(F.coeffs * np.conj(_phases(F.grid)))


def inverse(F: SpectralField) -> GridFunction:
    """Reconstruct a real grid function from its coefficients.

    Raises:
        SymmetryError: if the imaginary residue exceeds ``1e-12`` relative
            to the real part, i.e. ``F`` is not the transform of a real field.
    """
    out = _inverse_complex(F)
    scale = float(np.max(np.abs(out.real)))
    residue = float(np.max(np.abs(out.imag)))
    if residue > SYMMETRY_TOL * max(scale, 1e-300):
        raise SymmetryError(
            f"inverse transform has imaginary residue {residue:.3e} (real scale {scale:.3e})"
        )
    return GridFunction(F.grid, out.real)


def inverse_complex(F: SpectralField) -> GridFunction:
    """Inverse transform without discarding the imaginary part."""
    return GridFunction(F.grid, _inverse_complex(F))


def forward_direct(f: GridFunction) -> SpectralField:
    """Reference O(N^4) evaluation of the forward transform sum."""
    grid = f.grid
    k = signed_modes(grid.nx)
    l = signed_modes(grid.ny)
    ex = np.exp(-1j * np.pi * np.multiply.outer(k, grid.x) / grid.half_width_x)  # (k, i)
    ey = np.exp(-1j * np.pi * np.multiply.outer(l, grid.y) / grid.half_width_y)  # (l, j)
    kernel = ey[:, None, :, None] * ex[None, :, None, :]  # (l, k, j, i)
    return SpectralField(grid, np.einsum("lkji,ji->lk", kernel, f.values))


def inverse_direct(F: SpectralField) -> GridFunction:
    """Reference O(N^4) evaluation of the inverse transform sum (complex)."""
    grid = F.grid
    k = signed_modes(grid.nx)
    l = signed_modes(grid.ny)
    ex = np.exp(1j * np.pi * np.multiply.outer(grid.x, k) / grid.half_width_x)  # (i, k)
    ey = np.exp(1j * np.pi * np.multiply.outer(grid.y, l) / grid.half_width_y)  # (j, l)
    kernel = ey[:, None, :, None] * ex[None, :, None, :]  # (j, i, l, k)
    vals = np.einsum("jilk,lk->ji", kernel, F.coeffs) / grid.size
    return GridFunction(grid, vals)


def apply_multiplier(f: GridFunction, symbol: np.ndarray) -> GridFunction:
    """``P^{-1} (symbol * P f)``; complex output is kept only if needed.

    A diagonal multiplier commutes with the node phase factors, so the
    plain FFT pair is used.
    """
    out = np.fft.ifft2(symbol * np.fft.fft2(f.values))
    if not f.is_complex and np.isrealobj(symbol):
        return GridFunction(f.grid, out.real)
    return _realify(f.grid, out, float(np.max(np.abs(symbol))) * norm_linf(f))


def _realify(grid: PeriodicGrid, out: np.ndarray, scale: float) -> GridFunction:
    # imaginary parts at round-off level relative to |symbol| * |f| are dropped
    if float(np.max(np.abs(out.imag))) <= SYMMETRY_TOL * scale:
        return GridFunction(grid, out.real)
    return GridFunction(grid, out)


def dx(f: GridFunction) -> GridFunction:
    return apply_multiplier(f, symbols(f.grid).dx_symbol)


def dy(f: GridFunction) -> GridFunction:
    return apply_multiplier(f, symbols(f.grid).dy_symbol)


def gradient(f: GridFunction) -> tuple[GridFunction, GridFunction]:
    """Discrete gradient ``(D_x f, D_y f)``."""
    return dx(f), dy(f)


def divergence(fx: GridFunction, fy: GridFunction) -> GridFunction:
    """Discrete divergence ``D_x fx + D_y fy``."""
    _require_same_grid(fx, fy)
    tab = symbols(fx.grid)
    spec = tab.dx_symbol * np.fft.fft2(fx.values) + tab.dy_symbol * np.fft.fft2(fy.values)
    out = np.fft.ifft2(spec)
    scale = (
        float(np.max(np.abs(tab.dx_symbol))) * norm_linf(fx)
        + float(np.max(np.abs(tab.dy_symbol))) * norm_linf(fy)
    )
    return _realify(fx.grid, out, scale)


def laplacian(f: GridFunction) -> GridFunction:
    """Discrete Laplacian ``D_x^2 f + D_y^2 f``."""
    return apply_multiplier(f, symbols(f.grid).laplace_symbol)


def _check_zero_mean(f: GridFunction) -> None:
    m = mean(f)
    if abs(m) > ZERO_MEAN_TOL * norm_linf(f):
        raise DomainError(f"operator requires a zero-mean grid function; measured mean {m:.6e}")


def inverse_laplacian(f: GridFunction) -> GridFunction:
    """Zero-mean solution ``g`` of ``-Delta_N g = f``.

    Raises:
        DomainError: if ``f`` does not have zero mean.
    """
    _check_zero_mean(f)
    lam = symbols(f.grid).laplace_symbol
    inv = np.zeros_like(lam)
    np.divide(-1.0, lam, out=inv, where=lam != 0.0)
    return apply_multiplier(f, inv)


def norm_hm1(f: GridFunction) -> float:
    """Discrete H^{-1} norm ``sqrt(<f, (-Delta_N)^{-1} f>)`` of a zero-mean field."""
    return math.sqrt(max(inner_product(f, inverse_laplacian(f)), 0.0))
