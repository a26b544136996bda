"""Dense-matrix reference operators for cross-checking the spectral path.

These never call an FFT.  The second-derivative matrix is the closed-form
Fourier collocation matrix for an even number of points; the convolution
matrix is assembled entry by entry from the discrete convolution sum.
Intended for grids up to about 16x16.
"""

from __future__ import annotations

import math

import numpy as np

from .grid import GridFunction, PeriodicGrid
from .kernel import Kernel


def second_derivative_matrix(n: int, half_width: float) -> np.ndarray:
    """Fourier collocation matrix of ``d^2/dx^2`` on ``n`` periodic nodes of period ``2*half_width``."""
    h = 2.0 * math.pi / n
    d = np.arange(n)[:, None] - np.arange(n)[None, :]
    with np.errstate(divide="ignore"):
        off = -((-1.0) ** d) / (2.0 * np.sin(0.5 * h * d) ** 2)
    mat = np.where(d == 0, -(math.pi**2) / (3.0 * h**2) - 1.0 / 6.0, off)
    return mat * (math.pi / half_width) ** 2


def laplacian_matrix(grid: PeriodicGrid) -> np.ndarray:
    """Dense ``Delta_N`` acting on row-major flattened grid functions."""
    d2x = second_derivative_matrix(grid.nx, grid.half_width_x)
    d2y = second_derivative_matrix(grid.ny, grid.half_width_y)
    return np.kron(np.eye(grid.ny), d2x) + np.kron(d2y, np.eye(grid.nx))


def convolution_matrix(J: Kernel) -> np.ndarray:
    """Dense ``f -> J (*) f`` from the defining double sum."""
    grid = J.grid
    mat = np.empty((grid.size, grid.size))
    for j in range(grid.ny):
        for i in range(grid.nx):
            row = j * grid.nx + i
            for n in range(grid.ny):
                for m in range(grid.nx):
                    mat[row, n * grid.nx + m] = J.values[(j - n - 1) % grid.ny, (i - m - 1) % grid.nx]
    return grid.cell_area * mat


def nonlocal_matrix(J: Kernel) -> np.ndarray:
    return J.j_star_one * np.eye(J.grid.size) - convolution_matrix(J)


def dense_step(u: GridFunction, J: Kernel, epsilon: float, dt: float, a: float) -> GridFunction:
    """One stabilized semi-implicit step by a dense linear solve.

    Solves ``[I - dt*Lap*(A*I + eps^2*L)] u1 = u0 + dt*Lap*(u0^3 - u0 - A*u0)``.
    """
    grid = u.grid
    lap = laplacian_matrix(grid)
    lop = nonlocal_matrix(J)
    v = u.flat
    lhs = np.eye(grid.size) - dt * lap @ (a * np.eye(grid.size) + epsilon**2 * lop)
    rhs = v + dt * lap @ (v**3 - v - a * v)
    return GridFunction(grid, np.linalg.solve(lhs, rhs))
