"""Periodic rectangular mesh, grid functions, and discrete inner products.

The domain is ``(-X, X) x (-Y, Y)`` with ``nx x ny`` nodes at
``x_i = -X + i*hx`` and ``y_j = -Y + j*hy`` for ``1 <= i <= nx``,
``1 <= j <= ny``.  Node ``(i, j)`` is stored at array position
``[j - 1, i - 1]`` of a C-contiguous ``(ny, nx)`` array, i.e. flat offset
``(j - 1)*nx + (i - 1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, ParameterError


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic mesh on ``(-X, X) x (-Y, Y)``."""

    half_width_x: float
    half_width_y: float
    nx: int
    ny: int

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if int(n) != n or n < 4 or n % 2:
                raise ParameterError(f"{name} must be an even integer >= 4, got {n!r}")
            object.__setattr__(self, name, int(n))
        for name in ("half_width_x", "half_width_y"):
            w = getattr(self, name)
            if not (math.isfinite(w) and w > 0):
                raise ParameterError(f"{name} must be positive and finite, got {w!r}")
            object.__setattr__(self, name, float(w))

    @classmethod
    def square(cls, n: int, half_width: float = math.pi) -> PeriodicGrid:
        return cls(half_width, half_width, n, n)

    @property
    def hx(self) -> float:
        return 2.0 * self.half_width_x / self.nx

    @property
    def hy(self) -> float:
        return 2.0 * self.half_width_y / self.ny

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def shape(self) -> tuple[int, int]:
        """Array shape ``(ny, nx)`` of grid function storage."""
        return (self.ny, self.nx)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.hx * self.hy

    @property
    def area(self) -> float:
        """Measure of the domain, ``4XY``."""
        return 4.0 * self.half_width_x * self.half_width_y

    @property
    def x(self) -> np.ndarray:
        """Node abscissae ``x_1, ..., x_nx``."""
        return -self.half_width_x + self.hx * np.arange(1, self.nx + 1)

    @property
    def y(self) -> np.ndarray:
        return -self.half_width_y + self.hy * np.arange(1, self.ny + 1)

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinate arrays ``(xx, yy)`` of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y, indexing="xy")

    def refined(self, factor: int) -> PeriodicGrid:
        return PeriodicGrid(self.half_width_x, self.half_width_y, self.nx * factor, self.ny * factor)

    def zeros(self) -> GridFunction:
        return GridFunction(self, np.zeros(self.shape))

    def constant(self, value: float) -> GridFunction:
        return GridFunction(self, np.full(self.shape, float(value)))

    def sample(self, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> GridFunction:
        """Evaluate ``func(x, y)`` at every node."""
        xx, yy = self.meshgrid()
        return GridFunction(self, np.broadcast_to(func(xx, yy), self.shape))


class GridFunction:
    """Periodic grid function on a :class:`PeriodicGrid`.

    Values are normally real.  The first-derivative operators of
    :mod:`nonlocal_ch.spectral` keep the Nyquist mode, which maps a real
    field with Nyquist content to a field with a purely imaginary Nyquist
    component; such results are stored with a complex dtype.

    The stored array is read-only.
    """

    __slots__ = ("grid", "_values")

    def __init__(self, grid: PeriodicGrid, values):
        arr = np.asarray(values)
        if arr.shape == (grid.size,):
            arr = arr.reshape(grid.shape)
        if arr.shape != grid.shape:
            raise DimensionError(
                f"values of shape {arr.shape} do not fit grid with shape {grid.shape}"
            )
        if np.iscomplexobj(arr):
            arr = np.array(arr, dtype=np.complex128, order="C")
        else:
            arr = np.array(arr, dtype=np.float64, order="C")
        if not np.isfinite(arr).all():
            raise ValueError("grid function values must be finite")
        arr.flags.writeable = False
        self.grid = grid
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        """Read-only ``(ny, nx)`` array of node values."""
        return self._values

    @property
    def flat(self) -> np.ndarray:
        """Row-major flat view of length ``nx*ny``."""
        return self._values.reshape(-1)

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self._values)

    def __repr__(self):
        return f"GridFunction(nx={self.grid.nx}, ny={self.grid.ny}, dtype={self._values.dtype})"

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            _require_same_grid(self, other)
            return other._values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self._values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self._values - self._coerce(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._coerce(other) - self._values)

    def __mul__(self, other):
        return GridFunction(self.grid, self._values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self._values / self._coerce(other))

    def __neg__(self):
        return GridFunction(self.grid, -self._values)

    def map(self, func: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
        """Apply a pointwise function to the node values."""
        return GridFunction(self.grid, func(self._values))

    def shifted(self, m: int, n: int) -> GridFunction:
        """Cyclic translation by ``m`` nodes in x and ``n`` nodes in y."""
        return GridFunction(self.grid, np.roll(self._values, (n, m), axis=(0, 1)))


def _require_same_grid(*fields: GridFunction) -> PeriodicGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise DimensionError(f"grid mismatch: {grid} vs {f.grid}")
    return grid


def _pairwise_sum(a: np.ndarray) -> float:
    # np.add.reduce on a contiguous 1-D array uses pairwise summation
    return float(np.add.reduce(np.ascontiguousarray(a).reshape(-1)))


def inner_product(f: GridFunction, g: GridFunction) -> float:
    """Discrete L2 inner product ``hx*hy*sum(f_ij * g_ij)``.

    For complex-valued fields the real part of ``sum(f * conj(g))`` is
    returned, which reduces to the usual sum for real data.
    """
    grid = _require_same_grid(f, g)
    if f.is_complex or g.is_complex:
        prod = (f.values * np.conj(g.values)).real
    else:
        prod = f.values * g.values
    return grid.cell_area * _pairwise_sum(prod)


def norm_l2(f: GridFunction) -> float:
    return math.sqrt(max(inner_product(f, f), 0.0))


def norm_linf(f: GridFunction) -> float:
    return float(np.max(np.abs(f.values)))


def mean(f: GridFunction) -> float:
    """Mean value ``<f, 1> / |Omega|``."""
    return f.grid.cell_area * _pairwise_sum(f.values.real) / f.grid.area


def vector_norm_l2(fx: GridFunction, fy: GridFunction) -> float:
    """L2 norm of a vector grid function ``(fx, fy)``."""
    return math.sqrt(max(inner_product(fx, fx) + inner_product(fy, fy), 0.0))


def vector_norm_linf(fx: GridFunction, fy: GridFunction) -> float:
    """Pointwise Euclidean sup norm of ``(fx, fy)``."""
    _require_same_grid(fx, fy)
    return float(np.max(np.sqrt(np.abs(fx.values) ** 2 + np.abs(fy.values) ** 2)))
