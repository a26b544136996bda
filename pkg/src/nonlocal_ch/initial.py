"""Initial-condition generators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .fieldio import read_field
from .grid import GridFunction, PeriodicGrid, mean

KINDS = ("cosine_product", "random_uniform", "single_mode", "from_file")


@dataclass(frozen=True)
class InitialCondition:
    """Recipe for an initial field; :meth:`build` samples it on a grid.

    ``cosine_product``: ``a*cos(kx*pi*x/X)*cos(ky*pi*y/Y)``.
    ``single_mode``: ``a*cos(kx*pi*x/X + ky*pi*y/Y)``.
    ``random_uniform``: i.i.d. uniform on ``[-a, a]`` from ``seed``; if
    ``mean`` is given the field is shifted to have exactly that mean.
    ``from_file``: a snapshot in the ``nch-field v1`` format.
    """

    kind: str
    amplitude: float = 0.0
    kx: int = 0
    ky: int = 0
    seed: int = 0
    mean: float | None = None
    path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown initial condition kind {self.kind!r}")
        if not math.isfinite(self.amplitude):
            raise ParameterError("amplitude must be finite")
        if self.kind == "from_file" and not self.path:
            raise ParameterError("from_file initial condition needs a path")
        if self.mean is not None and not math.isfinite(self.mean):
            raise ParameterError("mean must be finite")

    @classmethod
    def cosine_product(cls, amplitude: float, kx: int = 1, ky: int = 1) -> InitialCondition:
        return cls("cosine_product", float(amplitude), int(kx), int(ky))

    @classmethod
    def single_mode(cls, amplitude: float, kx: int = 1, ky: int = 0) -> InitialCondition:
        return cls("single_mode", float(amplitude), int(kx), int(ky))

    @classmethod
    def random_uniform(cls, amplitude: float, seed: int = 0, mean: float | None = None) -> InitialCondition:
        return cls("random_uniform", float(amplitude), seed=int(seed), mean=mean)

    @classmethod
    def from_file(cls, path: str) -> InitialCondition:
        return cls("from_file", path=str(path))

    def bandwidth(self) -> tuple[int, int] | None:
        """Largest ``(|kx|, |ky|)`` present, or None if not band-limited."""
        if self.kind in ("cosine_product", "single_mode"):
            return abs(self.kx), abs(self.ky)
        return None

    def check_modes(self, grid: PeriodicGrid) -> None:
        if self.kind not in ("cosine_product", "single_mode"):
            return
        for k, n, name in ((self.kx, grid.nx, "kx"), (self.ky, grid.ny, "ky")):
            if not (-n // 2 < k <= n // 2):
                raise ParameterError(f"{name}={k} outside the resolvable modes of a {n}-point axis")

    def build(self, grid: PeriodicGrid) -> GridFunction:
        self.check_modes(grid)
        if self.kind == "from_file":
            f, _ = read_field(self.path)
            if f.grid != grid:
                raise ParameterError(f"initial field {self.path} is on {f.grid}, expected {grid}")
            return f
        if self.kind == "random_uniform":
            rng = np.random.default_rng(self.seed)
            f = GridFunction(grid, rng.uniform(-self.amplitude, self.amplitude, grid.shape))
            if self.mean is not None:
                f = f + (self.mean - mean(f))
            return f
        ax = self.kx * math.pi / grid.half_width_x
        ay = self.ky * math.pi / grid.half_width_y
        if self.kind == "cosine_product":
            return grid.sample(lambda x, y: self.amplitude * np.cos(ax * x) * np.cos(ay * y))
        return grid.sample(lambda x, y: self.amplitude * np.cos(ax * x + ay * y))
