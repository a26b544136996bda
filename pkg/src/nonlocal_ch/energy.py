"""Discrete free energy and the pointwise nonlinearities of the model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridFunction, _pairwise_sum, inner_product
from .kernel import Kernel, ModelParams, nonlocal_op


@dataclass(frozen=True)
class EnergyBreakdown:
    bulk: float
    nonlocal_: float
    total: float

    @classmethod
    def from_parts(cls, bulk: float, nonlocal_: float) -> EnergyBreakdown:
        return cls(bulk, nonlocal_, bulk + nonlocal_)


def double_well(v: GridFunction) -> GridFunction:
    """Pointwise ``(v^2 - 1)^2 / 4``."""
    return v.map(lambda a: 0.25 * (a * a - 1.0) ** 2)


def cubic_term(v: GridFunction) -> GridFunction:
    """Pointwise ``v^3 - v``."""
    return v.map(lambda a: a * a * a - a)


def energy(v: GridFunction, J: Kernel, params: ModelParams) -> EnergyBreakdown:
    """``E_N(v) = <F(v), 1> + eps^2/2 <L_N v, v>``."""
    a = v.values
    # evaluated on the raw array so an overflowing state yields inf, not an exception
    with np.errstate(over="ignore", invalid="ignore"):
        bulk = v.grid.cell_area * _pairwise_sum(0.25 * (a * a - 1.0) ** 2)
        quad = inner_product(nonlocal_op(J, v), v)
    return EnergyBreakdown.from_parts(bulk, 0.5 * params.epsilon**2 * quad)
