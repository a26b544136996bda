"""Refinement studies: observed convergence order in time and space.

No closed-form solutions are available, so errors are measured against a
reference run: a much smaller time step on the same grid for the temporal
axis, or a finer mesh (sampled at the coarse nodes) with the same time
step for the spatial axis.  Two error measures are reported per level:

* ``err_hm1``: discrete H^{-1} norm of the error at the final time;
* ``err_l2l2``: ``sqrt(gamma0 * dt * sum_k ||e^k||_2^2)`` over all steps.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import BlowUpError, ConservationError, ParameterError, StudyError
from .grid import GridFunction, PeriodicGrid, mean, norm_l2, norm_linf
from .initial import InitialCondition
from .kernel import Kernel, ModelParams
from .spectral import norm_hm1
from .stepper import SSI1Stepper, StabilizerPolicy, resolve_stabilizer

MEAN_MATCH_TOL = 1e-10
MIN_REFERENCE_RATIO = 32
MIN_REFERENCE_FACTOR = 4
DECAY_FACTOR = 8.0
FLOOR_MULTIPLIER = 10.0


def error_hm1(u: GridFunction, ref: GridFunction) -> float:
    """``||u - ref||_{-1,N}`` for two fields that share their mean.

    Raises:
        ConservationError: if the means differ by more than ``1e-10``.
    """
    mu, mr = mean(u), mean(ref)
    if abs(mu - mr) > MEAN_MATCH_TOL * max(1.0, abs(mr)):
        raise ConservationError(f"means differ: {mu!r} vs {mr!r}")
    e = u - ref
    # remove the round-off mean so the H^{-1} norm is defined
    return norm_hm1(e - mean(e))


def observed_order(err_coarse: float, err_fine: float, factor: float = 2.0) -> float | None:
    """``log_factor(err_coarse/err_fine)``; None when either error is zero."""
    if not (err_coarse > 0.0 and err_fine > 0.0):
        return None
    return math.log(err_coarse / err_fine) / math.log(factor)


@dataclass(frozen=True)
class ReferenceSpec:
    kind: str
    ratio: int
    dt: float
    nx: int
    ny: int

    def __post_init__(self):
        if self.kind not in ("fine_dt", "fine_grid"):
            raise ParameterError(f"unknown reference kind {self.kind!r}")


@dataclass
class RefinementLevel:
    dt: float
    nx: int
    ny: int
    err_hm1: float = math.nan
    err_l2l2: float = math.nan
    mean_defect: float = 0.0
    snapshots: list[tuple[int, np.ndarray, np.ndarray]] = field(default_factory=list, repr=False)


@dataclass
class RefinementStudy:
    axis: str
    levels: list[RefinementLevel]
    reference: ReferenceSpec
    gamma0: float
    a_used: float
    t_end: float
    floor: float | None = None

    @property
    def errors_hm1(self) -> list[float]:
        return [lv.err_hm1 for lv in self.levels]

    @property
    def errors_l2l2(self) -> list[float]:
        return [lv.err_l2l2 for lv in self.levels]

    @property
    def orders_hm1(self) -> list[float | None]:
        e = self.errors_hm1
        return [observed_order(a, b) for a, b in zip(e, e[1:])]

    @property
    def orders_l2l2(self) -> list[float | None]:
        e = self.errors_l2l2
        return [observed_order(a, b) for a, b in zip(e, e[1:])]

    @property
    def observed_orders(self) -> list[float | None]:
        return self.orders_hm1

    def spectral_decay_ok(self, factor: float = DECAY_FACTOR) -> list[bool]:
        """Per adjacent pair: error fell by ``factor`` or the coarser level is at the floor."""
        floor = self.floor or 0.0
        out = []
        for a, b in zip(self.errors_hm1, self.errors_hm1[1:]):
            out.append(a < FLOOR_MULTIPLIER * floor or b * factor <= a)
        return out

    def to_dict(self, config_hash: str = "") -> dict:
        return {
            "axis": self.axis,
            "levels": [
                {
                    "dt": lv.dt,
                    "nx": lv.nx,
                    "ny": lv.ny,
                    "err_hm1": lv.err_hm1,
                    "err_l2l2": lv.err_l2l2,
                }
                for lv in self.levels
            ],
            "orders": [
                {"hm1": a, "l2l2": b} for a, b in zip(self.orders_hm1, self.orders_l2l2)
            ],
            "reference": asdict(self.reference),
            "gamma0": self.gamma0,
            "a_used": self.a_used,
            "t_end": self.t_end,
            "floor": self.floor,
            "config_hash": config_hash,
        }

    def to_json(self, config_hash: str = "") -> str:
        return json.dumps(self.to_dict(config_hash), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "dt", "nx", "ny", "err_hm1", "err_l2l2", "order_hm1", "order_l2l2"])
        oh = [None] + self.orders_hm1
        ol = [None] + self.orders_l2l2
        for i, lv in enumerate(self.levels):
            w.writerow(
                [
                    i,
                    repr(lv.dt),
                    lv.nx,
                    lv.ny,
                    repr(lv.err_hm1),
                    repr(lv.err_l2l2),
                    "" if oh[i] is None else repr(oh[i]),
                    "" if ol[i] is None else repr(ol[i]),
                ]
            )
        return buf.getvalue()


def config_hash(payload) -> str:
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _steps_for(t_end: float, dt: float) -> int:
    n = round(t_end / dt)
    if n < 1 or abs(n * dt - t_end) > 1e-9 * t_end:
        raise ParameterError(f"T={t_end!r} is not an integer multiple of dt={dt!r}")
    return n


def _build_initial(u0_spec, grid: PeriodicGrid) -> GridFunction:
    if isinstance(u0_spec, GridFunction):
        if u0_spec.grid != grid:
            raise ParameterError("initial field is on a different grid")
        return u0_spec
    return u0_spec.build(grid)


def _check_halving(dts: Sequence[float]) -> None:
    if len(dts) < 2:
        raise ParameterError("a temporal study needs at least two time steps")
    for a, b in zip(dts, dts[1:]):
        if not (b > 0 and abs(a / b - 2.0) <= 1e-12):
            raise ParameterError(f"time steps must halve between levels, got {a!r} -> {b!r}")


def temporal_study(
    u0_spec: InitialCondition | GridFunction,
    J: Kernel,
    params: ModelParams,
    dts: Sequence[float],
    T: float,
    grid: PeriodicGrid | None = None,
    stabilizer: StabilizerPolicy | None = None,
    reference_ratio: int = MIN_REFERENCE_RATIO,
    jobs: int = 1,
    keep_snapshots: bool = False,
) -> RefinementStudy:
    """Time-step refinement on a fixed grid against a small-``dt`` reference.

    ``A`` is resolved once from the initial data and frozen for every level
    and for the reference.  The reference time step is
    ``dts[-1] / reference_ratio``.

    Raises:
        ParameterError: if ``dts`` does not halve, ``T`` is not a multiple of
            each ``dt``, or the reference ratio is not a power of two >= 32.
        StudyError: if any level (or the reference) blows up.
    """
    grid = grid or J.grid
    if grid != J.grid:
        raise ParameterError("kernel and study grid differ")
    dts = [float(d) for d in dts]
    _check_halving(dts)
    if reference_ratio < MIN_REFERENCE_RATIO or reference_ratio & (reference_ratio - 1):
        raise ParameterError(f"reference ratio must be a power of two >= {MIN_REFERENCE_RATIO}")
    steps = [_steps_for(T, dt) for dt in dts]
    stabilizer = stabilizer or StabilizerPolicy.corollary()
    u0 = _build_initial(u0_spec, grid)
    a = resolve_stabilizer(stabilizer, norm_linf(u0), params)

    # reference, stored at every multiple of the finest level's dt
    dt_ref = dts[-1] / reference_ratio
    ref_states = [u0.values]
    solver = SSI1Stepper(J, params, dt_ref)
    u = u0
    try:
        for n in range(steps[-1] * reference_ratio):
            u = solver.advance(u, a, n + 1)
            if (n + 1) % reference_ratio == 0:
                ref_states.append(u.values)
    except BlowUpError as exc:
        raise StudyError(f"reference run (dt={dt_ref!r}) blew up at step {exc.step}") from exc
    finest_steps = steps[-1]

    def run_level(idx: int) -> RefinementLevel:
        dt, n_steps = dts[idx], steps[idx]
        stride = finest_steps // n_steps
        level = RefinementLevel(dt, grid.nx, grid.ny)
        solver = SSI1Stepper(J, params, dt)
        u = u0
        acc = 0.0
        try:
            for n in range(1, n_steps + 1):
                u = solver.advance(u, a, n)
                ref = ref_states[n * stride]
                acc += norm_l2(GridFunction(grid, u.values - ref)) ** 2
                if keep_snapshots:
                    level.snapshots.append((n, u.values, ref))
        except BlowUpError as exc:
            raise StudyError(f"level {idx} (dt={dt!r}) blew up at step {exc.step}") from exc
        level.err_hm1 = error_hm1(u, GridFunction(grid, ref_states[-1]))
        level.err_l2l2 = math.sqrt(params.gamma0 * dt * acc)
        return level

    levels = _map_levels(run_level, len(dts), jobs)
    ref = ReferenceSpec("fine_dt", reference_ratio, dt_ref, grid.nx, grid.ny)
    return RefinementStudy("time", levels, ref, params.gamma0, a, T)


def _map_levels(func: Callable[[int], RefinementLevel], count: int, jobs: int) -> list[RefinementLevel]:
    if jobs <= 1:
        return [func(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, range(count)))


def _check_doubling(grids: Sequence[PeriodicGrid]) -> None:
    if len(grids) < 2:
        raise ParameterError("a spatial study needs at least two grids")
    for a, b in zip(grids, grids[1:]):
        same_box = (a.half_width_x, a.half_width_y) == (b.half_width_x, b.half_width_y)
        if not (same_box and b.nx == 2 * a.nx and b.ny == 2 * a.ny):
            raise ParameterError(
                f"grids must double on the same domain, got {a.nx}x{a.ny} -> {b.nx}x{b.ny}"
            )


def restrict(fine: np.ndarray, fine_grid: PeriodicGrid, coarse: PeriodicGrid) -> np.ndarray:
    """Sample a fine-grid array at the coarse nodes (which are a subset)."""
    rx, ry = fine_grid.nx // coarse.nx, fine_grid.ny // coarse.ny
    return fine[ry - 1 :: ry, rx - 1 :: rx]


def spatial_study(
    u0_spec: InitialCondition,
    kernel_factory: Callable[[PeriodicGrid], Kernel],
    params: ModelParams,
    grids: Sequence[PeriodicGrid],
    dt: float,
    T: float,
    stabilizer: StabilizerPolicy | None = None,
    reference_factor: int = MIN_REFERENCE_FACTOR,
) -> RefinementStudy:
    """Mesh refinement at fixed ``dt`` against a finer-mesh reference.

    The kernel is rebuilt on every mesh by ``kernel_factory``, and
    ``gamma0`` is recomputed from it; only ``params.epsilon`` is used.
    ``A`` is resolved from the coarsest level and frozen.  All meshes
    advance in lockstep so no history is stored.

    Every mesh shares ``dt``, so the temporal error cancels in the
    comparison and the remaining floor is round-off.  It is estimated as
    ``100 * eps_machine * sqrt(steps) * ||u_ref||_2`` and reported as
    ``floor``.

    Raises:
        ParameterError: grids do not double, the initial data is not
            band-limited below the coarsest Nyquist mode, or ``T`` is not a
            multiple of ``dt``.
    """
    grids = list(grids)
    _check_doubling(grids)
    if reference_factor < MIN_REFERENCE_FACTOR or reference_factor & (reference_factor - 1):
        raise ParameterError(f"reference factor must be a power of two >= {MIN_REFERENCE_FACTOR}")
    band = u0_spec.bandwidth() if isinstance(u0_spec, InitialCondition) else None
    coarse = grids[0]
    if band is None or band[0] >= coarse.nx // 2 or band[1] >= coarse.ny // 2:
        raise ParameterError(
            f"initial data is not representable below the Nyquist mode of the coarsest grid "
            f"{coarse.nx}x{coarse.ny}"
        )
    n_steps = _steps_for(T, dt)
    stabilizer = stabilizer or StabilizerPolicy.corollary()
    ref_grid = grids[-1].refined(reference_factor)
    all_grids = grids + [ref_grid]
    kernels = [kernel_factory(g) for g in all_grids]
    level_params = [params.for_kernel(k) for k in kernels]
    states = [u0_spec.build(g) for g in all_grids]
    a = resolve_stabilizer(stabilizer, norm_linf(states[0]), level_params[0])
    solvers = [SSI1Stepper(k, p, dt) for k, p in zip(kernels, level_params)]
    acc = [0.0] * len(grids)

    for n in range(1, n_steps + 1):
        for i, s in enumerate(solvers):
            try:
                states[i] = s.advance(states[i], a, n)
            except BlowUpError as exc:
                name = "reference" if i == len(grids) else f"level {i}"
                raise StudyError(f"{name} ({all_grids[i].nx}x{all_grids[i].ny}) blew up at step {n}") from exc
        ref = states[-1].values
        for i, g in enumerate(grids):
            e = states[i].values - restrict(ref, ref_grid, g)
            acc[i] += norm_l2(GridFunction(g, e)) ** 2

    levels = []
    for i, g in enumerate(grids):
        lv = RefinementLevel(dt, g.nx, g.ny)
        r = GridFunction(g, restrict(states[-1].values, ref_grid, g))
        # sampling at coarse nodes aliases high reference modes into the mean
        lv.mean_defect = mean(states[i]) - mean(r)
        lv.err_hm1 = error_hm1(states[i], r)
        lv.err_l2l2 = math.sqrt(level_params[i].gamma0 * dt * acc[i])
        levels.append(lv)
    ref_spec = ReferenceSpec("fine_grid", reference_factor, dt, ref_grid.nx, ref_grid.ny)
    floor = _roundoff_floor(states[-1], n_steps)
    return RefinementStudy("space", levels, ref_spec, level_params[-1].gamma0, a, T, floor)


def _roundoff_floor(ref: GridFunction, n_steps: int) -> float:
    return 100.0 * np.finfo(float).eps * math.sqrt(n_steps) * norm_l2(ref)
