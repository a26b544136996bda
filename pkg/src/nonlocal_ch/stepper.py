"""First-order stabilized linear semi-implicit time stepping.

One step solves

    (u1 - u0)/dt = Delta_N [ u0^3 - u0 + A (u1 - u0) + eps^2 L_N u1 ]

for ``u1``.  Every linear operator involved is a Fourier multiplier, so the
solve is a pointwise division in Fourier space.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .energy import EnergyBreakdown, energy
from .errors import BlowUpError, ConservationError, KernelError, ParameterError
from .fieldio import write_field
from .grid import GridFunction, mean, norm_linf
from .kernel import Kernel, ModelParams
from .spectral import symbols

logger = logging.getLogger(__name__)

DENOMINATOR_TOL = 1e-9
MASS_TOL = 1e-12

STABILIZER_MODES = ("fixed", "theorem", "corollary")


@dataclass(frozen=True)
class StabilizerPolicy:
    """How the stabilizing constant ``A`` is chosen.

    ``fixed`` uses ``value`` as ``A``.  ``theorem`` and ``corollary`` use
    ``value`` as the margin added to the running sup norm to form ``M0``.
    """

    mode: str
    value: float = 1.0

    def __post_init__(self):
        if self.mode not in STABILIZER_MODES:
            raise ParameterError(f"unknown stabilizer mode {self.mode!r}")
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ParameterError(f"stabilizer value must be finite and >= 0, got {self.value!r}")

    @classmethod
    def fixed(cls, a: float) -> StabilizerPolicy:
        return cls("fixed", float(a))

    @classmethod
    def theorem(cls, margin: float = 1.0) -> StabilizerPolicy:
        return cls("theorem", float(margin))

    @classmethod
    def corollary(cls, margin: float = 1.0) -> StabilizerPolicy:
        return cls("corollary", float(margin))

    @property
    def adaptive(self) -> bool:
        return self.mode != "fixed"


def resolve_stabilizer(policy: StabilizerPolicy, linf_history_max: float, params: ModelParams) -> float:
    """Resolve ``A`` from the policy and the largest sup norm seen so far.

    ``theorem``: ``18 M0^4 / gamma0``; ``corollary``: the max of that and
    ``1.5 M0^2 - 0.5``, with ``M0 = margin + linf_history_max``.
    """
    if policy.mode == "fixed":
        return policy.value
    m0 = policy.value + linf_history_max
    a = 18.0 * m0**4 / params.gamma0
    if policy.mode == "corollary":
        a = max(a, 1.5 * m0**2 - 0.5)
    return a


def condition_a0(a: float, linf_now: float, linf_next: float) -> bool:
    """Post-hoc energy-stability certificate ``A >= |u1|^2/2 + |u0|^2 - 1/2``."""
    return a >= 0.5 * linf_next**2 + linf_now**2 - 0.5


@dataclass(frozen=True)
class SolverConfig:
    params: ModelParams
    dt: float
    t_end: float
    stabilizer: StabilizerPolicy = field(default_factory=StabilizerPolicy.corollary)
    snapshot_every: int = 100
    diagnostics_every: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"dt must be positive, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end >= self.dt):
            raise ParameterError(f"t_end must be >= dt, got t_end={self.t_end!r}, dt={self.dt!r}")
        for name in ("snapshot_every", "diagnostics_every"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ParameterError(f"{name} must be an integer >= 1, got {v!r}")

    @property
    def n_steps(self) -> int:
        """``ceil(t_end/dt)``, ignoring representation error in the ratio."""
        return math.ceil(round(self.t_end / self.dt, 9))


@dataclass(frozen=True)
class StepDiagnostics:
    step: int
    time: float
    energy: EnergyBreakdown
    mass: float
    linf: float
    energy_delta: float
    a_used: float
    cond_a0_satisfied: bool


class SSI1Stepper:
    """Reusable spectral solver for a fixed kernel, model and time step."""

    def __init__(self, J: Kernel, params: ModelParams, dt: float):
        self.kernel = J
        self.params = params
        self.dt = dt
        self._lam = symbols(J.grid).laplace_symbol
        self._lhat = J.nonlocal_symbol
        self._a = None
        self._denom = None

    def _denominator(self, a: float) -> np.ndarray:
        if a != self._a:
            if a < 0:
                raise ParameterError(f"stabilizer A must be >= 0, got {a!r}")
            denom = 1.0 - self.dt * self._lam * (a + self.params.epsilon**2 * self._lhat)
            worst = float(denom.min())
            if worst < 1.0 - DENOMINATOR_TOL:
                raise KernelError(
                    f"implicit symbol below 1 (min {worst:.3e}); kernel transform is not admissible"
                )
            self._a, self._denom = a, denom
        return self._denom

    def implicit_solve(self, rhs: GridFunction, a: float) -> GridFunction:
        """Solve ``[I - dt*Delta_N*(A + eps^2*L_N)] x = rhs``."""
        out = np.fft.ifft2(np.fft.fft2(rhs.values) / self._denominator(a))
        return GridFunction(rhs.grid, out.real)

    def advance(self, u: GridFunction, a: float, step_index: int = 1) -> GridFunction:
        if u.grid != self.kernel.grid:
            raise ParameterError("field and kernel grids differ")
        denom = self._denominator(a)
        v = u.values
        # overflow is reported below as a blow-up, not as a warning
        with np.errstate(over="ignore", invalid="ignore"):
            u_hat = np.fft.fft2(v)
            n_hat = np.fft.fft2(v * v * v - v)
            new_hat = (u_hat + self.dt * self._lam * (n_hat - a * u_hat)) / denom
            new_hat[0, 0] = u_hat[0, 0]
            out = np.fft.ifft2(new_hat).real
        if not np.isfinite(out).all():
            raise BlowUpError(step_index)
        return GridFunction(u.grid, out)


def step(u_n: GridFunction, J: Kernel, cfg: SolverConfig, a: float | None = None) -> GridFunction:
    """Advance one step.

    Without an explicit ``a`` the policy is resolved from ``||u_n||_inf``
    alone.
    """
    if a is None:
        a = resolve_stabilizer(cfg.stabilizer, norm_linf(u_n), cfg.params)
    return SSI1Stepper(J, cfg.params, cfg.dt).advance(u_n, a)


class DiagnosticsSink(Protocol):
    def emit(self, diag: StepDiagnostics) -> None: ...


class ListSink:
    """Collects diagnostics (and optionally snapshots) in memory."""

    def __init__(self, keep_snapshots: bool = False):
        self.records: list[StepDiagnostics] = []
        self.snapshots: list[tuple[int, float, GridFunction]] = []
        self._keep = keep_snapshots

    def emit(self, diag: StepDiagnostics) -> None:
        self.records.append(diag)

    def snapshot(self, step_index: int, time: float, u: GridFunction) -> None:
        if self._keep:
            self.snapshots.append((step_index, time, u))


CSV_HEADER = (
    "step",
    "time",
    "energy_total",
    "energy_bulk",
    "energy_nonlocal",
    "mass",
    "linf",
    "energy_delta",
    "a_used",
    "cond_a0",
)


def diagnostics_row(d: StepDiagnostics) -> list[str]:
    return [
        str(d.step),
        repr(d.time),
        repr(d.energy.total),
        repr(d.energy.bulk),
        repr(d.energy.nonlocal_),
        repr(d.mass),
        repr(d.linf),
        repr(d.energy_delta),
        repr(d.a_used),
        "1" if d.cond_a0_satisfied else "0",
    ]


class CsvDiagnosticsWriter:
    """Writes diagnostics incrementally to a CSV stream."""

    def __init__(self, stream: io.TextIOBase):
        self._stream = stream
        self._writer = csv.writer(stream, lineterminator="\n")
        self._writer.writerow(CSV_HEADER)

    def emit(self, diag: StepDiagnostics) -> None:
        self._writer.writerow(diagnostics_row(diag))

    def close(self) -> None:
        self._stream.flush()


class RunRecorder:
    """Output directory sink: ``diagnostics.csv``, ``field_<step>.dat``, ``index.json``."""

    def __init__(self, out_dir: str | os.PathLike):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._csv_file = open(self.out_dir / "diagnostics.csv", "w", newline="", encoding="ascii")
        self._csv = CsvDiagnosticsWriter(self._csv_file)
        self._index: list[dict] = []

    def emit(self, diag: StepDiagnostics) -> None:
        self._csv.emit(diag)

    def snapshot(self, step_index: int, time: float, u: GridFunction) -> None:
        name = f"field_{step_index:08d}.dat"
        write_field(self.out_dir / name, u, time)
        self._index.append({"step": step_index, "time": time, "file": name})

    def close(self) -> None:
        self._csv.close()
        self._csv_file.close()
        with open(self.out_dir / "index.json", "w", encoding="ascii") as fh:
            json.dump({"snapshots": self._index}, fh, indent=2)


def run(
    u0: GridFunction,
    J: Kernel,
    cfg: SolverConfig,
    sink: DiagnosticsSink | None = None,
    callback: Callable[[int, float, GridFunction], None] | None = None,
    a_override: float | None = None,
) -> GridFunction:
    """Integrate from ``u0`` for ``ceil(t_end/dt)`` steps.

    Args:
        u0: initial field.
        J: kernel on the same grid.
        cfg: solver configuration.
        sink: receives a :class:`StepDiagnostics` at step 0, every
            ``diagnostics_every`` steps, and at the final step.  If it has a
            ``snapshot`` method, that is called at step 0, every
            ``snapshot_every`` steps, and at the final step.
        callback: called as ``callback(n, t_n, u_n)`` after every step.
        a_override: use this ``A`` for every step regardless of the policy.

    Returns:
        The final iterate.

    Raises:
        BlowUpError: a non-finite iterate was produced.
    """
    if u0.grid != J.grid:
        raise ParameterError("initial field and kernel grids differ")
    if u0.is_complex or not np.isfinite(u0.values).all():
        raise ParameterError("initial field must be real and finite")
    n_steps = cfg.n_steps
    solver = SSI1Stepper(J, cfg.params, cfg.dt)
    snap = getattr(sink, "snapshot", None)
    mass0 = mean(u0)
    mass_tol = MASS_TOL * (1.0 + abs(mass0))

    u = u0
    linf = norm_linf(u0)
    linf_max = linf
    a = a_override if a_override is not None else resolve_stabilizer(cfg.stabilizer, linf_max, cfg.params)
    e_cur: EnergyBreakdown | None = None
    if sink is not None:
        e_cur = energy(u0, J, cfg.params)
        sink.emit(StepDiagnostics(0, 0.0, e_cur, mass0, linf, 0.0, a, True))
    if snap is not None:
        snap(0, 0.0, u0)

    for n in range(n_steps):
        if a_override is None and cfg.stabilizer.adaptive:
            a_new = resolve_stabilizer(cfg.stabilizer, linf_max, cfg.params)
            if a_new != a:
                logger.info("step %d: stabilizer re-resolved from %.6g to %.6g", n, a, a_new)
                a = a_new
        emit_now = sink is not None and ((n + 1) % cfg.diagnostics_every == 0 or n + 1 == n_steps)
        if emit_now and e_cur is None:
            e_cur = energy(u, J, cfg.params)
        u_next = solver.advance(u, a, n + 1)
        linf_next = norm_linf(u_next)
        t_next = (n + 1) * cfg.dt
        if emit_now:
            e_next = energy(u_next, J, cfg.params)
            if not math.isfinite(e_next.total):
                raise BlowUpError(n + 1, f"energy overflowed at step {n + 1}")
            m = mean(u_next)
            if abs(m - mass0) > mass_tol:
                raise ConservationError(f"step {n + 1}: mean drifted from {mass0!r} to {m!r}")
            sink.emit(
                StepDiagnostics(
                    n + 1,
                    t_next,
                    e_next,
                    m,
                    linf_next,
                    e_next.total - e_cur.total,
                    a,
                    condition_a0(a, linf, linf_next),
                )
            )
            e_cur = e_next if cfg.diagnostics_every == 1 else None
        else:
            e_cur = None
        if snap is not None and ((n + 1) % cfg.snapshot_every == 0 or n + 1 == n_steps):
            snap(n + 1, t_next, u_next)
        if callback is not None:
            callback(n + 1, t_next, u_next)
        u, linf = u_next, linf_next
        linf_max = max(linf_max, linf)
    return u
