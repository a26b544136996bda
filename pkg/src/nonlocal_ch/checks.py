"""Built-in verification suite run by ``nch check``.

Every property is exercised on a small grid (at most 16x16) with a seeded
generator, so the whole suite is deterministic and finishes in seconds.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import spectral
from .energy import energy
from .errors import ParameterError
from .grid import GridFunction, PeriodicGrid, inner_product, mean, norm_l2, norm_linf
from .harness import error_hm1, temporal_study
from .initial import InitialCondition
from .kernel import (
    ModelParams,
    convolve,
    convolve_direct,
    lemma22_check,
    make_gaussian_kernel,
    nonlocal_op,
)
from .oracles import dense_step
from .stepper import (
    CsvDiagnosticsWriter,
    SolverConfig,
    SSI1Stepper,
    StabilizerPolicy,
    condition_a0,
    resolve_stabilizer,
    run,
)

MAX_CHECK_N = 16
DEFAULT_SIGMA = math.pi / 4
TRIALS = 10


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


class _Ctx:
    def __init__(self, grid: PeriodicGrid, seed: int):
        self.grid = grid
        self.rng = np.random.default_rng(seed)
        self.kernel = make_gaussian_kernel(grid, DEFAULT_SIGMA)
        self.params = ModelParams.from_kernel(1.0, self.kernel)

    def field(self, scale: float = 1.0) -> GridFunction:
        return GridFunction(self.grid, scale * self.rng.standard_normal(self.grid.shape))

    def zero_mean(self) -> GridFunction:
        f = self.field()
        return f - mean(f)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def _worst(values) -> float:
    return max(values) if values else 0.0


# grid ---------------------------------------------------------------------


def _bilinearity(c: _Ctx):
    worst = 0.0
    for _ in range(TRIALS):
        f, g, h = c.field(), c.field(), c.field()
        a = float(c.rng.normal())
        lhs = inner_product(a * f + g, h)
        rhs = a * inner_product(f, h) + inner_product(g, h)
        scale = (abs(a) * norm_l2(f) + norm_l2(g)) * norm_l2(h)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst <= 1e-12, f"max rel defect {worst:.2e}"


def _cauchy_schwarz(c: _Ctx):
    slack = _worst([abs(inner_product(f, g)) - norm_l2(f) * norm_l2(g) for f, g in ((c.field(), c.field()) for _ in range(TRIALS))])
    return slack <= 1e-12, f"max |<f,g>| - |f||g| = {slack:.2e}"


def _norm_matches_inner(c: _Ctx):
    fs = [c.field() for _ in range(TRIALS)]
    ok = all(norm_l2(f) ** 2 == inner_product(f, f) or math.sqrt(inner_product(f, f)) == norm_l2(f) for f in fs)
    return ok, "norm_l2(f)**2 vs inner_product(f, f)"


def _zero_mean_projection(c: _Ctx):
    worst = _worst([abs(mean(c.zero_mean())) for _ in range(TRIALS)])
    return worst <= 1e-13, f"max |mean| {worst:.2e}"


# spectral -----------------------------------------------------------------


def _summation_by_parts(c: _Ctx):
    worst = 0.0
    for _ in range(TRIALS):
        f, g = c.field(), c.field()
        a = inner_product(f, spectral.laplacian(g))
        gf, gg = spectral.gradient(f), spectral.gradient(g)
        b = -(inner_product(gf[0], gg[0]) + inner_product(gf[1], gg[1]))
        d = inner_product(spectral.laplacian(f), g)
        scale = norm_l2(f) * norm_l2(spectral.laplacian(g))
        worst = max(worst, abs(a - b) / scale, abs(a - d) / scale)
    return worst <= 1e-11, f"max rel defect {worst:.2e}"


def _inverse_laplacian_spd(c: _Ctx):
    worst, min_q = 0.0, math.inf
    for _ in range(TRIALS):
        f, g = c.zero_mean(), c.zero_mean()
        a = inner_product(f, spectral.inverse_laplacian(g))
        b = inner_product(spectral.inverse_laplacian(f), g)
        worst = max(worst, abs(a - b) / (norm_l2(f) * norm_l2(g)))
        min_q = min(min_q, inner_product(f, spectral.inverse_laplacian(f)))
    return worst <= 1e-11 and min_q > 0, f"asym {worst:.2e}, min <f,(-Lap)^-1 f> {min_q:.3e}"


def _inverse_laplacian_roundtrip(c: _Ctx):
    worst = 0.0
    for _ in range(TRIALS):
        f = c.zero_mean()
        back = -spectral.laplacian(spectral.inverse_laplacian(f))
        worst = max(worst, norm_l2(back - f) / norm_l2(f))
    return worst <= 1e-11, f"max rel defect {worst:.2e}"


def _spectral_exactness(c: _Ctx):
    g = c.grid
    x, y = g.meshgrid()
    kx_max, ky_max = g.nx // 2 - 1, g.ny // 2 - 1
    worst = 0.0
    for _ in range(TRIALS):
        kx = int(c.rng.integers(-kx_max, kx_max + 1))
        ky = int(c.rng.integers(-ky_max, ky_max + 1))
        ax, ay = kx * math.pi / g.half_width_x, ky * math.pi / g.half_width_y
        ph = float(c.rng.uniform(0, 2 * math.pi))
        arg = ax * x + ay * y + ph
        f = GridFunction(g, np.sin(arg))
        fx, fy = spectral.gradient(f)
        lap = spectral.laplacian(f)
        exact = [np.cos(arg) * ax, np.cos(arg) * ay, -(ax * ax + ay * ay) * np.sin(arg)]
        scale = max(ax * ax + ay * ay, 1.0)
        for got, want in zip((fx, fy, lap), exact):
            worst = max(worst, float(np.max(np.abs(got.values - want))) / scale)
    return worst <= 1e-12, f"max rel defect {worst:.2e}"


def _transform_oracle(c: _Ctx):
    worst = 0.0
    for _ in range(3):
        f = c.field()
        F = spectral.forward(f)
        D = spectral.forward_direct(f)
        worst = max(worst, float(np.max(np.abs(F.coeffs - D.coeffs))) / float(np.max(np.abs(D.coeffs))))
        worst = max(worst, norm_linf(spectral.inverse(F) - f) / norm_linf(f))
    return worst <= 1e-11, f"FFT vs direct sum {worst:.2e}"


# kernel -------------------------------------------------------------------


def _l_self_adjoint(c: _Ctx):
    J = c.kernel
    worst = 0.0
    for _ in range(TRIALS):
        f, g = c.field(), c.field()
        a, b = inner_product(nonlocal_op(J, f), g), inner_product(f, nonlocal_op(J, g))
        worst = max(worst, abs(a - b) / (norm_l2(nonlocal_op(J, f)) * norm_l2(g)))
    return worst <= 1e-11, f"max rel defect {worst:.2e}"


def _l_psd(c: _Ctx):
    J = c.kernel
    worst = min(inner_product(nonlocal_op(J, f), f) / norm_l2(f) ** 2 for f in (c.field() for _ in range(TRIALS)))
    return worst >= -1e-11, f"min <Lf,f>/|f|^2 {worst:.3e}"


def _l_commutes(c: _Ctx):
    J = c.kernel
    lam_max = spectral.symbols(c.grid).max_abs_eigenvalue
    worst = 0.0
    for _ in range(TRIALS):
        f = c.field()
        d = nonlocal_op(J, spectral.laplacian(f)) - spectral.laplacian(nonlocal_op(J, f))
        worst = max(worst, norm_linf(d) / (norm_linf(f) * lam_max))
    return worst <= 1e-9, f"max scaled defect {worst:.2e}"


def _convolution_oracle(c: _Ctx):
    worst = 0.0
    for _ in range(3):
        f = c.field()
        direct = convolve_direct(c.kernel, f)
        worst = max(worst, norm_linf(convolve(c.kernel, f) - direct) / norm_linf(direct))
    return worst <= 1e-11, f"max rel defect {worst:.2e}"


def _kernel_hat_real(c: _Ctx):
    # recompute from the stored values rather than trusting the cache
    raw = np.fft.fft2(np.roll(c.kernel.values, (1, 1), axis=(0, 1)))
    ratio = float(np.max(np.abs(raw.imag)) / np.max(np.abs(raw)))
    return ratio <= 1e-11, f"max |Im J^| / max |J^| = {ratio:.2e}"


def _convolution_laplacian_bound(c: _Ctx):
    ok = True
    for _ in range(TRIALS):
        r = lemma22_check(c.kernel, c.field(), c.field(), float(np.exp(c.rng.uniform(-3, 3))))
        ok &= r.lhs <= r.rhs
    return ok, f"{TRIALS} trials, C = {r.constant:.4g}"


# energy -------------------------------------------------------------------


def _energy_nonnegative(c: _Ctx):
    ok = True
    worst_nl = math.inf
    for _ in range(TRIALS):
        e = energy(c.field(), c.kernel, c.params)
        worst_nl = min(worst_nl, e.nonlocal_)
        ok &= e.bulk >= 0 and e.nonlocal_ >= -1e-11 and e.total >= -1e-11
    return ok, f"min nonlocal part {worst_nl:.3e}"


def _energy_translation(c: _Ctx):
    worst = 0.0
    for _ in range(TRIALS):
        v = c.field()
        m, n = (int(k) for k in c.rng.integers(0, 16, 2))
        worst = max(worst, _rel(energy(v, c.kernel, c.params).total, energy(v.shifted(m, n), c.kernel, c.params).total))
    return worst <= 1e-11, f"max rel defect {worst:.2e}"


def _energy_even(c: _Ctx):
    worst = 0.0
    for _ in range(TRIALS):
        v = c.field()
        worst = max(worst, _rel(energy(v, c.kernel, c.params).total, energy(-v, c.kernel, c.params).total))
    return worst <= 1e-12, f"max rel defect {worst:.2e}"


# stepper ------------------------------------------------------------------


def _mass_conservation(c: _Ctx):
    worst = 0.0
    for a in (0.0, 1.0, 18.0):
        solver = SSI1Stepper(c.kernel, c.params, 1e-2)
        for _ in range(3):
            u = c.field(0.5)
            worst = max(worst, abs(mean(solver.advance(u, a)) - mean(u)))
    return worst <= 1e-13, f"max |mean drift| {worst:.2e}"


def _energy_dissipation(c: _Ctx):
    policy = StabilizerPolicy.corollary()
    solver = SSI1Stepper(c.kernel, c.params, 1e-2)
    checked = bad = 0
    for _ in range(3):
        u = c.field(0.3)
        e, linf_max = energy(u, c.kernel, c.params).total, norm_linf(u)
        for n in range(20):
            a = resolve_stabilizer(policy, linf_max, c.params)
            u_next = solver.advance(u, a, n + 1)
            e_next = energy(u_next, c.kernel, c.params).total
            if condition_a0(a, norm_linf(u), norm_linf(u_next)):
                checked += 1
                bad += e_next > e + 1e-12 * (1 + abs(e))
            u, e = u_next, e_next
            linf_max = max(linf_max, norm_linf(u))
    return checked > 0 and bad == 0, f"{checked} certified steps, {bad} increases"


def _fixed_points(c: _Ctx):
    worst = 0.0
    for value in (-1.0, 0.0, 1.0):
        for dt, a in ((1e-3, 0.0), (1e-2, 1.0), (1e-1, 18.0)):
            solver = SSI1Stepper(c.kernel, c.params, dt)
            u = c.grid.constant(value)
            for n in range(100):
                u = solver.advance(u, a, n + 1)
            worst = max(worst, float(np.max(np.abs(u.values - value))))
    return worst <= 1e-13, f"max deviation {worst:.2e}"


def _implicit_linearity(c: _Ctx):
    solver = SSI1Stepper(c.kernel, c.params, 1e-2)
    worst = 0.0
    for _ in range(TRIALS):
        r1, r2 = c.field(), c.field()
        s = float(c.rng.normal())
        lhs = solver.implicit_solve(s * r1 + r2, 5.0)
        rhs = s * solver.implicit_solve(r1, 5.0) + solver.implicit_solve(r2, 5.0)
        worst = max(worst, norm_linf(lhs - rhs) / norm_linf(rhs))
    return worst <= 1e-11, f"max rel defect {worst:.2e}"


def _dense_step_oracle(c: _Ctx):
    g = c.grid
    if g.nx > 8 or g.ny > 8:
        g = PeriodicGrid(g.half_width_x, g.half_width_y, min(g.nx, 8), min(g.ny, 8))
    J = make_gaussian_kernel(g, DEFAULT_SIGMA)
    params = ModelParams.from_kernel(1.0, J)
    worst = 0.0
    for a in (0.0, 1.0, 18.0):
        solver = SSI1Stepper(J, params, 1e-2)
        u = GridFunction(g, c.rng.uniform(-1, 1, g.shape))
        want = dense_step(u, J, params.epsilon, 1e-2, a)
        worst = max(worst, norm_linf(solver.advance(u, a) - want) / norm_linf(want))
    return worst <= 1e-10, f"{g.nx}x{g.ny}, max rel defect {worst:.2e}"


# harness ------------------------------------------------------------------


def _small_study(c: _Ctx):
    u0 = InitialCondition.cosine_product(0.05, 1, 1)
    return temporal_study(u0, c.kernel, c.params, [0.02, 0.01, 0.005], 0.04, keep_snapshots=True)


def _error_monotonicity(c: _Ctx, study):
    errs = study.errors_hm1
    ok = all(b < 1.05 * a for a, b in zip(errs, errs[1:])) and errs[-1] < errs[0]
    return ok, "errors " + ", ".join(f"{e:.3e}" for e in errs)


def _self_consistency(c: _Ctx):
    u = c.field()
    err = error_hm1(u, u)
    return err == 0.0, f"error {err!r}"


def _l2l2_bruteforce(c: _Ctx, study):
    worst = 0.0
    for level in study.levels:
        acc = sum(float(np.sum((u - r) ** 2)) * c.grid.cell_area for _, u, r in level.snapshots)
        brute = math.sqrt(study.gamma0 * level.dt * acc)
        worst = max(worst, _rel(brute, level.err_l2l2))
    return worst <= 1e-12, f"max rel defect {worst:.2e}"


# cli ----------------------------------------------------------------------


def _determinism(c: _Ctx):
    import io

    cfg = SolverConfig(c.params, 1e-2, 0.1, StabilizerPolicy.corollary())
    u0 = InitialCondition.random_uniform(0.1, seed=7).build(c.grid)
    outs = []
    for _ in range(2):
        buf = io.StringIO()
        run(u0, c.kernel, cfg, sink=CsvDiagnosticsWriter(buf))
        outs.append(buf.getvalue())
    return outs[0] == outs[1], f"{len(outs[0].splitlines())} CSV lines compared"


CHECKS: list[tuple[str, str, Callable]] = [
    ("grid", "inner product bilinearity", _bilinearity),
    ("grid", "Cauchy-Schwarz", _cauchy_schwarz),
    ("grid", "norm_l2 squared equals inner product", _norm_matches_inner),
    ("grid", "zero-mean projection", _zero_mean_projection),
    ("spectral", "FFT transform equals direct sum", _transform_oracle),
    ("spectral", "summation by parts", _summation_by_parts),
    ("spectral", "inverse Laplacian self-adjoint, positive definite", _inverse_laplacian_spd),
    ("spectral", "inverse Laplacian round trip", _inverse_laplacian_roundtrip),
    ("spectral", "spectral exactness on trigonometric polynomials", _spectral_exactness),
    ("kernel", "L_N self-adjoint", _l_self_adjoint),
    ("kernel", "L_N positive semi-definite", _l_psd),
    ("kernel", "L_N commutes with Laplacian", _l_commutes),
    ("kernel", "FFT convolution equals direct sum", _convolution_oracle),
    ("kernel", "kernel transform is real", _kernel_hat_real),
    ("kernel", "convolution-Laplacian inequality", _convolution_laplacian_bound),
    ("energy", "energy nonnegative", _energy_nonnegative),
    ("energy", "energy translation invariant", _energy_translation),
    ("energy", "energy even", _energy_even),
    ("stepper", "mass conservation", _mass_conservation),
    ("stepper", "energy dissipation when certified", _energy_dissipation),
    ("stepper", "constant fixed points", _fixed_points),
    ("stepper", "implicit solve linear", _implicit_linearity),
    ("stepper", "spectral step equals dense solve", _dense_step_oracle),
    ("harness", "temporal error monotone", _error_monotonicity),
    ("harness", "reference self-consistency", _self_consistency),
    ("harness", "l2l2 accumulator equals brute force", _l2l2_bruteforce),
    ("cli", "run determinism", _determinism),
]


def run_checks(nx: int = 8, ny: int = 8, seed: int = 0) -> list[CheckResult]:
    """Run every check on an ``nx`` x ``ny`` grid over ``(-pi, pi)^2``.

    Raises:
        ParameterError: if the grid exceeds 16x16.
    """
    if nx > MAX_CHECK_N or ny > MAX_CHECK_N:
        raise ParameterError(f"check grid is limited to {MAX_CHECK_N}x{MAX_CHECK_N}, got {nx}x{ny}")
    ctx = _Ctx(PeriodicGrid(math.pi, math.pi, nx, ny), seed)
    study = None
    results = []
    for module, name, func in CHECKS:
        label = f"{module}: {name}"
        t0 = time.perf_counter()
        try:
            if func in (_error_monotonicity, _l2l2_bruteforce):
                study = study or _small_study(ctx)
                ok, detail = func(ctx, study)
            else:
                ok, detail = func(ctx)
        except Exception as exc:  # a crash is a failed property, not a crash of the suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        detail = f"{detail} ({time.perf_counter() - t0:.2f}s)"
        results.append(CheckResult(label, bool(ok), detail))
    return results
