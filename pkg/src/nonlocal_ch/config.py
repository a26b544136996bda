"""JSON run configuration.

Example document (every key shown; ``X``/``Y`` default to pi, ``solver``
cadences and ``stabilizer`` have defaults, ``study`` is optional)::

    {
      "grid":    {"nx": 64, "ny": 64, "X": 3.141592653589793, "Y": 3.141592653589793},
      "kernel":  {"type": "gaussian", "sigma": 0.2},
      "model":   {"epsilon": 0.5},
      "solver":  {"dt": 0.001, "t_end": 0.5,
                  "stabilizer": {"mode": "corollary", "margin": 1.0},
                  "snapshot_every": 100, "diagnostics_every": 1},
      "initial": {"kind": "cosine_product", "amplitude": 0.05, "kx": 1, "ky": 1},
      "study":   {"dts": [0.004, 0.002, 0.001, 0.0005], "T": 0.1, "reference_ratio": 32,
                  "grids": [16, 32, 64], "dt": 1e-05, "reference_factor": 4}
    }

A tabulated kernel is given as ``{"type": "file", "path": "...",
"renormalize": true}``; relative paths resolve against the config file.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .errors import ConfigError, NCHError
from .grid import PeriodicGrid
from .initial import InitialCondition
from .kernel import Kernel, ModelParams, load_kernel, make_gaussian_kernel
from .stepper import SolverConfig, StabilizerPolicy

_SCHEMA: dict[str, tuple[set[str], set[str]]] = {
    # section: (required keys, optional keys)
    "": ({"grid", "kernel", "model", "solver", "initial"}, {"study"}),
    "grid": ({"nx", "ny"}, {"X", "Y"}),
    "model": ({"epsilon"}, set()),
    "solver": ({"dt", "t_end"}, {"stabilizer", "snapshot_every", "diagnostics_every"}),
    "study": (set(), {"dts", "T", "reference_ratio", "grids", "dt", "reference_factor"}),
}
_KERNEL_KEYS = {"gaussian": ({"type", "sigma"}, set()), "file": ({"type", "path"}, {"renormalize"})}
_STAB_KEYS = {"fixed": ({"mode", "A"}, set()), "theorem": ({"mode"}, {"margin"}), "corollary": ({"mode"}, {"margin"})}
_INITIAL_KEYS = {
    "cosine_product": ({"kind", "amplitude"}, {"kx", "ky"}),
    "single_mode": ({"kind", "amplitude"}, {"kx", "ky"}),
    "random_uniform": ({"kind", "amplitude"}, {"seed", "mean"}),
    "from_file": ({"kind", "path"}, set()),
}


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    sigma: float | None = None
    path: str | None = None
    renormalize: bool = True

    def build(self, grid: PeriodicGrid) -> Kernel:
        if self.kind == "gaussian":
            return make_gaussian_kernel(grid, self.sigma)
        kernel = load_kernel(self.path, renormalize=self.renormalize)
        if kernel.grid != grid:
            raise ConfigError(f"kernel file {self.path} is on {kernel.grid}, expected {grid}")
        return kernel


@dataclass(frozen=True)
class StudySpec:
    dts: tuple[float, ...] | None
    T: float
    reference_ratio: int
    grids: tuple[PeriodicGrid, ...] | None
    dt: float
    reference_factor: int


@dataclass(frozen=True)
class RunConfig:
    grid: PeriodicGrid
    kernel_spec: KernelSpec
    kernel: Kernel
    solver: SolverConfig
    initial: InitialCondition
    study: StudySpec | None
    resolved: dict

    def __iter__(self):
        # unpacks as (grid, kernel_spec, solver, initial)
        return iter((self.grid, self.kernel_spec, self.solver, self.initial))


class _Locator:
    """Maps key paths to source line numbers for error messages."""

    def __init__(self, text: str):
        self.lines = text.splitlines()

    def line_of(self, path: tuple[str, ...]) -> int | None:
        start = 0
        found = None
        for key in path:
            needle = json.dumps(key)
            for i in range(start, len(self.lines)):
                if needle in self.lines[i]:
                    found, start = i, i
                    break
            else:
                return found + 1 if found is not None else None
        return found + 1 if found is not None else None

    def error(self, path: tuple[str, ...], message: str) -> ConfigError:
        line = self.line_of(path)
        where = ".".join(path) or "<root>"
        prefix = f"line {line}: " if line else ""
        return ConfigError(f"{prefix}{where}: {message}")


def _check_keys(loc: _Locator, obj: Any, path: tuple[str, ...], required: set[str], optional: set[str]) -> None:
    if not isinstance(obj, dict):
        raise loc.error(path, "expected an object")
    missing = required - obj.keys()
    if missing:
        raise loc.error(path, f"missing key(s) {sorted(missing)}")
    unknown = obj.keys() - required - optional
    if unknown:
        bad = sorted(unknown)[0]
        raise loc.error(path + (bad,), f"unknown key(s) {sorted(unknown)}")


def _number(loc: _Locator, obj: dict, path: tuple[str, ...], key: str, default=None) -> float:
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise loc.error(path + (key,), f"expected a finite number, got {v!r}")
    return float(v)


def _integer(loc: _Locator, obj: dict, path: tuple[str, ...], key: str, default=None) -> int:
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise loc.error(path + (key,), f"expected an integer, got {v!r}")
    return v


def parse_config(
    text: bytes | str,
    base_dir: str | os.PathLike | None = None,
    seed_override: int | None = None,
    renormalize_kernel: bool | None = None,
) -> RunConfig:
    """Parse and fully validate a configuration document.

    Args:
        text: UTF-8 JSON document.
        base_dir: directory that relative file paths resolve against.
        seed_override: replaces ``initial.seed`` (random initial data).
        renormalize_kernel: if not None, overrides ``kernel.renormalize``.

    Raises:
        ConfigError: malformed JSON, missing or unknown keys, or any
            constraint violation, with the offending line where known.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config is not valid UTF-8: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}: malformed JSON: {exc.msg}") from None
    loc = _Locator(text)
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    _check_keys(loc, doc, (), *_SCHEMA[""])

    # grid
    g = doc["grid"]
    _check_keys(loc, g, ("grid",), *_SCHEMA["grid"])
    try:
        grid = PeriodicGrid(
            _number(loc, g, ("grid",), "X", math.pi),
            _number(loc, g, ("grid",), "Y", math.pi),
            _integer(loc, g, ("grid",), "nx"),
            _integer(loc, g, ("grid",), "ny"),
        )
    except NCHError as exc:
        msg = str(exc)
        key = {"nx": "nx", "ny": "ny", "half_width_x": "X", "half_width_y": "Y"}.get(msg.split(" ", 1)[0])
        raise loc.error(("grid", key) if key in g else ("grid",), msg) from None

    # kernel
    k = doc["kernel"]
    if not isinstance(k, dict) or k.get("type") not in _KERNEL_KEYS:
        raise loc.error(("kernel", "type"), f"kernel type must be one of {sorted(_KERNEL_KEYS)}")
    _check_keys(loc, k, ("kernel",), *_KERNEL_KEYS[k["type"]])
    if k["type"] == "gaussian":
        kspec = KernelSpec("gaussian", sigma=_number(loc, k, ("kernel",), "sigma"))
    else:
        if not isinstance(k["path"], str):
            raise loc.error(("kernel", "path"), "expected a string")
        renorm = k.get("renormalize", True)
        if not isinstance(renorm, bool):
            raise loc.error(("kernel", "renormalize"), "expected true or false")
        if renormalize_kernel is not None:
            renorm = renormalize_kernel
        kspec = KernelSpec("file", path=str(base / k["path"]), renormalize=renorm)
    try:
        kernel = kspec.build(grid)
    except (NCHError, OSError) as exc:
        raise loc.error(("kernel",), str(exc)) from None

    # model
    m = doc["model"]
    _check_keys(loc, m, ("model",), *_SCHEMA["model"])
    try:
        params = ModelParams.from_kernel(_number(loc, m, ("model",), "epsilon"), kernel)
    except NCHError as exc:
        raise loc.error(("model", "epsilon"), str(exc)) from None

    # solver
    s = doc["solver"]
    _check_keys(loc, s, ("solver",), *_SCHEMA["solver"])
    stab = s.get("stabilizer", {"mode": "corollary"})
    if not isinstance(stab, dict) or stab.get("mode") not in _STAB_KEYS:
        raise loc.error(("solver", "stabilizer", "mode"), f"mode must be one of {sorted(_STAB_KEYS)}")
    _check_keys(loc, stab, ("solver", "stabilizer"), *_STAB_KEYS[stab["mode"]])
    try:
        if stab["mode"] == "fixed":
            policy = StabilizerPolicy.fixed(_number(loc, stab, ("solver", "stabilizer"), "A"))
        else:
            policy = StabilizerPolicy(stab["mode"], _number(loc, stab, ("solver", "stabilizer"), "margin", 1.0))
        solver = SolverConfig(
            params,
            _number(loc, s, ("solver",), "dt"),
            _number(loc, s, ("solver",), "t_end"),
            policy,
            _integer(loc, s, ("solver",), "snapshot_every", 100),
            _integer(loc, s, ("solver",), "diagnostics_every", 1),
        )
    except NCHError as exc:
        raise loc.error(("solver",), str(exc)) from None

    # initial condition
    ic = doc["initial"]
    if not isinstance(ic, dict) or ic.get("kind") not in _INITIAL_KEYS:
        raise loc.error(("initial", "kind"), f"kind must be one of {sorted(_INITIAL_KEYS)}")
    _check_keys(loc, ic, ("initial",), *_INITIAL_KEYS[ic["kind"]])
    p = ("initial",)
    try:
        if ic["kind"] == "from_file":
            if not isinstance(ic["path"], str):
                raise loc.error(p + ("path",), "expected a string")
            initial = InitialCondition.from_file(str(base / ic["path"]))
        elif ic["kind"] == "random_uniform":
            seed = _integer(loc, ic, p, "seed", 0) if seed_override is None else seed_override
            initial = InitialCondition.random_uniform(_number(loc, ic, p, "amplitude"), seed, _number(loc, ic, p, "mean"))
        else:
            initial = InitialCondition(
                ic["kind"],
                _number(loc, ic, p, "amplitude"),
                _integer(loc, ic, p, "kx", 1),
                _integer(loc, ic, p, "ky", 1 if ic["kind"] == "cosine_product" else 0),
            )
        initial.check_modes(grid)
    except NCHError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise loc.error(p, str(exc)) from None

    study = None
    if "study" in doc:
        study = _parse_study(loc, doc["study"], grid, solver)

    resolved = {
        "grid": {"nx": grid.nx, "ny": grid.ny, "X": grid.half_width_x, "Y": grid.half_width_y},
        "kernel": {"type": kspec.kind, "sigma": kspec.sigma, "path": kspec.path, "renormalize": kspec.renormalize},
        "model": {"epsilon": params.epsilon, "gamma0": params.gamma0},
        "solver": {
            "dt": solver.dt,
            "t_end": solver.t_end,
            "stabilizer": {"mode": policy.mode, "value": policy.value},
            "snapshot_every": solver.snapshot_every,
            "diagnostics_every": solver.diagnostics_every,
        },
        "initial": {
            "kind": initial.kind,
            "amplitude": initial.amplitude,
            "kx": initial.kx,
            "ky": initial.ky,
            "seed": initial.seed,
            "mean": initial.mean,
            "path": initial.path,
        },
    }
    if study is not None:
        resolved["study"] = {
            "dts": list(study.dts) if study.dts else None,
            "T": study.T,
            "reference_ratio": study.reference_ratio,
            "grids": [[g.nx, g.ny] for g in study.grids] if study.grids else None,
            "dt": study.dt,
            "reference_factor": study.reference_factor,
        }
    return RunConfig(grid, kspec, kernel, solver, initial, study, resolved)


def _parse_study(loc: _Locator, st: Any, grid: PeriodicGrid, solver: SolverConfig) -> StudySpec:
    p = ("study",)
    _check_keys(loc, st, p, *_SCHEMA["study"])
    dts = None
    if "dts" in st:
        raw = st["dts"]
        if not isinstance(raw, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in raw
        ):
            raise loc.error(p + ("dts",), "expected a list of positive numbers")
        dts = tuple(float(v) for v in raw)
    grids = None
    if "grids" in st:
        raw = st["grids"]
        if not isinstance(raw, list):
            raise loc.error(p + ("grids",), "expected a list")
        out = []
        try:
            for entry in raw:
                if isinstance(entry, int) and not isinstance(entry, bool):
                    nx = ny = entry
                elif isinstance(entry, list) and len(entry) == 2 and all(isinstance(v, int) for v in entry):
                    nx, ny = entry
                else:
                    raise loc.error(p + ("grids",), f"grid entries are N or [nx, ny], got {entry!r}")
                out.append(PeriodicGrid(grid.half_width_x, grid.half_width_y, nx, ny))
        except NCHError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise loc.error(p + ("grids",), str(exc)) from None
        grids = tuple(out)
    T = _number(loc, st, p, "T", solver.t_end)
    dt = _number(loc, st, p, "dt", solver.dt)
    if not (T > 0 and dt > 0):
        raise loc.error(p, "T and dt must be positive")
    return StudySpec(
        dts,
        T,
        _integer(loc, st, p, "reference_ratio", 32),
        grids,
        dt,
        _integer(loc, st, p, "reference_factor", 4),
    )
