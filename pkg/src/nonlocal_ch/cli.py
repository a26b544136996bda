"""Command-line front end: ``nch run``, ``nch converge`` and ``nch check``.

Exit codes: 0 on success, 1 on a validation error (bad config, bad
arguments, violated constraints), 2 on a runtime failure (blow-up, mass
drift, I/O failure while writing results).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .checks import run_checks
from .config import RunConfig, parse_config
from .errors import BlowUpError, ConfigError, ConservationError, NCHError, StudyError
from .grid import mean, norm_linf
from .harness import config_hash, spatial_study, temporal_study
from .kernel import make_gaussian_kernel
from .stepper import RunRecorder, resolve_stabilizer, run

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

SEED_ENV = "NCH_SEED"

logger = logging.getLogger("nonlocal_ch")


def _seed_from_env() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _load_config(path: str, renormalize: bool | None = None) -> RunConfig:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(data, Path(path).parent, _seed_from_env(), renormalize)


def _cmd_run(args) -> int:
    cfg = _load_config(args.config, False if args.no_renormalize else None)
    u0 = cfg.initial.build(cfg.grid)
    recorder = RunRecorder(args.out)
    t0 = time.perf_counter()
    try:
        u = run(u0, cfg.kernel, cfg.solver, sink=recorder)
    finally:
        recorder.close()
    summary = {
        "config": cfg.resolved,
        "config_hash": config_hash(cfg.resolved),
        "initial_mean": mean(u0),
        "steps": cfg.solver.n_steps,
        "final_time": cfg.solver.n_steps * cfg.solver.dt,
        "final_linf": norm_linf(u),
        "final_mean": mean(u),
        "wall_seconds": time.perf_counter() - t0,
    }
    with open(Path(args.out) / "run.json", "w", encoding="ascii") as fh:
        json.dump(summary, fh, indent=2)
    print(f"run: {summary['steps']} steps to t={summary['final_time']:.6g}, output in {args.out}")
    return EXIT_OK


def _cmd_converge(args) -> int:
    cfg = _load_config(args.config)
    st = cfg.study
    if st is None:
        raise ConfigError("converge needs a 'study' section in the config")
    params = cfg.solver.params
    policy = cfg.solver.stabilizer
    if args.axis == "time":
        if not st.dts:
            raise ConfigError("study.dts is required for --axis time")
        study = temporal_study(
            cfg.initial,
            cfg.kernel,
            params,
            st.dts,
            st.T,
            stabilizer=policy,
            reference_ratio=st.reference_ratio,
            jobs=args.jobs,
        )
    else:
        if not st.grids:
            raise ConfigError("study.grids is required for --axis space")
        if cfg.kernel_spec.kind != "gaussian":
            raise ConfigError("a spatial study needs a kernel that can be rebuilt on every grid (type gaussian)")
        sigma = cfg.kernel_spec.sigma
        study = spatial_study(
            cfg.initial,
            lambda g: make_gaussian_kernel(g, sigma),
            params,
            st.grids,
            st.dt,
            st.T,
            stabilizer=policy,
            reference_factor=st.reference_factor,
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(study.to_json(config_hash(cfg.resolved)), encoding="ascii")
    (out / "report.csv").write_text(study.to_csv(), encoding="ascii")
    orders = ", ".join("-" if o is None else f"{o:.3f}" for o in study.orders_hm1)
    print(f"converge ({args.axis}): H^-1 orders [{orders}], report in {out}")
    return EXIT_OK


def _cmd_check(args) -> int:
    t0 = time.perf_counter()
    results = run_checks(args.nx, args.ny, args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  [{r.detail}]")
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} properties passed in {time.perf_counter() - t0:.2f}s")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nch", description="Nonlocal Cahn-Hilliard pseudo-spectral solver.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log stabilizer updates and progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="integrate one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-renormalize", action="store_true", help="reject file kernels whose second moment is not 1")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("converge", help="run a refinement study")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", choices=("time", "space"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1, help="levels run concurrently (time axis)")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("check", help="run the built-in property suite")
    p.add_argument("--nx", type=int, default=8)
    p.add_argument("--ny", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; report those as validation errors
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return args.func(args)
    except (BlowUpError, StudyError, ConservationError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except NCHError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
