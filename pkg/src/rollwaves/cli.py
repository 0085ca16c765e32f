"""Command-line front end.

Subcommands: region | kernel | solve | sweep | verify.  Exit codes:
0 success, 1 verification failure, 2 config error, 3 region error,
4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, DomainError, NoConvergence
from .params import PhysicalParams
from .serialize import write_json
from .solver import NewtonOptions
from .workflows import (
    DEFAULT_SWEEP_GAMMAS,
    RunConfig,
    run_kernel_diagnostics,
    run_region_scan,
    run_single_solve,
    run_sweep,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_REGION = 3
EXIT_NO_CONVERGENCE = 4

_GLOBAL_DEFAULTS = {
    "mu": 0.15,
    "sigma": 2.0,
    "n1": 64,
    "n2": 64,
    "out": "rollwaves-out",
    "seed": 12345,
    "jobs": 1,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="rollwaves",
        description="Compute and verify small-amplitude two-dimensional viscous roll waves.",
    )
    parser.add_argument("--mu", type=float, help="inverse Reynolds number (default 0.15)")
    parser.add_argument("--sigma", type=float, help="inverse Bond number (default 2.0)")
    parser.add_argument("--n1", type=int, help="collocation count along the travel direction")
    parser.add_argument("--n2", type=int, help="collocation count across the travel direction")
    parser.add_argument("--out", help="output directory (default rollwaves-out)")
    parser.add_argument("--seed", type=int, help="seed for stochastic checks")
    parser.add_argument("--jobs", type=int, help="worker count for sweeps (default 1)")
    parser.add_argument("--config", help="JSON file with the same keys as the global flags")

    sub = parser.add_subparsers(dest="command", required=True)

    region = sub.add_parser("region", help="scan the wave-region boundary to CSV")
    region.add_argument("--kappa-min", type=float, default=1.5)
    region.add_argument("--kappa-max", type=float, default=12.0)
    region.add_argument("--samples", type=int, default=50)

    kernel = sub.add_parser("kernel", help="kernel-mode diagnostics at one drive point")
    kernel.add_argument("--gamma", type=float, required=True)
    kernel.add_argument("--kappa", type=float, required=True)

    solve = sub.add_parser("solve", help="solve a single branch point")
    solve.add_argument("--gamma", type=float, required=True)
    solve.add_argument("--kappa", type=float, required=True)
    solve.add_argument("--amplitude", type=float, default=0.02)
    solve.add_argument("--theta", type=float, default=0.0)

    sweep = sub.add_parser("sweep", help="amplitude-fixed sweep over wave speeds")
    sweep.add_argument("--kappa", type=float, default=10.0)
    sweep.add_argument(
        "--gammas",
        default=",".join(str(g) for g in DEFAULT_SWEEP_GAMMAS),
        help="comma-separated wave speeds",
    )
    sweep.add_argument("--amplitude", type=float, default=0.02)
    sweep.add_argument("--theta", type=float, default=0.0)

    verify = sub.add_parser("verify", help="run the verification suite")
    verify.add_argument("--suite", choices=("fast", "full"), default="fast")

    return parser


def _load_config(args) -> RunConfig:
    settings = dict(_GLOBAL_DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config file {args.config}: {err}") from err
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(_GLOBAL_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        settings.update(loaded)
    for key in _GLOBAL_DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    try:
        phys = PhysicalParams(float(settings["mu"]), float(settings["sigma"]))
        config = RunConfig(
            phys=phys,
            n1=int(settings["n1"]),
            n2=int(settings["n2"]),
            out=str(settings["out"]),
            seed=int(settings["seed"]),
            jobs=int(settings["jobs"]),
            options=NewtonOptions(),
        )
    except (DomainError, TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
    if config.jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {config.jobs}")
    return config


def _cmd_region(config, args) -> int:
    if not (1.0 < args.kappa_min < args.kappa_max) or args.samples < 2:
        raise ConfigError(
            f"need 1 < kappa-min < kappa-max and samples >= 2, got "
            f"({args.kappa_min}, {args.kappa_max}, {args.samples})"
        )
    path = run_region_scan(config, args.kappa_min, args.kappa_max, args.samples)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_kernel(config, args) -> int:
    path = run_kernel_diagnostics(config, args.gamma, args.kappa)
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_solve(config, args) -> int:
    try:
        bp, paths = run_single_solve(config, args.gamma, args.kappa, args.amplitude, args.theta)
    except NoConvergence as err:
        print(f"solver did not converge: {err}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    print(
        f"converged in {bp.newton_iters} iterations: "
        f"(gamma, kappa) = ({bp.drive.gamma!r}, {bp.drive.kappa!r}), "
        f"residual = {bp.residual_norm:.3e}"
    )
    for path in paths:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_sweep(config, args) -> int:
    try:
        gammas = [float(g) for g in str(args.gammas).split(",") if g.strip()]
    except ValueError as err:
        raise ConfigError(f"bad --gammas list: {err}") from err
    if not gammas:
        raise ConfigError("empty --gammas list")
    if tuple(gammas) == DEFAULT_SWEEP_GAMMAS:
        print("note: the default speed list and amplitude are package choices, not published values")
    rows, n_ok = run_sweep(config, args.kappa, gammas, args.amplitude, args.theta)
    print(f"{n_ok}/{len(rows)} sweep entries converged; wrote {config.outdir() / 'sweep_summary.csv'}")
    return EXIT_OK if n_ok > 0 else EXIT_NO_CONVERGENCE


def _cmd_verify(config, args) -> int:
    from .verify import fast_suite, full_suite

    suite = fast_suite if args.suite == "fast" else full_suite
    results = suite(n=config.n1, seed=config.seed)
    report = {
        "suite": args.suite,
        "n1": config.n1,
        "n2": config.n2,
        "seed": config.seed,
        "checks": [
            {"name": r.name, "passed": r.passed, "detail": r.detail} for r in results
        ],
        "all_passed": all(r.passed for r in results),
    }
    path = config.outdir() / f"verify_{args.suite}.json"
    write_json(report, path)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name} ({r.seconds:.1f}s): {r.detail}")
    print(f"wrote {path}")
    return EXIT_OK if report["all_passed"] else EXIT_VERIFY_FAILED


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args)
        handler = {
            "region": _cmd_region,
            "kernel": _cmd_kernel,
            "solve": _cmd_solve,
            "sweep": _cmd_sweep,
            "verify": _cmd_verify,
        }[args.command]
        return handler(config, args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as err:
        print(f"region error: {err}", file=sys.stderr)
        return EXIT_REGION


if __name__ == "__main__":
    sys.exit(main())
