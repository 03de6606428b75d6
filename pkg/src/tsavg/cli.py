"""Command-line entry point: ``tsavg {verify,run,sweep} --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 certification failure,
4 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .config import ConfigError, ExperimentConfig, load_config
from .errors import TimeScaleError
from .experiments import CertificationError, run_example, run_sweep, verify_command

EXIT_OK, EXIT_CONFIG, EXIT_CERT, EXIT_SOLVER = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="TOML experiment file")
    common.add_argument("--q", type=float, action="append", help="override scale q (repeatable)")
    common.add_argument("--epsilon", type=float, action="append",
                        help="override epsilon values (repeatable)")
    common.add_argument("--n-max", type=int, help="override geometric n_max")
    common.add_argument("--L", type=float, help="override the horizon factor L")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "csv+svg"))
    common.add_argument("--seed", type=int, help="seed for M/lambda sampling")
    common.add_argument("--parallel", type=int, help="worker threads for (q, eps) runs")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="tsavg", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="check periodicity of the configured field")
    sub.add_parser("run", parents=[common], help="solve original and averaged systems")
    sub.add_parser("sweep", parents=[common], help="epsilon sweep with log-log slope")
    return p


def apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    scale = dict(cfg.scale)
    if args.q:
        scale["q"] = list(args.q)
    if args.n_max is not None:
        scale["n_max"] = args.n_max
    kw = {"scale": scale}
    if args.epsilon:
        kw["epsilons"] = tuple(args.epsilon)
    if args.L is not None:
        kw["L"] = args.L
    if args.out:
        kw["out_dir"] = args.out
    if args.format:
        kw["fmt"] = args.format
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.parallel is not None:
        kw["parallel"] = args.parallel
    return replace(cfg, **kw)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_overrides(load_config(args.config), args)
        if args.command == "verify":
            code, _ = verify_command(cfg)
            return code
        if args.command == "run":
            run_example(cfg)
        else:
            run_sweep(cfg)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertificationError as exc:
        print(f"certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except TimeScaleError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        # invalid parameters rejected while building scale, domain or system
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
