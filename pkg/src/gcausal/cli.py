"""Command-line front end: ``gcausal <subcommand> [--config FILE] [overrides]``.

Exit codes: 0 ok, 1 benchmark with more than half its trials failed,
2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments as ex
from .config import ExperimentConfig, load_config, resolve_seed, with_overrides
from .errors import ConfigError, DataError, GCausalError, NumericError

SUBCOMMANDS = ("simulate", "discover", "baseline", "benchmark", "knockoff-diag", "test-bench", "regimes")

# argparse dest -> dotted config key
OVERRIDES = {
    "output_dir": "output_dir",
    "method": "method",
    "panel": "data.panel",
    "groups": "data.groups_file",
    "missing_policy": "data.missing_policy",
    "group_sizes": "data.group_sizes",
    "density": "data.density",
    "nonlinearity": "data.nonlinearity",
    "max_lag": "data.max_lag",
    "length": "data.length",
    "alpha": "discovery.alpha",
    "test": "discovery.test_kind",
    "bonferroni": "discovery.bonferroni",
    "epochs": "forecaster.epochs",
    "context_len": "forecaster.context_len",
    "horizon": "forecaster.horizon",
    "var_lag": "baseline.var_lag",
    "regimes": "regimes.enabled",
    "k": "regimes.k",
    "window_length": "regimes.window_length",
    "regime_stride": "regimes.stride",
    "axis": "sweep.axis",
    "values": "sweep.values",
    "trials": "sweep.trials",
    "methods": "sweep.methods",
    "workers": "sweep.workers",
    "reps": "test_bench.repetitions",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcausal", description="Group-level causal discovery toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--method", choices=("gcdmi", "mc-vgc", "mc-cdmi"))
        p.add_argument("--panel", help="panel CSV (switches data.source to csv)")
        p.add_argument("--groups", help="groups JSON")
        p.add_argument("--missing-policy", dest="missing_policy", choices=("error", "drop_rows", "interpolate"))
        p.add_argument("--group-sizes", dest="group_sizes", type=int, nargs="+")
        p.add_argument("--density", type=float)
        p.add_argument("--nonlinearity", type=float)
        p.add_argument("--max-lag", dest="max_lag", type=int)
        p.add_argument("--length", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--test", choices=("KS", "MWU", "CVM", "WSR", "WELCH", "AD"))
        p.add_argument("--bonferroni", action="store_true", default=None)
        p.add_argument("--epochs", type=int)
        p.add_argument("--context-len", dest="context_len", type=int)
        p.add_argument("--horizon", type=int)
        p.add_argument("--var-lag", dest="var_lag", type=int)
        p.add_argument("--regimes", action="store_true", default=None, help="segment into regimes before discovery")
        p.add_argument("--k", type=int)
        p.add_argument("--window-length", dest="window_length", type=int)
        p.add_argument("--regime-stride", dest="regime_stride", type=int)
        p.add_argument("--axis", choices=("density", "nonlinearity", "groups"))
        p.add_argument("--values", type=float, nargs="+")
        p.add_argument("--trials", type=int)
        p.add_argument("--methods", nargs="+", choices=("gcdmi", "mc-vgc", "mc-cdmi"))
        p.add_argument("--workers", type=int)
        p.add_argument("--reps", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config:
        cfg, raw = load_config(args.config)
    else:
        cfg, raw = ExperimentConfig(), None
    overrides = {key: getattr(args, flag) for flag, key in OVERRIDES.items()}
    if args.panel is not None:
        overrides["data.source"] = "csv"
    if args.values is not None and (args.axis or cfg.sweep.axis) == "groups":
        overrides["sweep.values"] = [int(v) for v in args.values]
    cfg = with_overrides(cfg, overrides)
    return with_overrides(cfg, {"seed": resolve_seed(args.seed, raw)})


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = resolve_config(args)
    cmd = args.command
    if cmd == "simulate":
        cfg.validate()
        ex.run_simulate(cfg)
    elif cmd == "discover":
        bundle = ex.run_discovery(cfg)
        print(f"edges: {bundle['graphs'][0].edges() if len(bundle['graphs']) == 1 else bundle['graph']['adjacency']}")
    elif cmd == "baseline":
        method = cfg.method if cfg.method != "gcdmi" else "mc-vgc"
        bundle = ex.run_discovery(cfg, method)
        print(f"{method} adjacency: {bundle['graph']['adjacency']}")
    elif cmd == "benchmark":
        res = ex.run_benchmark(cfg)
        for row in res["summary"]:
            print(row)
        if res["failed_fraction"] > 0.5:
            print(f"error: {res['failed_fraction']:.0%} of trials failed", file=sys.stderr)
            return 1
    elif cmd == "knockoff-diag":
        cfg.validate()
        res = ex.run_knockoff_diag(cfg)
        print(res["report"])
    elif cmd == "test-bench":
        cfg.validate()
        ex.run_test_bench(cfg)
    elif cmd == "regimes":
        res = ex.run_regimes(cfg)
        print(res["labels"].to_json()["segments"])
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return exc.exit_code
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return exc.exit_code
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return exc.exit_code
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return NumericError.exit_code
    except GCausalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
