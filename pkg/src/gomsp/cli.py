"""Command-line front end.

Subcommands: run (one experiment), compare (several algorithms on identical
draws), verify (property suites), estimate-constants (Monte-Carlo constant
bounds). Exit codes: 0 success, 1 configuration/input error, 2 numerical
failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from .core import GomspConfig, PenaltyTransform, validate_step_condition
from .errors import (ConfigError, DomainError, InvalidInputError,
                     NumericalError, VerificationFailure)
from .experiment import (ExperimentConfig, load_config, run_comparison,
                         run_experiment)
from .geometry import euclidean, geometry_constants, smoothed_entropy
from .problems import TrackingParams, estimate_constants
from .rng import RngStreams
from .verification import SUITES, run_verification

_TRACKING_KEYS = {"kind", "system_A", "input_B_mat", "smoothness_beta",
                  "energy_cap", "box_lower", "box_upper", "target_path"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gomsp",
        description="Online constrained optimization testbed: mirror-descent "
                    "saddle-point method, baselines, and experiment tooling.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment config")
    run_p.add_argument("--config", required=True, help="JSON config path")
    _common_flags(run_p)

    cmp_p = sub.add_parser(
        "compare", help="run several configs against identical draws")
    cmp_p.add_argument("--config", action="append", required=True,
                       dest="configs", help="JSON config path (repeatable)")
    _common_flags(cmp_p)

    ver_p = sub.add_parser("verify", help="run a property suite")
    ver_p.add_argument("suite", choices=SUITES)
    ver_p.add_argument("--seed", type=int, default=None)
    ver_p.add_argument("--cases", type=int, default=10_000,
                       help="randomized cases per geometry check")

    est_p = sub.add_parser(
        "estimate-constants",
        help="Monte-Carlo estimates of the guarantee constants")
    est_p.add_argument("--config", required=True)
    est_p.add_argument("--seed", type=int, default=None)
    est_p.add_argument("--samples", type=int, default=1000)
    return parser


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="override master_seed")
    p.add_argument("--samples", type=int, default=None,
                   help="override num_samples")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--workers", type=int, default=1)


def _apply_overrides(cfg: ExperimentConfig,
                     args: argparse.Namespace) -> ExperimentConfig:
    updates = {}
    if args.seed is not None:
        updates["master_seed"] = args.seed
    if args.samples is not None:
        updates["num_samples"] = args.samples
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    result = run_experiment(cfg, workers=args.workers, out_dir=args.out)
    for name in ("tadr", "taccv", "taql"):
        print(f"final mean {name}: {result.final(name).mean():.6g}")
    for path in result.written_paths:
        print(f"wrote {path}")
    if not result.written_paths:
        print("no output path configured; nothing written")
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    cfgs = [_apply_overrides(load_config(path), args)
            for path in args.configs]
    comparison = run_comparison(cfgs, workers=args.workers, out_dir=args.out)
    for label, result in zip(comparison.labels, comparison.results):
        tadr = result.final("tadr").mean()
        taccv = result.final("taccv").mean()
        print(f"{label}: final mean tadr={tadr:.6g} taccv={taccv:.6g}")
    for path in comparison.written_paths:
        print(f"wrote {path}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    kwargs = {"cases": args.cases}
    if args.seed is not None:
        kwargs["master_seed"] = args.seed
    report = run_verification(args.suite, **kwargs)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 3


def _tracking_params_from_dict(problem: dict) -> TrackingParams:
    unknown = sorted(set(problem) - _TRACKING_KEYS)
    if unknown:
        raise ConfigError(f"unknown tracking key(s): {', '.join(unknown)}")
    try:
        return TrackingParams(
            system_A=np.asarray(problem["system_A"], dtype=np.float64),
            input_B_mat=np.asarray(problem["input_B_mat"], dtype=np.float64),
            smoothness_beta=float(problem.get("smoothness_beta", 0.0)),
            energy_cap=float(problem.get("energy_cap", 1.0)),
            box_lower=np.asarray(problem["box_lower"], dtype=np.float64),
            box_upper=np.asarray(problem["box_upper"], dtype=np.float64),
            target_path=np.asarray(problem.get("target_path", []),
                                   dtype=np.float64))
    except KeyError as exc:
        raise ConfigError(f"tracking problem needs key {exc}") from exc


def _cmd_estimate(args: argparse.Namespace) -> int:
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {args.config}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")

    problem = raw.get("problem", {})
    if isinstance(problem, dict) and problem.get("kind") == "tracking":
        params = _tracking_params_from_dict(problem)
        algo = raw.get("algorithm", {})
        m = params.input_B_mat.shape[1]
        if algo.get("regularizer", "euclidean") == "entropy":
            reg = smoothed_entropy(m, params.energy_cap,
                                   float(algo.get("epsilon", 0.5)))
        else:
            reg = euclidean(m, params.energy_cap)
        seed = args.seed if args.seed is not None \
            else int(raw.get("master_seed", 0))
        est = estimate_constants(params, reg, args.samples,
                                 RngStreams(seed, 0))
        _print_estimates(est)
        return 0

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, master_seed=args.seed)
    params = cfg.make_params()
    reg = cfg.make_regularizer()
    penalty = PenaltyTransform(cfg.penalty_power_p)
    est = estimate_constants(params, reg, args.samples,
                             RngStreams(cfg.master_seed, 0),
                             penalty=penalty, horizon_T=cfg.horizon_T)
    _print_estimates(est)
    K = geometry_constants(reg).strong_convexity_K
    gcfg = GomspConfig(gamma=cfg.gamma, alpha=cfg.alpha, regularizer=reg,
                       penalty=penalty, num_constraints=params.num_R)
    ok = validate_step_condition(gcfg, est.C1, K)
    print(f"step condition at gamma={cfg.gamma:.6g}, alpha={cfg.alpha:.6g}: "
          f"{'satisfied' if ok else 'VIOLATED'}")
    return 0


def _print_estimates(est) -> None:
    print(f"C1={est.C1:.6g} C2={est.C2:.6g} C3={est.C3:.6g} "
          f"L_f={est.L_f:.6g} (maxima over {est.sample_count} draws; "
          "lower estimates of the true suprema)")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "compare": _cmd_compare,
                "verify": _cmd_verify, "estimate-constants": _cmd_estimate}
    try:
        return handlers[args.command](args)
    except (ConfigError, InvalidInputError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except VerificationFailure as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
