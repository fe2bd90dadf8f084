"""Declarative experiment runner: JSON config in, per-slot metric CSV out.

Protocol per run: every sample derives its own substreams, the algorithm
warm-starts for `warmup_slots` slots (state evolves, scoreboard off, the
environment clock t advances), then `horizon_T` recorded slots follow with
the scoreboard folding in each played point before the state advances.

Samples are embarrassingly parallel. A sample's whole trajectory is a pure
function of (config, sample index), and rows are merged in sample order, so
output bytes are identical for any worker count. With a shared environment
(the default) the per-slot benchmarks depend only on (seed, t); they are
solved once up front and injected into every sample and every algorithm of
a comparison.
"""

from __future__ import annotations

import csv
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .baselines import init_mosp_state, init_sdg_state, mosp_step, sdg_step
from .core import (FirstOrderFeedback, GomspConfig, PenaltyTransform,
                   gomsp_step, init_state, validate_step_condition)
from .errors import ConfigError, NumericalError
from .geometry import (Regularizer, euclidean, geometry_constants,
                       smoothed_entropy)
from .metrics import (MetricsRecord, init_metrics, per_slot_optimum,
                      time_averages, update_metrics)
from .problems import (DispatchParams, dispatch_constraint_gradients,
                       dispatch_constraints, dispatch_generate_round,
                       dispatch_loss_gradient, estimate_constants,
                       make_dispatch_params)
from .rng import RngStreams

_METRIC_COLUMNS = ("tadr", "taccv", "taql", "hcfit_mean", "dual_norm",
                   "regret_cum", "gap_cum")
_AGGREGATE_METRICS = ("tadr", "taccv", "taql", "hcfit_mean")
_PERCENTILE_LEVELS = (25, 50, 75, 90)

_PROBLEM_KEYS = {"kind", "dim_D", "num_R", "cap_B", "demand_penalty_xi",
                 "sigma_a", "sigma_b", "per_coordinate_noise",
                 "per_constraint_thresholds"}
_ALGORITHM_KEYS = {"kind", "gamma", "alpha", "regularizer", "epsilon",
                   "penalty_power_p"}
_TOP_KEYS = {"problem", "algorithm", "horizon_T", "warmup_slots",
             "num_samples", "master_seed", "output_path",
             "shared_environment", "benchmark_tol"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved run description; unset gamma/alpha fall back to the
    horizon-scaled defaults gamma = 0.1/sqrt(T) and alpha = 15 gamma."""

    algorithm: str = "gomsp"
    regularizer: str = "entropy"
    epsilon: float = 0.5
    penalty_power_p: float = 1.0
    gamma: float | None = None
    alpha: float | None = None
    horizon_T: int = 500
    warmup_slots: int = 40
    num_samples: int = 1
    master_seed: int = 0
    output_path: str | None = None
    shared_environment: bool = True
    benchmark_tol: float = 1e-8
    problem: str = "dispatch"
    dim_D: int = 20
    num_R: int = 10
    cap_B: float = 1.0
    demand_penalty_xi: float = 20.0
    sigma_a: float = 0.2
    sigma_b: float = 1.0
    per_coordinate_noise: bool = False
    per_constraint_thresholds: bool = False

    def __post_init__(self) -> None:
        if self.problem != "dispatch":
            raise ConfigError(
                f"problem {self.problem!r} cannot be run: only 'dispatch' has "
                "a round generator (the tracking loss is covered by the "
                "gradient suite and estimate-constants)")
        if self.algorithm not in ("gomsp", "sdg", "mosp"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.regularizer not in ("euclidean", "entropy"):
            raise ConfigError(f"unknown regularizer {self.regularizer!r}")
        if self.horizon_T < 1:
            raise ConfigError("horizon_T must be >= 1")
        if self.warmup_slots < 0:
            raise ConfigError("warmup_slots must be >= 0")
        if self.num_samples < 1:
            raise ConfigError("num_samples must be >= 1")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ConfigError("master_seed must fit in 64 bits")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.penalty_power_p < 1:
            raise ConfigError("penalty_power_p must be >= 1")
        if self.benchmark_tol <= 0:
            raise ConfigError("benchmark_tol must be positive")
        gamma = self.gamma
        if gamma is None:
            gamma = 0.1 / math.sqrt(self.horizon_T)
        alpha = self.alpha if self.alpha is not None else 15.0 * gamma
        if gamma <= 0:
            raise ConfigError("gamma must be positive")
        if alpha < 0:
            raise ConfigError("alpha must be >= 0")
        object.__setattr__(self, "gamma", float(gamma))
        object.__setattr__(self, "alpha", float(alpha))

    @property
    def label(self) -> str:
        if self.algorithm != "gomsp":
            return self.algorithm
        p = f"{self.penalty_power_p:g}".replace(".", "_")
        return f"gomsp-{self.regularizer}-p{p}"

    def make_regularizer(self) -> Regularizer:
        if self.regularizer == "euclidean":
            return euclidean(self.dim_D, self.cap_B)
        return smoothed_entropy(self.dim_D, self.cap_B, self.epsilon)

    def make_params(self) -> DispatchParams:
        return make_dispatch_params(
            self.rng_for_sample(0),
            dim_D=self.dim_D, num_R=self.num_R, cap_B=self.cap_B,
            demand_penalty_xi=self.demand_penalty_xi,
            sigma_a=self.sigma_a, sigma_b=self.sigma_b,
            per_coordinate_noise=self.per_coordinate_noise,
            per_constraint_thresholds=self.per_constraint_thresholds)

    def rng_for_sample(self, index: int) -> RngStreams:
        return RngStreams(master_seed=self.master_seed, sample_index=index,
                          shared_environment=self.shared_environment)

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        _reject_unknown(raw, _TOP_KEYS, "config")
        problem = raw.get("problem", {})
        algorithm = raw.get("algorithm", {})
        if not isinstance(problem, dict) or not isinstance(algorithm, dict):
            raise ConfigError("'problem' and 'algorithm' must be objects")
        _reject_unknown(problem, _PROBLEM_KEYS, "problem")
        _reject_unknown(algorithm, _ALGORITHM_KEYS, "algorithm")
        kwargs: dict = {}
        for key in _TOP_KEYS - {"problem", "algorithm"}:
            if key in raw:
                kwargs[key] = raw[key]
        if "kind" in problem:
            kwargs["problem"] = problem["kind"]
        for key in _PROBLEM_KEYS - {"kind"}:
            if key in problem:
                kwargs[key] = problem[key]
        if "kind" in algorithm:
            kwargs["algorithm"] = algorithm["kind"]
        for key in _ALGORITHM_KEYS - {"kind"}:
            if key in algorithm:
                kwargs[key] = algorithm[key]
        try:
            return ExperimentConfig(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _reject_unknown(raw: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(unknown)}")


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return ExperimentConfig.from_dict(raw)


def benchmark_table(params: DispatchParams, rng: RngStreams,
                    slots: Iterable[int],
                    tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Solve the per-slot benchmark for each absolute slot, warm-starting
    each solve from the previous slot's optimizer."""
    x_stars, f_stars = [], []
    x0 = None
    for t in slots:
        round_ = dispatch_generate_round(params, rng, t)
        x_star, f_star = per_slot_optimum(round_, params, tol, x0=x0)
        x_stars.append(x_star)
        f_stars.append(f_star)
        x0 = x_star
    return np.asarray(x_stars), np.asarray(f_stars)


@dataclass(frozen=True)
class SampleTrace:
    """Per-slot metric series of one sample, each of length horizon_T."""

    series: dict[str, np.ndarray]


def _algorithm_state(cfg: ExperimentConfig, params: DispatchParams):
    if cfg.algorithm == "gomsp":
        gcfg = GomspConfig(gamma=cfg.gamma, alpha=cfg.alpha,
                           regularizer=cfg.make_regularizer(),
                           penalty=PenaltyTransform(cfg.penalty_power_p),
                           num_constraints=params.num_R)
        return gcfg, init_state(gcfg)
    if cfg.algorithm == "sdg":
        return None, init_sdg_state(params)
    return None, init_mosp_state(params)


def _run_sample(cfg: ExperimentConfig, sample_index: int,
                optima: tuple[np.ndarray, np.ndarray] | None) -> SampleTrace:
    rng = cfg.rng_for_sample(sample_index)
    # Under a shared environment the 'constraint-draw' stream ignores the
    # sample index, so this yields one economy for every sample; otherwise
    # each sample draws its own.
    params = make_dispatch_params(
        rng, dim_D=cfg.dim_D, num_R=cfg.num_R, cap_B=cfg.cap_B,
        demand_penalty_xi=cfg.demand_penalty_xi,
        sigma_a=cfg.sigma_a, sigma_b=cfg.sigma_b,
        per_coordinate_noise=cfg.per_coordinate_noise,
        per_constraint_thresholds=cfg.per_constraint_thresholds)
    h = PenaltyTransform(cfg.penalty_power_p)
    gcfg, state = _algorithm_state(cfg, params)
    rec = init_metrics(params.num_R)
    T, warmup = cfg.horizon_T, cfg.warmup_slots
    out = {name: np.empty(T) for name in _METRIC_COLUMNS}
    grad_norm_at_star = 0.0

    for t in range(1, warmup + T + 1):
        round_ = dispatch_generate_round(params, rng, t)
        x_now = state.primal_X
        if t > warmup:
            k = t - warmup - 1
            opt = None
            if optima is not None:
                opt = (optima[0][k], float(optima[1][k]))
            rec = update_metrics(rec, x_now, round_, params, h,
                                 cfg.benchmark_tol, optimum=opt)
            grad_norm_at_star += float(np.linalg.norm(
                dispatch_loss_gradient(rec.prev_x_star, round_, params)))
            tadr, taccv, taql, _ = time_averages(rec, params.num_R)
            out["tadr"][k] = tadr
            out["taccv"][k] = taccv
            out["taql"][k] = taql
            out["hcfit_mean"][k] = float(rec.hcfit.mean())
            out["dual_norm"][k] = float(np.linalg.norm(state.dual_Lambda))
            out["regret_cum"][k] = rec.cum_dynamic_regret
            out["gap_cum"][k] = rec.cum_gap
        state = _advance(cfg, gcfg, state, round_, params)

    _check_scoreboard(rec, grad_norm_at_star, cfg.cap_B)
    return SampleTrace(series=out)


def _advance(cfg: ExperimentConfig, gcfg: GomspConfig | None, state,
             round_, params: DispatchParams):
    if cfg.algorithm == "gomsp":
        x = state.primal_X
        fb = FirstOrderFeedback(
            noisy_loss_grad=dispatch_loss_gradient(x, round_, params,
                                                   use_observed=True),
            constraint_values=dispatch_constraints(x, round_, params),
            constraint_grads=dispatch_constraint_gradients(x, round_, params))
        return gomsp_step(state, fb, gcfg)
    if cfg.algorithm == "sdg":
        return sdg_step(state, round_, params, cfg.gamma, cfg.benchmark_tol)
    return mosp_step(state, round_, params, cfg.gamma)


def _check_scoreboard(rec: MetricsRecord, grad_norm_at_star: float,
                      cap_B: float) -> None:
    # Two always-true consequences of convexity; a violation means the
    # scoreboard itself is broken, not the algorithm under test.
    t = rec.slots_counted
    if t == 0:
        return
    diameter = math.sqrt(2.0) * cap_B
    lower = -diameter * grad_norm_at_star
    if rec.cum_dynamic_regret < lower - 1e-9 * max(1.0, abs(lower)):
        raise NumericalError(
            f"regret {rec.cum_dynamic_regret:.6e} below its convexity floor "
            f"{lower:.6e}")
    if rec.cum_gap < rec.cum_dynamic_regret - 1e-6 * t:
        raise NumericalError(
            f"gap {rec.cum_gap:.6e} fell below regret "
            f"{rec.cum_dynamic_regret:.6e}")


def _warn_if_step_condition_fails(cfg: ExperimentConfig,
                                  params: DispatchParams) -> None:
    if cfg.algorithm != "gomsp":
        return
    reg = cfg.make_regularizer()
    est = estimate_constants(params, reg, 200,
                             RngStreams(cfg.master_seed, 0),
                             penalty=PenaltyTransform(cfg.penalty_power_p),
                             horizon_T=cfg.horizon_T)
    K = geometry_constants(reg).strong_convexity_K
    gcfg = GomspConfig(gamma=cfg.gamma, alpha=cfg.alpha, regularizer=reg,
                       penalty=PenaltyTransform(cfg.penalty_power_p),
                       num_constraints=params.num_R)
    if not validate_step_condition(gcfg, est.C1, K):
        warnings.warn(
            f"step condition fails at gamma={cfg.gamma:g}, alpha={cfg.alpha:g}"
            f" with estimated C1={est.C1:.4g}, K={K:.4g}; running anyway",
            RuntimeWarning, stacklevel=2)


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    series: dict[str, np.ndarray]
    written_paths: tuple[str, ...] = ()

    def final(self, metric: str) -> np.ndarray:
        return self.series[metric][:, -1]


def _worker_task(args) -> SampleTrace:
    cfg, index, optima = args
    return _run_sample(cfg, index, optima)


def run_experiment(cfg: ExperimentConfig, workers: int = 1,
                   optima: tuple[np.ndarray, np.ndarray] | None = None,
                   out_dir: str | None = None) -> ExperimentResult:
    """Run all samples, optionally in a process pool, and emit CSVs.

    `optima` injects precomputed per-slot benchmarks (recorded slots only,
    in order); when omitted and the environment is shared they are solved
    here once. Files are written when `out_dir` or cfg.output_path is set.
    """
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    params = cfg.make_params()
    _warn_if_step_condition_fails(cfg, params)
    if optima is None and cfg.shared_environment:
        first = cfg.warmup_slots + 1
        optima = benchmark_table(params, cfg.rng_for_sample(0),
                                 range(first, first + cfg.horizon_T),
                                 cfg.benchmark_tol)
    tasks = [(cfg, i, optima) for i in range(cfg.num_samples)]
    if workers == 1 or cfg.num_samples == 1:
        traces = [_worker_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_worker_task, tasks))

    series = {name: np.stack([tr.series[name] for tr in traces])
              for name in _METRIC_COLUMNS}
    target = out_dir if out_dir is not None else cfg.output_path
    written: tuple[str, ...] = ()
    if target is not None:
        written = _write_run_csvs(target, series)
    return ExperimentResult(config=cfg, series=series, written_paths=written)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_run_csvs(out_dir: str,
                    series: dict[str, np.ndarray]) -> tuple[str, ...]:
    os.makedirs(out_dir, exist_ok=True)
    samples_path = os.path.join(out_dir, "samples.csv")
    S, T = series["tadr"].shape
    with open(samples_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("slot", "sample") + _METRIC_COLUMNS)
        for s in range(S):
            for k in range(T):
                writer.writerow(
                    [k + 1, s] + [_fmt(series[m][s, k])
                                  for m in _METRIC_COLUMNS])
    aggregate_path = os.path.join(out_dir, "aggregate.csv")
    _write_aggregate_csv(aggregate_path, series)
    return (samples_path, aggregate_path)


def _write_aggregate_csv(path: str, series: dict[str, np.ndarray]) -> None:
    from .metrics import aggregate_percentiles

    T = series["tadr"].shape[1]
    header = ["slot"]
    columns: list[np.ndarray] = []
    for metric in _AGGREGATE_METRICS:
        bands = aggregate_percentiles(series[metric], _PERCENTILE_LEVELS)
        header.append(f"{metric}_mean")
        columns.append(bands["mean"])
        for level in _PERCENTILE_LEVELS:
            header.append(f"{metric}_p{level}")
            columns.append(bands[f"p{level}"])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(T):
            writer.writerow([k + 1] + [_fmt(col[k]) for col in columns])


@dataclass(frozen=True)
class ComparisonResult:
    labels: tuple[str, ...]
    results: tuple[ExperimentResult, ...]
    written_paths: tuple[str, ...] = ()


def run_comparison(cfgs: Sequence[ExperimentConfig], workers: int = 1,
                   out_dir: str | None = None) -> ComparisonResult:
    """Run several algorithms against identical environment draws and join
    their per-slot sample-mean TADR/TACCV/TAQL columns."""
    if not cfgs:
        raise ConfigError("need at least one config to compare")
    base = cfgs[0]
    shared_fields = ("problem", "dim_D", "num_R", "cap_B",
                     "demand_penalty_xi", "sigma_a", "sigma_b",
                     "per_coordinate_noise", "per_constraint_thresholds",
                     "master_seed", "horizon_T", "warmup_slots",
                     "num_samples", "shared_environment", "benchmark_tol")
    for cfg in cfgs[1:]:
        for name in shared_fields:
            if getattr(cfg, name) != getattr(base, name):
                raise ConfigError(
                    f"comparison configs disagree on {name}: "
                    f"{getattr(base, name)!r} vs {getattr(cfg, name)!r}")

    optima = None
    if base.shared_environment:
        params = base.make_params()
        first = base.warmup_slots + 1
        optima = benchmark_table(params, base.rng_for_sample(0),
                                 range(first, first + base.horizon_T),
                                 base.benchmark_tol)

    labels: list[str] = []
    for cfg in cfgs:
        label = cfg.label
        if label in labels:
            label = f"{label}-{len(labels)}"
        labels.append(label)

    results = tuple(run_experiment(cfg, workers=workers, optima=optima)
                    for cfg in cfgs)
    written: tuple[str, ...] = ()
    if out_dir is not None:
        written = (_write_comparison_csv(out_dir, labels, results),)
    return ComparisonResult(labels=tuple(labels), results=results,
                            written_paths=written)


def _write_comparison_csv(out_dir: str, labels: Sequence[str],
                          results: Sequence[ExperimentResult]) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "comparison.csv")
    T = results[0].series["tadr"].shape[1]
    header = ["slot"]
    columns: list[np.ndarray] = []
    for label, result in zip(labels, results):
        for metric in ("tadr", "taccv", "taql"):
            header.append(f"{label}_{metric}")
            columns.append(result.series[metric].mean(axis=0))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k in range(T):
            writer.writerow([k + 1] + [_fmt(col[k]) for col in columns])
    return path
