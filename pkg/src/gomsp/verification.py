"""Executable property suites behind the CLI's `verify` subcommand.

Each suite runs fixed-seed randomized checks and reports one line per
invariant with its measured margin; a margin is built so that >= 0 means
the invariant held (typically `tolerance - worst observed violation` or
`bound - worst observed value`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .core import (FirstOrderFeedback, GomspConfig, PenaltyTransform,
                   gomsp_step, init_state, penalty_apply,
                   penalty_chain_gradient)
from .errors import InvalidInputError
from .experiment import ExperimentConfig, benchmark_table, run_experiment
from .geometry import (Regularizer, coupling_modulus, dual_norm, euclidean,
                       fenchel_coupling, geometry_constants, mirror_map,
                       primal_norm, project_capped_simplex,
                       regularizer_gradient, regularizer_value,
                       smoothed_entropy)
from .problems import (TrackingParams, dispatch_constraint_gradients,
                       dispatch_constraints, dispatch_generate_round,
                       dispatch_loss, dispatch_loss_gradient,
                       make_dispatch_params, sample_feasible, tracking_loss,
                       tracking_loss_gradient)
from .rng import RngStreams

SUITES = ("geometry", "gradients", "lemma1", "sublinearity")

_SLACK_TOL = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    margin: float
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class SuiteReport:
    suite: str
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            line = f"{status} {c.name}: margin={c.margin:.3e}"
            if c.detail:
                line += f" ({c.detail})"
            out.append(line)
        n_fail = sum(not c.passed for c in self.checks)
        out.append(f"{self.suite}: {len(self.checks) - n_fail}/"
                   f"{len(self.checks)} checks passed")
        return out


def run_verification(suite: str, master_seed: int = 20_260_814,
                     cases: int = 10_000,
                     T_values: Sequence[int] = (250, 500, 1000, 2000),
                     num_seeds: int = 20) -> SuiteReport:
    if suite == "geometry":
        return geometry_suite(master_seed, cases)
    if suite == "gradients":
        return gradients_suite(master_seed)
    if suite == "lemma1":
        return lemma1_suite(master_seed)
    if suite == "sublinearity":
        return sublinearity_suite(master_seed, T_values, num_seeds)
    raise InvalidInputError(
        f"unknown suite {suite!r}; choose one of {', '.join(SUITES)}")


# --------------------------------------------------------------------------
# geometry


def _feasibility_margin(x: np.ndarray, B: float) -> float:
    return float(min(x.min(), B - x.sum(axis=-1).max()))


def geometry_suite(master_seed: int, cases: int) -> SuiteReport:
    gen = np.random.default_rng(master_seed)
    checks: list[CheckResult] = []
    compare_pts = 4

    for D in (2, 5, 20):
        B = 1.0
        y = gen.normal(0.0, 3.0, size=(cases, D))
        z = sample_feasible(gen, D, B, size=compare_pts * cases)
        z = z.reshape(compare_pts, cases, D)

        proj = project_capped_simplex(y, B)
        checks.append(_check(
            f"projection-feasible-D{D}", _feasibility_margin(proj, B),
            tol=_SLACK_TOL))
        dist_p = np.sum((y - proj) ** 2, axis=-1)
        dist_z = np.sum((y[None] - z) ** 2, axis=-1)
        checks.append(_check(
            f"projection-optimal-D{D}", float((dist_z - dist_p).min()),
            tol=_SLACK_TOL))

        for reg in (euclidean(D, B), smoothed_entropy(D, B)):
            tag = f"{reg.kind}-D{D}"
            K = coupling_modulus(reg)
            L_psi = geometry_constants(reg).steepness_L_psi
            p = sample_feasible(gen, D, B, size=cases)
            phi = mirror_map(y, reg)

            checks.append(_check(
                f"mirror-feasible-{tag}", _feasibility_margin(phi, B),
                tol=_SLACK_TOL))
            obj_phi = np.sum(y * phi, axis=-1) - regularizer_value(phi, reg)
            obj_z = np.sum(y[None] * z, axis=-1) \
                - regularizer_value(z.reshape(-1, D), reg).reshape(
                    compare_pts, cases)
            checks.append(_check(
                f"mirror-optimal-{tag}", float((obj_phi[None] - obj_z).min()),
                tol=_SLACK_TOL))

            coupling = fenchel_coupling(p, y, reg)
            checks.append(_check(
                f"coupling-nonnegative-{tag}", float(coupling.min()),
                tol=_SLACK_TOL))
            gap = coupling - 0.5 * K * primal_norm(phi - p, reg) ** 2
            checks.append(_check(
                f"coupling-lower-bound-{tag}", float(gap.min()),
                tol=_SLACK_TOL))

            y2 = y + gen.normal(0.0, 1.0, size=(cases, D))
            lhs = fenchel_coupling(p, y2, reg)
            rhs = (coupling + np.sum((phi - p) * (y2 - y), axis=-1)
                   + dual_norm(y2 - y, reg) ** 2 / (2.0 * K))
            checks.append(_check(
                f"coupling-upper-bound-{tag}", float((rhs - lhs).min()),
                tol=_SLACK_TOL))

            # The steepness bound needs y in the gradient range of psi.
            x0 = sample_feasible(gen, D, B, size=cases)
            x1 = sample_feasible(gen, D, B, size=cases)
            x2 = sample_feasible(gen, D, B, size=cases)
            y0 = regularizer_gradient(x0, reg)
            diff = np.abs(fenchel_coupling(x1, y0, reg)
                          - fenchel_coupling(x2, y0, reg))
            lip = 2.0 * L_psi * primal_norm(x1 - x2, reg)
            checks.append(_check(
                f"coupling-lipschitz-{tag}", float((lip - diff).min()),
                tol=_SLACK_TOL))

            checks.append(_conjugate_gradient_check(gen, reg, tag))

    return SuiteReport("geometry", tuple(checks))


def _conjugate_gradient_check(gen: np.random.Generator, reg: Regularizer,
                              tag: str) -> CheckResult:
    from .geometry import conjugate_value

    n, D, step = 64, reg.dimension, 1e-5
    y = gen.normal(0.0, 2.0, size=(n, D))
    analytic = mirror_map(y, reg)
    shift = step * np.eye(D)
    plus = (y[:, None, :] + shift[None]).reshape(-1, D)
    minus = (y[:, None, :] - shift[None]).reshape(-1, D)
    fd = (conjugate_value(plus, reg)
          - conjugate_value(minus, reg)).reshape(n, D) / (2 * step)
    rel = (np.linalg.norm(fd - analytic, axis=-1)
           / np.maximum(np.linalg.norm(analytic, axis=-1), 1e-12))
    return _check(f"conjugate-gradient-fd-{tag}", 1e-4 - float(rel.max()))


def _check(name: str, margin: float, tol: float = 0.0,
           detail: str = "") -> CheckResult:
    return CheckResult(name=name, margin=margin, passed=margin >= -tol,
                       detail=detail)


# --------------------------------------------------------------------------
# gradients


def _central_fd(f: Callable[[np.ndarray], float], x: np.ndarray,
                step: float = 1e-6) -> np.ndarray:
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        out[i] = (f(x + e) - f(x - e)) / (2 * step)
    return out


def _rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    return float(np.linalg.norm(analytic - fd)
                 / max(np.linalg.norm(analytic), 1e-12))


def _inward(x: np.ndarray, B: float) -> np.ndarray:
    # Pull strictly inside the feasible set so +-1e-6 coordinate steps stay
    # legal for the domain-checked dispatch functions.
    D = x.shape[-1]
    center = np.full(D, B / (2.0 * D))
    return 0.98 * x + 0.02 * center


def gradients_suite(master_seed: int) -> SuiteReport:
    gen = np.random.default_rng(master_seed)
    rng = RngStreams(master_seed % 2 ** 64, 0)
    params = make_dispatch_params(rng)
    checks: list[CheckResult] = []
    bound = 1e-5

    worst_loss = worst_cons = worst_chain = 0.0
    for trial in range(100):
        t = int(gen.integers(1, 501))
        round_ = dispatch_generate_round(params, rng, t)
        x = _inward(sample_feasible(gen, params.dim_D, params.cap_B),
                    params.cap_B)

        analytic = dispatch_loss_gradient(x, round_, params)
        fd = _central_fd(lambda v: dispatch_loss(v, round_, params), x)
        worst_loss = max(worst_loss, _rel_err(analytic, fd))

        grads = dispatch_constraint_gradients(x, round_, params)
        j = trial % params.num_R
        fd_j = _central_fd(
            lambda v: float(dispatch_constraints(v, round_, params)[j]), x)
        worst_cons = max(worst_cons, _rel_err(grads[j], fd_j))

        p = 1.0 if trial % 2 == 0 else 2.0
        h = PenaltyTransform(p)
        g_val = float(dispatch_constraints(x, round_, params)[j])
        if abs(g_val) < 1e-3:
            continue
        chain = penalty_chain_gradient(h, g_val, grads[j])
        fd_chain = _central_fd(
            lambda v: float(penalty_apply(
                h, dispatch_constraints(v, round_, params)[j])), x)
        denom = max(np.linalg.norm(chain), np.linalg.norm(fd_chain), 1e-9)
        worst_chain = max(worst_chain,
                          float(np.linalg.norm(chain - fd_chain) / denom))

    checks.append(_check("dispatch-loss-gradient-fd", bound - worst_loss))
    checks.append(_check("dispatch-constraint-gradient-fd",
                         bound - worst_cons))
    checks.append(_check("penalty-chain-gradient-fd", bound - worst_chain))

    tparams = TrackingParams(
        system_A=0.4 * gen.normal(size=(3, 3)),
        input_B_mat=gen.normal(size=(3, 2)),
        smoothness_beta=0.7, energy_cap=5.0,
        box_lower=-np.ones(2), box_upper=np.ones(2))
    worst_track = 0.0
    for _ in range(100):
        u = gen.uniform(-1.0, 1.0, size=2)
        state_x = gen.normal(size=3)
        target = gen.normal(size=3)
        analytic = tracking_loss_gradient(u, state_x, target, tparams)
        fd = _central_fd(
            lambda v: tracking_loss(v, state_x, target, tparams), u)
        worst_track = max(worst_track, _rel_err(analytic, fd))
    checks.append(_check("tracking-loss-gradient-fd", bound - worst_track))

    return SuiteReport("gradients", tuple(checks))


# --------------------------------------------------------------------------
# lemma1


def lemma1_suite(master_seed: int, horizon_T: int = 500) -> SuiteReport:
    checks: list[CheckResult] = []
    rng = RngStreams(master_seed % 2 ** 64, 0)
    params = make_dispatch_params(rng)
    gamma = 0.1 / math.sqrt(horizon_T)
    alpha = 15.0 * gamma

    for kind in ("euclidean", "entropy"):
        reg = euclidean(params.dim_D, params.cap_B) if kind == "euclidean" \
            else smoothed_entropy(params.dim_D, params.cap_B)
        for p in (1.0, 2.0):
            h = PenaltyTransform(p)
            gcfg = GomspConfig(gamma=gamma, alpha=alpha, regularizer=reg,
                               penalty=h, num_constraints=params.num_R)
            state = init_state(gcfg)
            hcfit = np.zeros(params.num_R)
            closed = np.zeros(params.num_R)
            decay = 1.0 - alpha * gamma
            dual_sum = 0.0
            min_margin = math.inf
            worst_recon = 0.0
            for t in range(1, horizon_T + 1):
                round_ = dispatch_generate_round(params, rng, t)
                x = state.primal_X
                g = dispatch_constraints(x, round_, params)
                fb = FirstOrderFeedback(
                    noisy_loss_grad=dispatch_loss_gradient(
                        x, round_, params, use_observed=True),
                    constraint_values=g,
                    constraint_grads=dispatch_constraint_gradients(
                        x, round_, params))
                dual_sum += float(np.linalg.norm(state.dual_Lambda))
                state = gomsp_step(state, fb, gcfg)
                h_vals = penalty_apply(h, g)
                hcfit += h_vals
                closed = decay * closed + gamma * h_vals
                rhs = (float(np.linalg.norm(state.dual_Lambda)) / gamma
                       + alpha * dual_sum)
                min_margin = min(min_margin, rhs - float(hcfit.max()))
                worst_recon = max(worst_recon, float(
                    np.abs(state.dual_Lambda - closed).max()))
            tag = f"{kind}-p{p:g}"
            checks.append(_check(f"fit-dual-bound-{tag}", min_margin,
                                 tol=1e-12,
                                 detail=f"min slot margin over T={horizon_T}"))
            checks.append(_check(f"dual-closed-form-{tag}",
                                 1e-10 - worst_recon))
    return SuiteReport("lemma1", tuple(checks))


# --------------------------------------------------------------------------
# sublinearity


def sublinearity_suite(master_seed: int, T_values: Sequence[int],
                       num_seeds: int,
                       regularizer: str = "entropy",
                       penalty_power_p: float = 1.0) -> SuiteReport:
    T_values = sorted(T_values)
    if len(T_values) < 2:
        raise InvalidInputError("need at least two horizons to fit a slope")
    warmup = 40
    max_T = T_values[-1]
    hcfit_final = {T: [] for T in T_values}
    regret_final = {T: [] for T in T_values}

    for s in range(num_seeds):
        cfg_max = ExperimentConfig(
            algorithm="gomsp", regularizer=regularizer,
            penalty_power_p=penalty_power_p, horizon_T=max_T,
            warmup_slots=warmup, num_samples=1,
            master_seed=(master_seed + s) % 2 ** 64)
        params = cfg_max.make_params()
        table = benchmark_table(params, cfg_max.rng_for_sample(0),
                                range(warmup + 1, warmup + max_T + 1),
                                cfg_max.benchmark_tol)
        for T in T_values:
            cfg = replace(cfg_max, horizon_T=T, gamma=None, alpha=None)
            result = run_experiment(
                cfg, optima=(table[0][:T], table[1][:T]))
            hcfit_final[T].append(float(result.series["hcfit_mean"][0, -1]))
            regret_final[T].append(float(result.series["regret_cum"][0, -1]))

    checks = [
        _exponent_check("hcfit-growth-exponent", T_values, hcfit_final, 0.80),
        _exponent_check("regret-growth-exponent", T_values, regret_final,
                        0.75),
    ]
    return SuiteReport("sublinearity", tuple(checks))


def _exponent_check(name: str, T_values: Sequence[int],
                    finals: dict[int, list[float]],
                    bound: float) -> CheckResult:
    means = np.array([np.mean(finals[T]) for T in T_values])
    if np.any(means <= 0):
        return CheckResult(name=name, margin=bound, passed=True,
                           detail="non-positive means; growth trivially "
                                  "sublinear")
    slope = float(np.polyfit(np.log(np.asarray(T_values, dtype=float)),
                             np.log(means), 1)[0])
    detail = "means " + ", ".join(
        f"T={T}:{np.mean(finals[T]):.4g}" for T in T_values)
    return CheckResult(name=name, margin=bound - slope,
                       passed=slope <= bound,
                       detail=f"fitted exponent {slope:.4f}; {detail}")
