"""Time-varying problem generators and empirical constant estimation.

The economic-dispatch environment: D generators each with quadratic cost
a_t^i x^2 + b_t^i x, a quadratic demand-tracking penalty xi (sum x - d_t)^2,
and R quadratic resource constraints

    g_t^j(x) = sum_i (c_{ji} x_i^2 + e_{ji} x_i) - Emax_t^j <= 0.

Per slot t the environment evaluates sinusoidal baselines plus fresh uniform
perturbations:

    a_t = 0.5 sin(pi t / 50)  + 5   + U[0, 0.5]
    b_t = 0.5 sin(pi t / 100) + 6   + U[0, 0.2]
    d_t = 0.1 cos(pi t / 125) + 0.7 + U[0, 0.2]
    Emax_t = 0.05 cos(pi t / 50) + 0.2 + U[0, 1]

The learner observes coefficients corrupted by Gaussian noise
(a_hat = a + N(0, sigma_a^2), b_hat = b + N(0, sigma_b^2), componentwise);
the scoreboard always uses the true coefficients. By default the uniform
perturbations are single scalars shared across coordinates (resp. across
constraints), exactly as the closed-form expressions read; switches on
DispatchParams enable per-coordinate / per-constraint draws.

A trajectory-tracking loss (drive a linear system's state toward a target
path) is provided as a loss value/gradient pair for gradient verification
and constant estimation; it has no round generator here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import PenaltyTransform, penalty_deriv_factor
from .errors import DomainError, InvalidInputError
from .geometry import Regularizer, dual_norm, in_feasible_set
from .rng import RngStreams


@dataclass(frozen=True)
class DispatchParams:
    """Static description of one dispatch economy.

    The curvature/slope matrices are (R, D) and nonnegative, which keeps
    every constraint convex; they are drawn once per experiment and never
    change across slots.
    """

    dim_D: int
    num_R: int
    cap_B: float
    demand_penalty_xi: float
    sigma_a: float
    sigma_b: float
    curvature: np.ndarray
    slope: np.ndarray
    per_coordinate_noise: bool = False
    per_constraint_thresholds: bool = False

    def __post_init__(self) -> None:
        if self.dim_D < 1 or self.num_R < 1:
            raise InvalidInputError("dim_D and num_R must be >= 1")
        if self.cap_B <= 0:
            raise InvalidInputError("cap_B must be positive")
        if self.sigma_a < 0 or self.sigma_b < 0:
            raise InvalidInputError("noise std devs must be >= 0")
        curvature = np.asarray(self.curvature, dtype=np.float64)
        slope = np.asarray(self.slope, dtype=np.float64)
        shape = (self.num_R, self.dim_D)
        if curvature.shape != shape or slope.shape != shape:
            raise InvalidInputError(f"constraint matrices must have shape {shape}")
        if np.any(curvature < 0) or np.any(slope < 0):
            raise InvalidInputError("constraint matrices must be nonnegative")
        object.__setattr__(self, "curvature", curvature)
        object.__setattr__(self, "slope", slope)


def make_dispatch_params(rng: RngStreams, dim_D: int = 20, num_R: int = 10,
                         cap_B: float = 1.0, demand_penalty_xi: float = 20.0,
                         sigma_a: float = 0.2, sigma_b: float = 1.0,
                         per_coordinate_noise: bool = False,
                         per_constraint_thresholds: bool = False,
                         ) -> DispatchParams:
    """Draw the constraint matrices (entries U[0,1]) and assemble the params."""
    gen = rng.generator("constraint-draw")
    curvature = gen.uniform(0.0, 1.0, size=(num_R, dim_D))
    slope = gen.uniform(0.0, 1.0, size=(num_R, dim_D))
    return DispatchParams(
        dim_D=dim_D, num_R=num_R, cap_B=cap_B,
        demand_penalty_xi=demand_penalty_xi,
        sigma_a=sigma_a, sigma_b=sigma_b,
        curvature=curvature, slope=slope,
        per_coordinate_noise=per_coordinate_noise,
        per_constraint_thresholds=per_constraint_thresholds,
    )


@dataclass(frozen=True)
class RoundRealization:
    """One slot's environment draw: true and observed cost coefficients,
    demand level, and constraint thresholds."""

    slot_t: int
    true_a: np.ndarray
    true_b: np.ndarray
    observed_a: np.ndarray
    observed_b: np.ndarray
    demand_d: float
    thresholds_Emax: np.ndarray

    def __post_init__(self) -> None:
        if np.any(np.asarray(self.true_a) <= 0):
            raise InvalidInputError("true_a must be strictly positive")
        if not np.all(np.isfinite(self.thresholds_Emax)):
            raise InvalidInputError("thresholds must be finite")


def _dispatch_true_parts(params: DispatchParams, rng: RngStreams, t: int):
    gen_coef = rng.generator("coefficient-noise", t)
    size_d = params.dim_D if params.per_coordinate_noise else None
    a_tilde = gen_coef.uniform(0.0, 0.5, size=size_d)
    b_tilde = gen_coef.uniform(0.0, 0.2, size=size_d)
    gen_dem = rng.generator("demand", t)
    d_tilde = float(gen_dem.uniform(0.0, 0.2))
    gen_thr = rng.generator("thresholds", t)
    size_r = params.num_R if params.per_constraint_thresholds else None
    e_tilde = gen_thr.uniform(0.0, 1.0, size=size_r)

    ones_d = np.ones(params.dim_D)
    true_a = (0.5 * math.sin(math.pi * t / 50.0) + 5.0) * ones_d + a_tilde
    true_b = (0.5 * math.sin(math.pi * t / 100.0) + 6.0) * ones_d + b_tilde
    demand = 0.1 * math.cos(math.pi * t / 125.0) + 0.7 + d_tilde
    emax = (0.05 * math.cos(math.pi * t / 50.0) + 0.2) * np.ones(params.num_R) \
        + e_tilde
    return true_a, true_b, demand, emax


def _dispatch_observe(params: DispatchParams, rng: RngStreams, t: int,
                      true_a: np.ndarray, true_b: np.ndarray):
    gen_obs = rng.generator("observation-noise", t)
    observed_a = true_a + gen_obs.normal(0.0, params.sigma_a, size=params.dim_D)
    observed_b = true_b + gen_obs.normal(0.0, params.sigma_b, size=params.dim_D)
    return observed_a, observed_b


def dispatch_generate_round(params: DispatchParams, rng: RngStreams,
                            t: int) -> RoundRealization:
    """Environment draw for slot t >= 1; pure in (params, rng address, t)."""
    if t < 1:
        raise InvalidInputError("slot index t must be >= 1")
    true_a, true_b, demand, emax = _dispatch_true_parts(params, rng, t)
    observed_a, observed_b = _dispatch_observe(params, rng, t, true_a, true_b)
    return RoundRealization(
        slot_t=t, true_a=true_a, true_b=true_b,
        observed_a=observed_a, observed_b=observed_b,
        demand_d=demand, thresholds_Emax=emax,
    )


def _check_point(x: np.ndarray, params: DispatchParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.dim_D,):
        raise InvalidInputError("x has wrong dimension")
    if not in_feasible_set(x, params.cap_B):
        raise DomainError("x lies outside the feasible set")
    return x


def dispatch_loss(x: np.ndarray, round_: RoundRealization,
                  params: DispatchParams, use_observed: bool = False) -> float:
    """sum_i (a_i x_i^2 + b_i x_i) + xi (sum x - d)^2.

    True coefficients by default; `use_observed` switches to the noisy pair
    the learner sees (needed by the dual-gradient baseline's inner problem).
    """
    x = _check_point(x, params)
    a = round_.observed_a if use_observed else round_.true_a
    b = round_.observed_b if use_observed else round_.true_b
    s = float(x.sum())
    return float(np.dot(a, x * x) + np.dot(b, x)
                 + params.demand_penalty_xi * (s - round_.demand_d) ** 2)


def dispatch_loss_gradient(x: np.ndarray, round_: RoundRealization,
                           params: DispatchParams,
                           use_observed: bool = False) -> np.ndarray:
    """Component i: 2 a_i x_i + b_i + 2 xi (sum x - d)."""
    x = _check_point(x, params)
    a = round_.observed_a if use_observed else round_.true_a
    b = round_.observed_b if use_observed else round_.true_b
    s = float(x.sum())
    return (2.0 * a * x + b
            + 2.0 * params.demand_penalty_xi * (s - round_.demand_d))


def dispatch_constraints(x: np.ndarray, round_: RoundRealization,
                         params: DispatchParams) -> np.ndarray:
    """Component j: sum_i (c_ji x_i^2 + e_ji x_i) - Emax_j."""
    x = _check_point(x, params)
    return (params.curvature @ (x * x) + params.slope @ x
            - round_.thresholds_Emax)


def dispatch_constraint_gradients(x: np.ndarray, round_: RoundRealization,
                                  params: DispatchParams) -> np.ndarray:
    """Entry (j, i): 2 c_ji x_i + e_ji."""
    x = _check_point(x, params)
    return 2.0 * params.curvature * x[None, :] + params.slope


@dataclass(frozen=True)
class TrackingParams:
    """Linear system x' = A x + B u tracked against a target path.

    The loss trades squared tracking error against a smoothness term
    weighted by beta; u is constrained by an energy cap and a box (the box
    is part of this problem description, not of the mirror geometry).
    """

    system_A: np.ndarray
    input_B_mat: np.ndarray
    smoothness_beta: float
    energy_cap: float
    box_lower: np.ndarray
    box_upper: np.ndarray
    target_path: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self) -> None:
        A = np.asarray(self.system_A, dtype=np.float64)
        Bm = np.asarray(self.input_B_mat, dtype=np.float64)
        lo = np.asarray(self.box_lower, dtype=np.float64)
        hi = np.asarray(self.box_upper, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidInputError("system_A must be square")
        if Bm.ndim != 2 or Bm.shape[0] != A.shape[0]:
            raise InvalidInputError("input_B_mat rows must match system_A")
        if lo.shape != hi.shape or lo.shape != (Bm.shape[1],):
            raise InvalidInputError("box bounds must match the input dimension")
        if np.any(lo > hi):
            raise InvalidInputError("box_lower must be <= box_upper")
        if self.smoothness_beta < 0:
            raise InvalidInputError("smoothness_beta must be >= 0")
        object.__setattr__(self, "system_A", A)
        object.__setattr__(self, "input_B_mat", Bm)
        object.__setattr__(self, "box_lower", lo)
        object.__setattr__(self, "box_upper", hi)


def tracking_loss(u: np.ndarray, state_x: np.ndarray, target_next: np.ndarray,
                  params: TrackingParams) -> float:
    """||A x + B u - y'||^2 + (beta/2) ||(A - I) x + B u||^2."""
    A, Bm, beta = params.system_A, params.input_B_mat, params.smoothness_beta
    u = np.asarray(u, dtype=np.float64)
    x = np.asarray(state_x, dtype=np.float64)
    y = np.asarray(target_next, dtype=np.float64)
    if u.shape != (Bm.shape[1],) or x.shape != (A.shape[0],) or y.shape != x.shape:
        raise InvalidInputError("tracking shapes inconsistent")
    track = A @ x + Bm @ u - y
    smooth = (A - np.eye(A.shape[0])) @ x + Bm @ u
    return float(track @ track + 0.5 * beta * smooth @ smooth)


def tracking_loss_gradient(u: np.ndarray, state_x: np.ndarray,
                           target_next: np.ndarray,
                           params: TrackingParams) -> np.ndarray:
    """2 B^T (A x - y') + (2 + beta) B^T B u + beta B^T (A - I) x."""
    A, Bm, beta = params.system_A, params.input_B_mat, params.smoothness_beta
    u = np.asarray(u, dtype=np.float64)
    x = np.asarray(state_x, dtype=np.float64)
    y = np.asarray(target_next, dtype=np.float64)
    if u.shape != (Bm.shape[1],) or x.shape != (A.shape[0],) or y.shape != x.shape:
        raise InvalidInputError("tracking shapes inconsistent")
    return (2.0 * Bm.T @ (A @ x - y)
            + (2.0 + beta) * (Bm.T @ (Bm @ u))
            + beta * (Bm.T @ ((A - np.eye(A.shape[0])) @ x)))


@dataclass(frozen=True)
class ConstantEstimates:
    """Monte-Carlo lower estimates of the guarantee constants.

    C1 bounds the dual-weighted penalty-gradient aggregate per unit dual
    norm; C2 and L_f both bound the loss gradient in the dual norm (one
    estimator, two conventional names); C3 bounds ||h(g(x))||_2. All are
    maxima over `sample_count` draws, hence lower estimates of the true
    suprema.
    """

    C1: float
    C2: float
    C3: float
    L_f: float
    sample_count: int


def sample_feasible(gen: np.random.Generator, dim: int, cap_B: float,
                    size: int | None = None) -> np.ndarray:
    """Uniform draws from the capped simplex {x >= 0, sum x <= B}.

    A Dirichlet(1) direction scaled by B * U^(1/D) is uniform on the set.
    """
    n = 1 if size is None else size
    w = gen.standard_exponential(size=(n, dim))
    w /= w.sum(axis=1, keepdims=True)
    scale = cap_B * gen.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dim)
    out = scale * w
    return out[0] if size is None else out


def estimate_constants(params: DispatchParams | TrackingParams,
                       reg: Regularizer, sample_count: int,
                       rng: RngStreams,
                       penalty: PenaltyTransform | None = None,
                       horizon_T: int = 500) -> ConstantEstimates:
    """Empirical maxima of the defining quantities over random slots/points.

    For the dispatch problem: draws (t, x, unit dual direction) tuples and
    maximizes the three defining ratios under the regularizer's dual norm.
    For the tracking problem only the loss-gradient constants are estimated
    (there is no penalty machinery attached to it here); C1 = C3 = 0.
    """
    if sample_count < 1:
        raise InvalidInputError("sample_count must be >= 1")
    penalty = penalty or PenaltyTransform(1.0)
    gen = rng.generator("constraint-draw", slot=1)

    if isinstance(params, TrackingParams):
        Bm = params.input_B_mat
        m, n = Bm.shape[1], Bm.shape[0]
        path = np.asarray(params.target_path, dtype=np.float64)
        span = float(np.abs(path).max()) if path.size else 1.0
        best = 0.0
        for _ in range(sample_count):
            u = gen.uniform(params.box_lower, params.box_upper)
            x = gen.uniform(-span, span, size=n)
            y = gen.uniform(-span, span, size=n)
            grad = tracking_loss_gradient(u, x, y, params)
            best = max(best, float(dual_norm(grad, reg)))
        return ConstantEstimates(0.0, best, 0.0, best, sample_count)

    c1 = c2 = c3 = 0.0
    for _ in range(sample_count):
        t = int(gen.integers(1, horizon_T + 1))
        round_ = dispatch_generate_round(
            params, RngStreams(int(gen.integers(0, 2 ** 63)), 0), t)
        x = sample_feasible(gen, params.dim_D, params.cap_B)
        lam = np.abs(gen.normal(size=params.num_R))
        norm = float(np.linalg.norm(lam))
        if norm > 0:
            lam /= norm
        g = dispatch_constraints(x, round_, params)
        grads = dispatch_constraint_gradients(x, round_, params)
        factors = penalty_deriv_factor(penalty, g)
        aggregate = grads.T @ (lam * factors)
        c1 = max(c1, float(dual_norm(aggregate, reg)))
        loss_grad = dispatch_loss_gradient(x, round_, params)
        c2 = max(c2, float(dual_norm(loss_grad, reg)))
        h_of_g = np.maximum(g, 0.0) ** penalty.power_p
        c3 = max(c3, float(np.linalg.norm(h_of_g)))
    return ConstantEstimates(c1, c2, c3, c2, sample_count)
