"""The online mirror saddle-point state machine.

One slot of the method, given feedback at the current primal point X_t
(noisy loss gradient v_t, constraint values g_t(X_t), constraint gradients):

    score:  Y_{t+1} = Y_t - gamma * (v_t + sum_r Lambda_t^r * grad(h o g_t^r)(X_t))
    dual:   Lambda_{t+1} = [(1 - alpha*gamma) * Lambda_t + gamma * h(g_t(X_t))]_+
    primal: X_{t+1} = Phi(Y_{t+1})

with h(u) = [u]_+^p the penalty transform and Phi the mirror map of the
configured regularizer. Both the score and the dual update consume the same
feedback evaluated at the OLD primal iterate; in particular the dual uses
g_t(X_t), never X_{t+1}. The dual decay factor (1 - alpha*gamma) forgets old
constraint states geometrically.

States are values; a step is a pure transition, so concurrent trajectories
need no locking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .geometry import Regularizer, mirror_map

_DUAL_CLIP_SLACK = 1e-12


@dataclass(frozen=True)
class PenaltyTransform:
    """h(u) = [u]_+^p with p >= 1.

    Nonnegative and monotonically increasing; p = 1 is the plain clipped
    violation, p > 1 penalizes large violations progressively harder.
    """

    power_p: float = 1.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.power_p) or self.power_p < 1.0:
            raise InvalidInputError("penalty power p must satisfy p >= 1")


@dataclass(frozen=True)
class GomspConfig:
    """Step sizes and structure for one trajectory.

    gamma > 0 is the learning rate, alpha >= 0 the dual regularization
    constant; alpha * gamma must stay below 1 so the dual decay factor
    remains positive. num_constraints is the number R of inequality
    constraints.
    """

    gamma: float
    alpha: float
    regularizer: Regularizer
    penalty: PenaltyTransform
    num_constraints: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise InvalidInputError("gamma must be positive")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidInputError("alpha must be nonnegative")
        if self.alpha * self.gamma >= 1.0:
            raise InvalidInputError("alpha * gamma must be < 1")
        if self.num_constraints < 0:
            raise InvalidInputError("num_constraints must be >= 0")


@dataclass(frozen=True)
class GomspState:
    """Algorithm state: score Y_t, its mirror image X_t, dual Lambda_t."""

    score_Y: np.ndarray
    primal_X: np.ndarray
    dual_Lambda: np.ndarray
    slot_t: int

    def __post_init__(self) -> None:
        if np.any(self.dual_Lambda < 0):
            raise InvalidInputError("dual variable must be componentwise >= 0")
        if self.slot_t < 0:
            raise InvalidInputError("slot index must be nonnegative")


@dataclass(frozen=True)
class FirstOrderFeedback:
    """One slot's feedback, all evaluated at the acting primal point.

    noisy_loss_grad : (D,) observed loss gradient v_t
    constraint_values : (R,) g_t(X_t)
    constraint_grads : (R, D) rows grad g_t^r(X_t)
    """

    noisy_loss_grad: np.ndarray
    constraint_values: np.ndarray
    constraint_grads: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.noisy_loss_grad, dtype=np.float64)
        g = np.asarray(self.constraint_values, dtype=np.float64)
        grads = np.asarray(self.constraint_grads, dtype=np.float64)
        if grads.ndim != 2 or v.ndim != 1 or g.ndim != 1:
            raise InvalidInputError("feedback arrays have wrong rank")
        if grads.shape != (g.shape[0], v.shape[0]):
            raise InvalidInputError(
                f"feedback shapes inconsistent: v {v.shape}, g {g.shape}, "
                f"grads {grads.shape}"
            )
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(g))
                and np.all(np.isfinite(grads))):
            raise InvalidInputError("feedback must be finite")
        object.__setattr__(self, "noisy_loss_grad", v)
        object.__setattr__(self, "constraint_values", g)
        object.__setattr__(self, "constraint_grads", grads)


def init_state(cfg: GomspConfig, score_Y: np.ndarray | None = None) -> GomspState:
    """Fresh state: zero score by default, primal at its mirror image, zero dual."""
    D = cfg.regularizer.dimension
    y = np.zeros(D) if score_Y is None else np.asarray(score_Y, dtype=np.float64)
    if y.shape != (D,):
        raise InvalidInputError("initial score has wrong dimension")
    return GomspState(
        score_Y=y,
        primal_X=mirror_map(y, cfg.regularizer),
        dual_Lambda=np.zeros(cfg.num_constraints),
        slot_t=1,
    )


def penalty_apply(h: PenaltyTransform, u) -> np.ndarray:
    """h(u) = max(u, 0)^p, elementwise."""
    u = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(u)):
        raise InvalidInputError("penalty argument must be finite")
    clipped = np.maximum(u, 0.0)
    if h.power_p == 1.0:
        return clipped
    return clipped ** h.power_p


def penalty_deriv_factor(h: PenaltyTransform, g_value) -> np.ndarray:
    """Scalar factor p * [g]_+^(p-1) of the chain rule, elementwise.

    Zero when g < 0 (inactive constraint). At g = 0 with p = 1 the active
    branch is taken (0^0 = 1), so the factor is 1 there.
    """
    g = np.asarray(g_value, dtype=np.float64)
    if not np.all(np.isfinite(g)):
        raise InvalidInputError("constraint value must be finite")
    p = h.power_p
    if p == 1.0:
        return np.where(g >= 0.0, 1.0, 0.0)
    return np.where(g >= 0.0, p * np.maximum(g, 0.0) ** (p - 1.0), 0.0)


def penalty_chain_gradient(h: PenaltyTransform, g_value: float,
                           g_grad: np.ndarray) -> np.ndarray:
    """grad of h(g(.)) at a point where g = g_value and grad g = g_grad."""
    g_grad = np.asarray(g_grad, dtype=np.float64)
    if not np.all(np.isfinite(g_grad)):
        raise InvalidInputError("constraint gradient must be finite")
    factor = penalty_deriv_factor(h, g_value)
    return factor * g_grad


def score_update(state: GomspState, fb: FirstOrderFeedback,
                 cfg: GomspConfig) -> np.ndarray:
    """Y_{t+1} = Y_t - gamma (v_t + sum_r Lambda^r grad(h o g^r))."""
    if fb.noisy_loss_grad.shape != state.score_Y.shape:
        raise InvalidInputError("feedback dimension does not match score")
    if fb.constraint_values.shape != state.dual_Lambda.shape:
        raise InvalidInputError("feedback constraint count does not match dual")
    factors = penalty_deriv_factor(cfg.penalty, fb.constraint_values)
    weights = state.dual_Lambda * factors
    drift = fb.noisy_loss_grad + fb.constraint_grads.T @ weights
    return state.score_Y - cfg.gamma * drift


def dual_update(state: GomspState, h_values: np.ndarray,
                cfg: GomspConfig) -> np.ndarray:
    """Lambda_{t+1} = [(1 - alpha gamma) Lambda_t + gamma h(g_t(X_t))]_+."""
    h_values = np.asarray(h_values, dtype=np.float64)
    if h_values.shape != state.dual_Lambda.shape:
        raise InvalidInputError("h_values shape does not match dual")
    if np.any(h_values < 0) or not np.all(np.isfinite(h_values)):
        raise InvalidInputError("h_values must be finite and >= 0")
    decayed = (1.0 - cfg.alpha * cfg.gamma) * state.dual_Lambda
    new = decayed + cfg.gamma * h_values
    # With h >= 0 and alpha*gamma < 1 the clip can only absorb rounding noise.
    assert np.all(new >= -_DUAL_CLIP_SLACK)
    return np.maximum(new, 0.0)


def gomsp_step(state: GomspState, fb: FirstOrderFeedback,
               cfg: GomspConfig) -> GomspState:
    """One full slot: score and dual from the old state, then the mirror image."""
    y_next = score_update(state, fb, cfg)
    h_values = penalty_apply(cfg.penalty, fb.constraint_values)
    lam_next = dual_update(state, h_values, cfg)
    return GomspState(
        score_Y=y_next,
        primal_X=mirror_map(y_next, cfg.regularizer),
        dual_Lambda=lam_next,
        slot_t=state.slot_t + 1,
    )


def validate_step_condition(cfg: GomspConfig, C1: float, K: float) -> bool:
    """True iff alpha - gamma (alpha^2 - C1^2 / K) >= 0.

    C1 is an estimate of the constraint-penalty gradient bound (see
    problems.estimate_constants); K the strong-convexity constant of the
    regularizer. The step-size scales the dual-variable terms of the
    guarantee; violating it voids the accompanying analysis but not the
    algorithm itself.
    """
    if not np.isfinite(C1) or C1 < 0:
        raise InvalidInputError("C1 must be finite and >= 0")
    if not np.isfinite(K) or K <= 0:
        raise InvalidInputError("K must be positive")
    return bool(cfg.alpha - cfg.gamma * (cfg.alpha ** 2 - C1 ** 2 / K) >= 0.0)


class DualBoundTracker:
    """Running check of the dual-dynamic bound on cumulative violations.

    Along a trajectory started from Lambda_1 = 0, the cumulative transformed
    violation of each constraint is bounded through the dual trajectory:

        sum_{tau<=t} h(g_tau^r(X_tau))
            <= ||Lambda_{t+1}||_2 / gamma + alpha * sum_{tau<=t} ||Lambda_tau||_2.

    Feed this tracker once per slot with the h-values consumed by the dual
    update and the dual vectors before/after; `margin` is the bound minus
    the largest left-hand side, which must stay >= 0 (up to rounding).
    """

    def __init__(self, cfg: GomspConfig):
        self._gamma = cfg.gamma
        self._alpha = cfg.alpha
        self._hcfit = np.zeros(cfg.num_constraints)
        self._dual_norm_sum = 0.0
        self.margins: list[float] = []

    def observe(self, dual_before: np.ndarray, h_values: np.ndarray,
                dual_after: np.ndarray) -> float:
        self._hcfit += np.asarray(h_values, dtype=np.float64)
        self._dual_norm_sum += float(np.linalg.norm(dual_before))
        bound = (float(np.linalg.norm(dual_after)) / self._gamma
                 + self._alpha * self._dual_norm_sum)
        worst = float(self._hcfit.max()) if self._hcfit.size else 0.0
        margin = bound - worst
        self.margins.append(margin)
        return margin

    @property
    def min_margin(self) -> float:
        return min(self.margins) if self.margins else float("inf")
