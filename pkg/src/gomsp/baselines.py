"""Comparison algorithms: stochastic dual gradient and a modified online
saddle-point method, plus the projected-gradient inner solver both rely on.

SDG re-solves, every slot, the instantaneous Lagrangian built from the
*observed* loss coefficients and the true constraints,

    X_{t+1} in argmin_{x in FS} fhat_t(x) + <Lambda_t, g_t(x)>,
    Lambda_{t+1} = [Lambda_t + gamma * g_t(X_t)]_+            (old X_t),

while MOSP takes a single projected gradient step on the same Lagrangian
and then a causal dual ascent step:

    x_{t+1} = Proj[x_t - gamma (vhat_t + Dg_t(x_t)^T lambda_t)],
    lambda_{t+1} = [lambda_t + gamma * g_t(x_{t+1})]_+.

The source the MOSP comparison is drawn from states the method but not its
update equations; the pair above reconstructs it from the cited algorithm's
structure (equal primal/dual step sizes, Euclidean projection). Comparisons
against it should be read with that in mind.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .errors import InvalidInputError, NumericalError
from .geometry import project_capped_simplex
from .kernels import STATUS_ITER_CAP, solve_dispatch_objective
from .problems import (DispatchParams, RoundRealization,
                       dispatch_constraint_gradients, dispatch_constraints,
                       dispatch_loss_gradient)

# Shared line-search constants; the compiled kernel uses the same values so
# the generic path and the dispatch fast path make identical decisions.
_ARMIJO = 1e-4
_ETA_MIN = 1e-22
_ETA_MAX = 1e12
_MAX_ITER = 100_000
_STALL_LIMIT = 256

ObjectiveOracle = Callable[[np.ndarray], Tuple[float, np.ndarray]]


def inner_solve_convex(objective_oracle: ObjectiveOracle, feasible_B: float,
                       dim: int, tol: float,
                       x0: np.ndarray | None = None) -> np.ndarray:
    """Minimize a smooth convex objective over {x >= 0, sum x <= B}.

    Projected gradient descent with halving backtracking (Armijo 1e-4).
    The trial step is the spectral (Barzilai-Borwein) length s.s/s.y once
    two iterates exist; on stiff objectives a fixed-growth trial step would
    force the iterate to crawl at the global 1/L rate.
    Terminates when the unit-step projected-gradient norm
    ||x - Proj(x - grad)|| drops to tol. Badly conditioned objectives can
    hit a floating-point floor above tol where no step size makes progress;
    the best iterate found is returned in that case (detected when either
    no step size is acceptable or the objective stops decreasing measurably
    for 256 consecutive iterations) rather than looping to the iteration
    cap. Hitting the cap itself raises NumericalError with the best iterate
    attached.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    if dim < 1:
        raise InvalidInputError("dim must be >= 1")
    start = np.zeros(dim) if x0 is None else np.asarray(x0, dtype=np.float64)
    x = project_capped_simplex(start, feasible_B)
    value, grad = objective_oracle(x)
    best_x, best_res = x, np.inf
    f_mark, stall = value, 0
    eps = float(np.finfo(np.float64).eps)
    eta = 1.0
    prev_x = prev_grad = None
    for _ in range(_MAX_ITER):
        residual = float(np.linalg.norm(x - project_capped_simplex(x - grad,
                                                                   feasible_B)))
        if residual < best_res:
            best_x, best_res = x, residual
        if residual <= tol:
            return x
        # Stagnation when average decrease over the window is < 4 ulps/iter.
        if value < f_mark - 4.0 * _STALL_LIMIT * eps * max(abs(f_mark), 1.0):
            f_mark, stall = value, 0
        else:
            stall += 1
            if stall >= _STALL_LIMIT:
                return best_x
        eta = min(eta * 2.0, _ETA_MAX)
        if prev_x is not None:
            s = x - prev_x
            y = grad - prev_grad
            sy = float(s @ y)
            if sy > 0.0:
                eta = min(max(float(s @ s) / sy, _ETA_MIN), _ETA_MAX)
        while True:
            trial = project_capped_simplex(x - eta * grad, feasible_B)
            step = trial - x
            if not step.any():
                # No step size moves the iterate in float64: stagnated.
                eta = 0.0
                break
            trial_value, trial_grad = objective_oracle(trial)
            if trial_value <= value + _ARMIJO * float(grad @ step):
                prev_x, prev_grad = x, grad
                x, value, grad = trial, trial_value, trial_grad
                break
            eta *= 0.5
            if eta < _ETA_MIN:
                break
        if eta < _ETA_MIN:
            return best_x
    raise NumericalError(
        f"projected gradient descent did not reach tol={tol:g} "
        f"(best residual {best_res:.3e})",
        best_iterate=best_x, iterations=_MAX_ITER)


@dataclass(frozen=True)
class SdgState:
    """Iterates of the dual-gradient baseline."""

    primal_X: np.ndarray
    dual_Lambda: np.ndarray
    slot_t: int

    def __post_init__(self) -> None:
        x = np.asarray(self.primal_X, dtype=np.float64)
        lam = np.asarray(self.dual_Lambda, dtype=np.float64)
        if np.any(lam < 0):
            raise InvalidInputError("dual_Lambda must be nonnegative")
        object.__setattr__(self, "primal_X", x)
        object.__setattr__(self, "dual_Lambda", lam)


@dataclass(frozen=True)
class MospState:
    """Iterates of the saddle-point baseline."""

    primal_X: np.ndarray
    dual_Lambda: np.ndarray
    slot_t: int

    def __post_init__(self) -> None:
        x = np.asarray(self.primal_X, dtype=np.float64)
        lam = np.asarray(self.dual_Lambda, dtype=np.float64)
        if np.any(lam < 0):
            raise InvalidInputError("dual_Lambda must be nonnegative")
        object.__setattr__(self, "primal_X", x)
        object.__setattr__(self, "dual_Lambda", lam)


def init_sdg_state(params: DispatchParams) -> SdgState:
    return SdgState(primal_X=np.zeros(params.dim_D),
                    dual_Lambda=np.zeros(params.num_R), slot_t=1)


def init_mosp_state(params: DispatchParams) -> MospState:
    return MospState(primal_X=np.zeros(params.dim_D),
                     dual_Lambda=np.zeros(params.num_R), slot_t=1)


def solve_dispatch_lagrangian(round_: RoundRealization, params: DispatchParams,
                              dual_w: np.ndarray, tol: float,
                              x0: np.ndarray | None = None,
                              use_observed: bool = True) -> np.ndarray:
    """argmin over the feasible set of f_t(x) + <w, g_t(x)>, compiled path."""
    a = round_.observed_a if use_observed else round_.true_a
    b = round_.observed_b if use_observed else round_.true_b
    if x0 is None:
        x0 = np.zeros(params.dim_D)
    x, _, status = solve_dispatch_objective(
        np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64),
        params.demand_penalty_xi, round_.demand_d,
        params.curvature, params.slope,
        np.asarray(round_.thresholds_Emax, dtype=np.float64),
        np.asarray(dual_w, dtype=np.float64), 0.0, params.cap_B,
        np.asarray(x0, dtype=np.float64), tol, _MAX_ITER)
    if status == STATUS_ITER_CAP:
        raise NumericalError(
            f"Lagrangian inner solve hit the {_MAX_ITER}-iteration cap",
            best_iterate=x, iterations=_MAX_ITER)
    return x


def sdg_step(state: SdgState, round_: RoundRealization,
             params: DispatchParams, gamma: float, tol: float) -> SdgState:
    """One slot of the dual-gradient baseline.

    The dual ascends along g_t at the slot's incumbent X_t, not at the fresh
    argmin; both updates therefore read the same primal.
    """
    if gamma <= 0:
        raise InvalidInputError("gamma must be positive")
    _check_round(state, round_, params)
    new_x = solve_dispatch_lagrangian(round_, params, state.dual_Lambda, tol,
                                      x0=state.primal_X)
    g_old = dispatch_constraints(state.primal_X, round_, params)
    new_dual = np.maximum(state.dual_Lambda + gamma * g_old, 0.0)
    return SdgState(primal_X=new_x, dual_Lambda=new_dual,
                    slot_t=state.slot_t + 1)


def mosp_step(state: MospState, round_: RoundRealization,
              params: DispatchParams, gamma: float) -> MospState:
    """One slot of the saddle-point baseline (single primal gradient step)."""
    if gamma <= 0:
        raise InvalidInputError("gamma must be positive")
    _check_round(state, round_, params)
    vhat = dispatch_loss_gradient(state.primal_X, round_, params,
                                  use_observed=True)
    grads = dispatch_constraint_gradients(state.primal_X, round_, params)
    direction = vhat + grads.T @ state.dual_Lambda
    new_x = project_capped_simplex(state.primal_X - gamma * direction,
                                   params.cap_B)
    g_new = dispatch_constraints(new_x, round_, params)
    new_dual = np.maximum(state.dual_Lambda + gamma * g_new, 0.0)
    return MospState(primal_X=new_x, dual_Lambda=new_dual,
                     slot_t=state.slot_t + 1)


def _check_round(state, round_: RoundRealization,
                 params: DispatchParams) -> None:
    if round_.true_a.shape != (params.dim_D,):
        raise InvalidInputError("round dimension does not match params")
    if state.primal_X.shape != (params.dim_D,):
        raise InvalidInputError("state dimension does not match params")
    if state.dual_Lambda.shape != (params.num_R,):
        raise InvalidInputError("dual dimension does not match params")
