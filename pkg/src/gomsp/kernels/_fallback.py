"""Pure-numpy implementation of the hot solver kernel.

Mirrors `_native.pyx` operation for operation; used when the compiled
extension is unavailable or when GOMSP_PURE_PYTHON=1 is set.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "fallback"

STATUS_CONVERGED = 0
STATUS_STAGNATED = 1
STATUS_ITER_CAP = 2

_ARMIJO = 1e-4
_ETA_MIN = 1e-22
_ETA_MAX = 1e12
_STALL_LIMIT = 256


def _project(y: np.ndarray, B: float) -> np.ndarray:
    x = np.maximum(y, 0.0)
    if x.sum() <= B:
        return x
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - B
    j = np.arange(1, y.shape[0] + 1)
    k = max(int(np.count_nonzero(u - css / j > 0.0)), 1)
    theta = css[k - 1] / k
    return np.maximum(y - theta, 0.0)


def _objective(x, quad_a, lin_b, xi, demand_d, curv_C, slope_E, emax,
               dual_w, rho):
    s = x.sum()
    val = float(np.dot(quad_a, x * x) + np.dot(lin_b, x)
                + xi * (s - demand_d) ** 2)
    g = curv_C @ (x * x) + slope_E @ x - emax
    if dual_w is not None:
        val += float(np.dot(dual_w, g))
    if rho > 0.0:
        gp = np.maximum(g, 0.0)
        val += rho * float(np.dot(gp, gp))
    return val, g


def _gradient(x, quad_a, lin_b, xi, demand_d, curv_C, slope_E, emax,
              dual_w, rho, g):
    grad = 2.0 * quad_a * x + lin_b + 2.0 * xi * (x.sum() - demand_d)
    coef = np.zeros_like(g)
    if dual_w is not None:
        coef += dual_w
    if rho > 0.0:
        coef += 2.0 * rho * np.maximum(g, 0.0)
    if np.any(coef != 0.0):
        grad = grad + (2.0 * x) * (coef @ curv_C) + coef @ slope_E
    return grad


def solve_dispatch_objective(quad_a, lin_b, xi, demand_d, curv_C, slope_E,
                             emax, dual_w, rho, cap_B, x0, tol, max_iter):
    """Projected gradient with backtracking on the dispatch composite objective.

    Minimizes  sum_i(a_i x_i^2 + b_i x_i) + xi (sum x - d)^2
             + sum_j w_j g_j(x) + rho sum_j [g_j(x)]_+^2   over the capped
    simplex, where g_j(x) = sum_i (C_ji x_i^2 + E_ji x_i) - emax_j.

    The trial step is the spectral (Barzilai-Borwein) length s.s/s.y,
    halved until the Armijo test passes; the penalty term makes the
    objective arbitrarily stiff as rho grows and a fixed-growth step would
    crawl at 1/L.

    Returns (x, gradient_evaluations, status) with status 0 when the
    unit-step projected-gradient norm reached tol, 1 when no further float64
    progress is possible (backtracking found no acceptable step, or the
    objective value stopped decreasing measurably for 256 consecutive
    iterations, meaning line-search decisions are below the value-resolution
    floor), 2 at the iteration cap.  For statuses 1 and 2 the returned point
    is the iterate with the smallest projected-gradient norm seen.
    """
    quad_a = np.ascontiguousarray(quad_a, dtype=np.float64)
    lin_b = np.ascontiguousarray(lin_b, dtype=np.float64)
    curv_C = np.ascontiguousarray(curv_C, dtype=np.float64)
    slope_E = np.ascontiguousarray(slope_E, dtype=np.float64)
    emax = np.ascontiguousarray(emax, dtype=np.float64)
    dual_w = None if dual_w is None else np.ascontiguousarray(dual_w, np.float64)

    x = _project(np.ascontiguousarray(x0, dtype=np.float64), cap_B)
    fx, g = _objective(x, quad_a, lin_b, xi, demand_d, curv_C, slope_E,
                       emax, dual_w, rho)
    eta = 1.0
    best_x, best_res = x, np.inf
    f_mark, stall = fx, 0
    eps = float(np.finfo(np.float64).eps)
    prev_x = prev_grad = None
    for it in range(1, int(max_iter) + 1):
        grad = _gradient(x, quad_a, lin_b, xi, demand_d, curv_C, slope_E,
                         emax, dual_w, rho, g)
        pg = x - _project(x - grad, cap_B)
        res = float(np.sqrt(np.dot(pg, pg)))
        if res < best_res:
            best_x, best_res = x, res
        if res <= tol:
            return x, it, STATUS_CONVERGED
        # Stagnation when average decrease over the window is < 4 ulps/iter.
        if fx < f_mark - 4.0 * _STALL_LIMIT * eps * max(abs(f_mark), 1.0):
            f_mark, stall = fx, 0
        else:
            stall += 1
            if stall >= _STALL_LIMIT:
                return best_x, it, STATUS_STAGNATED
        eta_try = min(eta * 2.0, _ETA_MAX)
        if prev_x is not None:
            s = x - prev_x
            y = grad - prev_grad
            sy = float(np.dot(s, y))
            if sy > 0.0:
                eta_try = min(max(float(np.dot(s, s)) / sy, _ETA_MIN), _ETA_MAX)
        accepted = False
        while eta_try >= _ETA_MIN:
            xn = _project(x - eta_try * grad, cap_B)
            if not np.array_equal(xn, x):
                fn, gn = _objective(xn, quad_a, lin_b, xi, demand_d, curv_C,
                                    slope_E, emax, dual_w, rho)
                dec = float(np.dot(grad, xn - x))
                if fn <= fx + _ARMIJO * dec:
                    accepted = True
                    break
            eta_try *= 0.5
        if not accepted:
            return best_x, it, STATUS_STAGNATED
        prev_x, prev_grad = x, grad
        x, fx, g, eta = xn, fn, gn, eta_try
    return best_x, int(max_iter), STATUS_ITER_CAP
