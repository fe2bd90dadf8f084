"""Independent reference implementations used to cross-check the library.

Everything here is deliberately naive: dense grids, central differences, and
a straight-line transcription of the update recursions. The only package
import is the mirror map, which the geometry tests ground-truth against the
grid argmax before anything else leans on it.
"""

from __future__ import annotations

import numpy as np

from gomsp.geometry import mirror_map


def feasible_grid(B: float, dim: int, n: int) -> np.ndarray:
    """Points of an n-per-axis box grid lying in {x >= 0, sum x <= B}."""
    axes = [np.linspace(0.0, B, n)] * dim
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    pts = pts.reshape(-1, dim)
    return pts[pts.sum(axis=1) <= B + 1e-12]


def grid_minimize(objective, B: float, dim: int, stages: int = 3,
                  n: int = 161, feasible=None) -> np.ndarray:
    """Staged dense-grid minimizer over the capped simplex.

    `objective` maps an (N, dim) array to N values; the optional `feasible`
    mask callable maps (N, dim) to booleans and is applied on top of the
    simplex cap. Each stage re-grids a shrinking box around the incumbent
    (which always stays inside the next box), so the final argument error is
    about 2B/(n-1)**stages.
    """
    lo = np.zeros(dim)
    hi = np.full(dim, float(B))
    best = None
    for _ in range(stages):
        axes = [np.linspace(lo[i], hi[i], n) for i in range(dim)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        pts = pts.reshape(-1, dim)
        keep = pts.sum(axis=1) <= B + 1e-12
        if feasible is not None:
            keep &= feasible(pts)
        pts = pts[keep]
        vals = objective(pts)
        best = pts[int(np.argmin(vals))]
        span = (hi - lo) / (n - 1)
        lo = np.maximum(best - 2.0 * span, 0.0)
        hi = np.minimum(best + 2.0 * span, B)
    return best


def grid_maximize(objective, B: float, dim: int, **kw) -> np.ndarray:
    return grid_minimize(lambda pts: -objective(pts), B, dim, **kw)


def _quadratic_roots(a, b, c):
    """Real roots of a x^2 + b x + c per row; NaN where none exist."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    out = np.full((2,) + c.shape, np.nan)
    lin = np.abs(a) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        out[0] = np.where(lin & (np.abs(b) > 1e-300), -c / b, np.nan)
        disc = b * b - 4.0 * a * c
        ok = ~lin & (disc >= 0.0)
        root = np.sqrt(np.where(ok, disc, 0.0))
        out[0] = np.where(ok, (-b - root) / (2.0 * a), out[0])
        out[1] = np.where(ok, (-b + root) / (2.0 * a), np.nan)
    return out


def dispatch_reference_minimum(round_, params, n_curve: int = 50_001):
    """Constrained benchmark argmin by exhaustive candidate enumeration.

    A masked interior grid alone is biased near curved active constraints
    (feasible grid points sit up to a cell inside the boundary while the
    objective is nearly flat along it), so this walks the boundary itself:
    each constraint curve g_j = 0 is parameterized per axis with the other
    coordinate solved in closed form, and the simplex edges are added as
    1-D grids. D must be 1 or 2.
    """
    obj = dispatch_objective_vec(round_, params)
    feas = dispatch_feasible_vec(round_, params)
    B = params.cap_B
    dim = params.dim_D
    cands = [grid_minimize(obj, B, dim, feasible=feas)[None, :]]
    emax = np.asarray(round_.thresholds_Emax, dtype=np.float64)
    if dim == 1:
        pts = [np.array([0.0]), np.array([B])]
        for j in range(params.num_R):
            roots = _quadratic_roots(params.curvature[j, 0],
                                     params.slope[j, 0], -emax[j])
            pts.extend(roots[np.isfinite(roots)][:, None])
        cands.append(np.concatenate([p.reshape(1, 1) for p in pts]))
    else:
        s = np.linspace(0.0, B, n_curve)
        edges = [np.stack([s, np.zeros_like(s)], axis=1),
                 np.stack([np.zeros_like(s), s], axis=1),
                 np.stack([s, B - s], axis=1)]
        cands.extend(edges)
        for j in range(params.num_R):
            for free, other in ((0, 1), (1, 0)):
                rest = (params.curvature[j, other] * s * s
                        + params.slope[j, other] * s - emax[j])
                roots = _quadratic_roots(params.curvature[j, free],
                                         params.slope[j, free], rest)
                for r in roots:
                    pt = np.empty((n_curve, 2))
                    pt[:, other] = s
                    pt[:, free] = r
                    cands.append(pt[np.isfinite(r)])
    pts = np.concatenate([c for c in cands if len(c)], axis=0)
    keep = (np.all(pts >= -1e-12, axis=1)
            & (pts.sum(axis=1) <= B + 1e-12))
    pts = np.clip(pts[keep], 0.0, None)
    pts = pts[feas(pts)]
    return pts[int(np.argmin(obj(pts)))]


def fd_gradient(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar-valued function."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        out[i] = (f(x + e) - f(x - e)) / (2.0 * h)
    return out


def dispatch_objective_vec(round_, params):
    """Vectorized dispatch cost, re-derived from the printed formula."""
    a, b = round_.true_a, round_.true_b
    xi, d = params.demand_penalty_xi, round_.demand_d

    def f(pts):
        return pts ** 2 @ a + pts @ b + xi * (pts.sum(axis=1) - d) ** 2

    return f


def dispatch_feasible_vec(round_, params, tol: float = 1e-9):
    """Vectorized feasibility mask max_j g_j(x) <= tol."""
    C, E = params.curvature, params.slope
    emax = round_.thresholds_Emax

    def ok(pts):
        g = pts ** 2 @ C.T + pts @ E.T - emax
        return g.max(axis=1) <= tol

    return ok


def reference_gomsp_step(Y, X, Lam, vhat, g_vals, g_grads, gamma, alpha,
                         power_p, reg):
    """Straight-line transcription of the three update recursions.

    Returns (Y', X', Lam'). The dual uses g evaluated at the old X, the
    chain factor is p [g]_+^(p-1) with 0**0 == 1 (Python's convention), and
    the primal is the mirror image of the new score.
    """
    drift = np.array(vhat, dtype=np.float64, copy=True)
    for r in range(len(g_vals)):
        g = float(g_vals[r])
        if g >= 0.0:
            drift += Lam[r] * power_p * max(g, 0.0) ** (power_p - 1.0) \
                * g_grads[r]
    Y_new = Y - gamma * drift
    h_vals = np.maximum(g_vals, 0.0) ** power_p
    Lam_new = np.maximum((1.0 - alpha * gamma) * Lam + gamma * h_vals, 0.0)
    return Y_new, mirror_map(Y_new, reg), Lam_new
