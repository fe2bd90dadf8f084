"""Mirror geometry on the capped simplex.

The feasible set everywhere in this package is

    X = {x in R^D : x >= 0, sum_i x_i <= B},

and a *regularizer* psi on X induces the mirror map

    Phi(y) = argmax_{x in X} { <y, x> - psi(x) },

which generalizes Euclidean projection to non-Euclidean geometries. Two
regularizers are provided:

``euclidean``
    psi(x) = ||x||_2^2 / 2. Phi is the Euclidean projection onto X.
``entropy`` (smoothed entropy)
    psi_eps(x) = sum_i (x_i + eps) ln(x_i + eps). Phi has the closed form
    x_i(mu) = [exp(y_i - 1 - mu) - eps]_+ where mu >= 0 is the cap
    multiplier, zero when the cap is slack.

The Fenchel coupling F(p, y) = psi(p) + psi*(y) - <y, p> acts as the
primal-distance Lyapunov function of the method; its inequalities are
verified by the geometry verification suite.

All operations are pure and accept batched inputs (leading axes before the
coordinate axis D).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInputError, NumericalError

EUCLIDEAN = "euclidean"
SMOOTHED_ENTROPY = "entropy"

# Entropy smoothing range for which the closed-form constants below hold.
_ENTROPY_EPS_LO = float(np.exp(-1.0))
_ENTROPY_EPS_HI = 1.0

# Feasibility slack used by domain checks.
FEASIBILITY_TOL = 1e-9

# The map contract only needs |sum x - B| <= 1e-10, but the conjugate's
# finite-difference tests divide this residual by the step size; the extra
# two digits keep that quotient far below their tolerance.
_BISECT_TOL = 1e-12
_BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class Regularizer:
    """Description of the mirror geometry: which psi, on which set.

    Parameters
    ----------
    kind : str
        ``"euclidean"`` or ``"entropy"``.
    epsilon : float
        Entropy smoothing constant (ignored for the Euclidean kind).
        Values outside [1/e, 1] are allowed but emit a warning because the
        closed-form geometry constants are only guaranteed there.
    cap_B : float
        Simplex cap B > 0.
    dimension : int
        Ambient dimension D >= 1.
    """

    kind: str
    epsilon: float
    cap_B: float
    dimension: int

    def __post_init__(self) -> None:
        if self.kind not in (EUCLIDEAN, SMOOTHED_ENTROPY):
            raise InvalidInputError(f"unknown regularizer kind: {self.kind!r}")
        if not np.isfinite(self.cap_B) or self.cap_B <= 0:
            raise InvalidInputError("cap_B must be positive and finite")
        if self.dimension < 1:
            raise InvalidInputError("dimension must be >= 1")
        if self.kind == SMOOTHED_ENTROPY:
            if not np.isfinite(self.epsilon) or self.epsilon <= 0:
                raise InvalidInputError("epsilon must be positive and finite")
            if not (_ENTROPY_EPS_LO <= self.epsilon <= _ENTROPY_EPS_HI):
                warnings.warn(
                    "entropy smoothing epsilon outside [1/e, 1]; closed-form "
                    "geometry constants are not guaranteed in this range",
                    stacklevel=2,
                )


def euclidean(dimension: int, cap_B: float = 1.0) -> Regularizer:
    return Regularizer(EUCLIDEAN, epsilon=0.0, cap_B=cap_B, dimension=dimension)


def smoothed_entropy(dimension: int, cap_B: float = 1.0,
                     epsilon: float = 0.5) -> Regularizer:
    return Regularizer(SMOOTHED_ENTROPY, epsilon=epsilon, cap_B=cap_B,
                       dimension=dimension)


@dataclass(frozen=True)
class GeometryConstants:
    """Closed-form constants of a regularizer on X.

    strong_convexity_K
        modulus K in the method's step-size condition.
    steepness_L_psi
        sup over X of the dual norm of grad psi.
    diameter_term_D_psi
        range term D(X, psi) entering the fit/regret guarantees.
    set_diameter_D_X
        l2 diameter of X.
    """

    strong_convexity_K: float
    steepness_L_psi: float
    diameter_term_D_psi: float
    set_diameter_D_X: float

    def __post_init__(self) -> None:
        vals = (self.strong_convexity_K, self.steepness_L_psi,
                self.diameter_term_D_psi, self.set_diameter_D_X)
        if not all(np.isfinite(v) and v >= 0 for v in vals):
            raise InvalidInputError("geometry constants must be finite and >= 0")
        if self.strong_convexity_K <= 0:
            raise InvalidInputError("strong_convexity_K must be positive")


def _check_finite(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    return arr


def in_feasible_set(x: np.ndarray, cap_B: float,
                    tol: float = FEASIBILITY_TOL) -> bool:
    x = np.asarray(x, dtype=np.float64)
    return bool(np.all(x >= -tol) and np.all(x.sum(axis=-1) <= cap_B + tol))


def _check_domain(x: np.ndarray, cap_B: float, name: str) -> np.ndarray:
    x = _check_finite(x, name)
    if not in_feasible_set(x, cap_B):
        raise DomainError(f"{name} lies outside the feasible set (B={cap_B})")
    return x


def project_capped_simplex(y: np.ndarray, B: float) -> np.ndarray:
    """Euclidean projection of y onto {x >= 0, sum x <= B}.

    Clips negatives first; if the clipped point still exceeds the cap, the
    projection lands on the face {sum x = B} and is found by the
    sort-and-threshold rule: with u the coordinates of y sorted in
    decreasing order, the threshold is theta = (sum_{i<=k} u_i - B)/k for
    the largest k keeping u_k - theta positive, and x = [y - theta]_+.
    """
    y = _check_finite(y, "y")
    if not np.isfinite(B) or B <= 0:
        raise InvalidInputError("B must be positive and finite")
    clipped = np.maximum(y, 0.0)
    over = np.asarray(clipped.sum(axis=-1) > B)
    if not np.any(over):
        return clipped
    u = np.sort(y, axis=-1)[..., ::-1]
    css = np.cumsum(u, axis=-1) - B
    j = np.arange(1, y.shape[-1] + 1, dtype=np.float64)
    cond = u - css / j > 0.0
    k = np.asarray(np.count_nonzero(cond, axis=-1))
    k = np.maximum(k, 1)
    theta = np.take_along_axis(css, k[..., None] - 1, axis=-1) / k[..., None]
    projected = np.maximum(y - theta, 0.0)
    return np.where(over[..., None], projected, clipped)


def _entropy_map(y: np.ndarray, epsilon: float, B: float) -> np.ndarray:
    """Mirror map of the smoothed entropy via bisection on the cap multiplier."""

    def coords(mu: np.ndarray) -> np.ndarray:
        z = y - 1.0 - mu[..., None]
        return np.maximum(np.exp(np.clip(z, -745.0, 700.0)) - epsilon, 0.0)

    zero_mu = np.zeros(y.shape[:-1], dtype=np.float64)
    x0 = coords(zero_mu)
    need = np.asarray(x0.sum(axis=-1) - B > 0.0)
    if not np.any(need):
        return x0

    # Bracket: at mu = 0 the sum exceeds B; at mu = max(y) - 1 - ln(eps)
    # every coordinate is exactly zero, so the root lies in between.
    lo = np.zeros_like(zero_mu)
    hi = np.asarray(y.max(axis=-1) - 1.0 - np.log(epsilon), dtype=np.float64)
    mu = np.zeros_like(zero_mu)
    settled = ~need
    for _ in range(_BISECT_MAX_ITER):
        if np.all(settled):
            break
        mid = 0.5 * (lo + hi)
        s = coords(mid).sum(axis=-1) - B
        hit = (np.abs(s) <= _BISECT_TOL) & ~settled
        mu = np.where(hit, mid, mu)
        settled = settled | hit
        go_up = (s > 0.0) & ~settled
        lo = np.where(go_up, mid, lo)
        hi = np.where((s < 0.0) & ~settled, mid, hi)
    if not np.all(settled):
        raise NumericalError(
            "cap-multiplier bisection did not reach tolerance "
            f"{_BISECT_TOL} within {_BISECT_MAX_ITER} iterations"
        )
    out = coords(mu)
    return np.where(need[..., None], out, x0)


def mirror_map(y: np.ndarray, reg: Regularizer) -> np.ndarray:
    """Phi(y): the feasible point maximizing <y, x> - psi(x)."""
    y = _check_finite(y, "y")
    if y.shape[-1] != reg.dimension:
        raise InvalidInputError("y has wrong dimension")
    if reg.kind == EUCLIDEAN:
        return project_capped_simplex(y, reg.cap_B)
    return _entropy_map(y, reg.epsilon, reg.cap_B)


def _value_unchecked(x: np.ndarray, reg: Regularizer) -> np.ndarray:
    if reg.kind == EUCLIDEAN:
        return 0.5 * np.sum(x * x, axis=-1)
    shifted = np.maximum(x, 0.0) + reg.epsilon
    return np.sum(shifted * np.log(shifted), axis=-1)


def regularizer_value(x: np.ndarray, reg: Regularizer) -> np.ndarray:
    """psi(x) for feasible x (tolerance 1e-9 on feasibility)."""
    x = _check_domain(x, reg.cap_B, "x")
    return _value_unchecked(x, reg)


def regularizer_gradient(x: np.ndarray, reg: Regularizer) -> np.ndarray:
    """grad psi(x); for the entropy kind this is ln(x + eps) + 1."""
    x = _check_domain(x, reg.cap_B, "x")
    if reg.kind == EUCLIDEAN:
        return np.array(x, copy=True)
    return np.log(np.maximum(x, 0.0) + reg.epsilon) + 1.0


def conjugate_value(y: np.ndarray, reg: Regularizer) -> np.ndarray:
    """psi*(y) = <y, Phi(y)> - psi(Phi(y))."""
    y = _check_finite(y, "y")
    x = mirror_map(y, reg)
    return np.sum(y * x, axis=-1) - _value_unchecked(x, reg)


def fenchel_coupling(p: np.ndarray, y: np.ndarray, reg: Regularizer) -> np.ndarray:
    """F(p, y) = psi(p) + psi*(y) - <y, p>; nonnegative for feasible p."""
    p = _check_domain(p, reg.cap_B, "p")
    y = _check_finite(y, "y")
    return (_value_unchecked(p, reg) + conjugate_value(y, reg)
            - np.sum(y * p, axis=-1))


def geometry_constants(reg: Regularizer) -> GeometryConstants:
    """Closed-form constants (K, L_psi, D(X, psi), D_X) for the regularizer.

    Euclidean: K = 1, L_psi = B, D(X, psi) = B^2.
    Smoothed entropy (eps in [1/e, 1]): K = 1/B, L_psi = 1 + ln(B + eps),
    D(X, psi) = B ln B + D eps ln(1/eps), reported with the sign convention
    that makes it nonnegative. The l2 diameter of X is sqrt(2) B for both.
    """
    B = reg.cap_B
    d_x = float(np.sqrt(2.0) * B)
    if reg.kind == EUCLIDEAN:
        return GeometryConstants(
            strong_convexity_K=1.0,
            steepness_L_psi=float(B),
            diameter_term_D_psi=float(B * B),
            set_diameter_D_X=d_x,
        )
    eps = reg.epsilon
    d_psi = B * np.log(B) + reg.dimension * eps * np.log(1.0 / eps)
    return GeometryConstants(
        strong_convexity_K=1.0 / B,
        steepness_L_psi=float(1.0 + np.log(B + eps)),
        diameter_term_D_psi=float(max(d_psi, 0.0)),
        set_diameter_D_X=d_x,
    )


def coupling_modulus(reg: Regularizer) -> float:
    """Certified strong-convexity modulus used by the coupling inequalities.

    For the Euclidean regularizer this coincides with K = 1. For the
    smoothed entropy the modulus w.r.t. ||.||_1 that actually holds on X is
    1/(B + D eps): the Hessian of psi_eps is diag(1/(x_i + eps)) and
    Cauchy-Schwarz gives v^T H v >= ||v||_1^2 / sum(x_i + eps), with the
    denominator at most B + D eps. The headline constant 1/B ignores the
    +eps shift and overstates the modulus, so the verified inequalities use
    this value instead.
    """
    if reg.kind == EUCLIDEAN:
        return 1.0
    return 1.0 / (reg.cap_B + reg.dimension * reg.epsilon)


def primal_norm(v: np.ndarray, reg: Regularizer) -> np.ndarray:
    """Norm pairing: ||.||_2 for Euclidean, ||.||_1 for smoothed entropy."""
    v = np.asarray(v, dtype=np.float64)
    if reg.kind == EUCLIDEAN:
        return np.sqrt(np.sum(v * v, axis=-1))
    return np.sum(np.abs(v), axis=-1)


def dual_norm(v: np.ndarray, reg: Regularizer) -> np.ndarray:
    """Dual of the paired norm: ||.||_2 resp. ||.||_inf."""
    v = np.asarray(v, dtype=np.float64)
    if reg.kind == EUCLIDEAN:
        return np.sqrt(np.sum(v * v, axis=-1))
    return np.max(np.abs(v), axis=-1)
