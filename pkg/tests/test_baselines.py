"""Baselines: the projected-gradient inner solver, SDG, and MOSP."""

import numpy as np
import pytest

from gomsp.baselines import (MospState, SdgState, init_mosp_state,
                             init_sdg_state, inner_solve_convex, mosp_step,
                             sdg_step, solve_dispatch_lagrangian)
from gomsp.errors import InvalidInputError
from gomsp.geometry import project_capped_simplex
from gomsp.problems import (DispatchParams, RoundRealization,
                            dispatch_constraint_gradients,
                            dispatch_constraints, dispatch_loss,
                            dispatch_loss_gradient)

from .oracles import grid_minimize


def _params(curvature, slope, xi=1.0, B=1.0):
    c = np.atleast_2d(np.asarray(curvature, dtype=np.float64))
    e = np.atleast_2d(np.asarray(slope, dtype=np.float64))
    return DispatchParams(dim_D=c.shape[1], num_R=c.shape[0], cap_B=B,
                          demand_penalty_xi=xi, sigma_a=0.0, sigma_b=0.0,
                          curvature=c, slope=e)


def _round(true_a, true_b, d, emax, observed_a=None, observed_b=None):
    a = np.asarray(true_a, dtype=np.float64)
    b = np.asarray(true_b, dtype=np.float64)
    oa = a.copy() if observed_a is None else np.asarray(observed_a, float)
    ob = b.copy() if observed_b is None else np.asarray(observed_b, float)
    return RoundRealization(slot_t=1, true_a=a, true_b=b, observed_a=oa,
                            observed_b=ob, demand_d=float(d),
                            thresholds_Emax=np.asarray(emax, np.float64))


def _quadratic_oracle(q, c):
    def oracle(x):
        d = x - c
        return float(np.dot(q, d * d)), 2.0 * q * d
    return oracle


# ---------------------------------------------------------------------------
# inner solver


def test_inner_solve_pinned_cases():
    x = inner_solve_convex(_quadratic_oracle(np.ones(2), np.zeros(2)),
                           1.0, 2, 1e-10)
    assert np.allclose(x, [0.0, 0.0], atol=1e-9)
    # (x - 2)^2 over [0, 1]: the cap binds.
    x = inner_solve_convex(_quadratic_oracle(np.ones(1), np.array([2.0])),
                           1.0, 1, 1e-10)
    assert x[0] == pytest.approx(1.0, abs=1e-9)

    def two_term(x):
        return (float(x[0] ** 2 + (x[0] - 1.0) ** 2),
                np.array([2.0 * x[0] + 2.0 * (x[0] - 1.0)]))

    x = inner_solve_convex(two_term, 1.0, 1, 1e-10)
    assert x[0] == pytest.approx(0.5, abs=1e-9)


def test_inner_solve_validates_inputs():
    oracle = _quadratic_oracle(np.ones(1), np.zeros(1))
    with pytest.raises(InvalidInputError):
        inner_solve_convex(oracle, 1.0, 1, 0.0)
    with pytest.raises(InvalidInputError):
        inner_solve_convex(oracle, 1.0, 0, 1e-8)


def test_inner_solve_projects_out_of_set_start():
    oracle = _quadratic_oracle(np.array([1.0, 4.0]), np.array([0.2, 0.1]))
    a = inner_solve_convex(oracle, 1.0, 2, 1e-10)
    b = inner_solve_convex(oracle, 1.0, 2, 1e-10, x0=np.array([5.0, 5.0]))
    assert np.allclose(a, b, atol=1e-8)


def test_inner_solve_matches_grid_on_random_quadratics():
    gen = np.random.default_rng(41)
    for dim in (1, 2):
        for _ in range(10):
            q = gen.uniform(0.5, 4.0, size=dim)
            c = gen.uniform(-0.5, 1.5, size=dim)
            x = inner_solve_convex(_quadratic_oracle(q, c), 1.0, dim, 1e-9)
            ref = grid_minimize(
                lambda pts: ((pts - c) ** 2 * q).sum(axis=1), 1.0, dim)
            assert np.linalg.norm(x - ref) <= 1e-3


def test_inner_solve_residual_meets_tolerance():
    gen = np.random.default_rng(42)
    tol = 1e-6
    for _ in range(15):
        dim = int(gen.integers(1, 6))
        q = gen.uniform(0.2, 50.0, size=dim)
        c = gen.uniform(-1.0, 2.0, size=dim)
        oracle = _quadratic_oracle(q, c)
        x = inner_solve_convex(oracle, 1.0, dim, tol)
        _, grad = oracle(x)
        residual = np.linalg.norm(x - project_capped_simplex(x - grad, 1.0))
        assert residual <= 10 * tol


# ---------------------------------------------------------------------------
# SDG


def test_sdg_state_validation_and_init():
    params = _params([[1.0, 0.0]], [[0.0, 0.0]])
    state = init_sdg_state(params)
    assert state.slot_t == 1
    assert np.array_equal(state.primal_X, np.zeros(2))
    assert np.array_equal(state.dual_Lambda, np.zeros(1))
    with pytest.raises(InvalidInputError):
        SdgState(primal_X=np.zeros(2), dual_Lambda=np.array([-0.1]), slot_t=1)


def test_sdg_step_solves_instantaneous_problem():
    # f(x) = x^2 + (x - 1)^2 has its unconstrained minimum at 0.5, where
    # g(x) = x^2 - 0.25 is exactly active; with a zero dual the inner solve
    # returns that point.
    params = _params([[1.0]], [[0.0]], xi=1.0)
    r = _round([1.0], [0.0], 1.0, [0.25])
    state = sdg_step(init_sdg_state(params), r, params, gamma=0.1, tol=1e-9)
    assert state.primal_X[0] == pytest.approx(0.5, abs=1e-6)
    # g at the old primal (zero) is -0.25, so the dual stays clipped at 0.
    assert state.dual_Lambda[0] == 0.0
    assert state.slot_t == 2


def test_sdg_dual_ascends_along_old_primal():
    params = _params([[1.0]], [[0.0]], xi=1.0)
    r = _round([1.0], [0.0], 1.0, [0.25])
    start = SdgState(primal_X=np.array([0.9]), dual_Lambda=np.zeros(1),
                     slot_t=1)
    state = sdg_step(start, r, params, gamma=0.1, tol=1e-9)
    # g(0.9) = 0.56 while g at the fresh argmin is ~0; only the old-primal
    # reading produces this dual.
    assert state.dual_Lambda[0] == pytest.approx(0.056, abs=1e-12)


def test_sdg_rejects_bad_gamma_and_shapes():
    params = _params([[1.0]], [[0.0]])
    r = _round([1.0], [0.0], 1.0, [0.25])
    with pytest.raises(InvalidInputError):
        sdg_step(init_sdg_state(params), r, params, gamma=0.0, tol=1e-8)
    bad = SdgState(primal_X=np.zeros(3), dual_Lambda=np.zeros(1), slot_t=1)
    with pytest.raises(InvalidInputError):
        sdg_step(bad, r, params, gamma=0.1, tol=1e-8)


def test_sdg_inner_solve_uses_observed_coefficients():
    # True and observed losses disagree; the baseline can only optimize the
    # observed one.
    params = _params([[0.0]], [[0.0]], xi=0.0)
    r = _round([1.0], [-1.0], 0.0, [1.0],
               observed_a=[1.0], observed_b=[-0.4])
    state = sdg_step(init_sdg_state(params), r, params, gamma=0.1, tol=1e-9)
    assert state.primal_X[0] == pytest.approx(0.2, abs=1e-6)


# ---------------------------------------------------------------------------
# MOSP


def test_mosp_state_validation_and_init():
    params = _params([[1.0, 0.0]], [[0.0, 0.0]])
    state = init_mosp_state(params)
    assert state.slot_t == 1
    with pytest.raises(InvalidInputError):
        MospState(primal_X=np.zeros(2), dual_Lambda=np.array([-1e-9]),
                  slot_t=1)
    r = _round([1.0], [0.0], 1.0, [0.25])
    one_d = _params([[1.0]], [[0.0]])
    with pytest.raises(InvalidInputError):
        mosp_step(init_mosp_state(params), r, one_d, gamma=0.1)
    with pytest.raises(InvalidInputError):
        mosp_step(init_mosp_state(one_d), r, one_d, gamma=-0.1)


def test_mosp_interior_gradient_step_pinned():
    params = _params([[0.0, 0.0]], [[0.0, 0.0]], xi=0.0)
    r = _round([1.0, 1.0], [1.0, 1.0], 0.0, [0.5],
               observed_a=[1.0, 1.0], observed_b=[0.6, -1.6])
    start = MospState(primal_X=np.array([0.2, 0.3]), dual_Lambda=np.zeros(1),
                      slot_t=1)
    state = mosp_step(start, r, params, gamma=0.1)
    assert np.allclose(state.primal_X, [0.1, 0.4], atol=1e-12)
    assert state.dual_Lambda[0] == 0.0
    assert state.slot_t == 2


def test_mosp_stationary_point_is_fixed():
    params = _params([[0.0, 0.0]], [[0.0, 0.0]], xi=0.0)
    x = np.array([0.2, 0.3])
    r = _round([1.0, 1.0], [1.0, 1.0], 0.0, [0.5],
               observed_a=[1.0, 1.0], observed_b=-2.0 * x)
    start = MospState(primal_X=x, dual_Lambda=np.zeros(1), slot_t=7)
    state = mosp_step(start, r, params, gamma=0.05)
    assert np.allclose(state.primal_X, x, atol=1e-15)
    assert state.dual_Lambda[0] == 0.0


def test_mosp_dual_reads_constraint_at_new_primal():
    # Step moves x from 0.5 to 0.1 where g = x - 0.05; causal ascent sees
    # g(new) = 0.05, not g(old) = 0.45.
    params = _params([[0.0, 0.0]], [[1.0, 0.0]], xi=0.0)
    r = _round([1.0, 1.0], [1.0, 1.0], 0.0, [0.05],
               observed_a=[1.0, 1.0], observed_b=[3.0, 1.0])
    start = MospState(primal_X=np.array([0.5, 0.0]), dual_Lambda=np.zeros(1),
                      slot_t=1)
    state = mosp_step(start, r, params, gamma=0.1)
    assert np.allclose(state.primal_X, [0.1, 0.0], atol=1e-12)
    assert state.dual_Lambda[0] == pytest.approx(0.005, abs=1e-12)


def test_mosp_dual_clips_at_zero():
    params = _params([[0.0, 0.0]], [[1.0, 1.0]], xi=0.0)
    r = _round([1.0, 1.0], [1.0, 1.0], 0.0, [20.0],
               observed_a=[1.0, 1.0], observed_b=[0.0, 0.0])
    start = MospState(primal_X=np.array([0.1, 0.1]),
                      dual_Lambda=np.array([0.5]), slot_t=1)
    state = mosp_step(start, r, params, gamma=0.05)
    # 0.5 + 0.05 * g_new with g_new ~= -19.87 lands well below zero.
    assert state.dual_Lambda[0] == 0.0


def test_mosp_drift_includes_weighted_constraint_rows():
    params = _params([[0.0, 0.0]], [[1.0, 0.5]], xi=0.0)
    r = _round([1.0, 1.0], [1.0, 1.0], 0.0, [10.0],
               observed_a=[1.0, 1.0], observed_b=[0.0, 0.0])
    x = np.array([0.2, 0.2])
    lam = np.array([0.4])
    start = MospState(primal_X=x, dual_Lambda=lam, slot_t=1)
    state = mosp_step(start, r, params, gamma=0.1)
    vhat = dispatch_loss_gradient(x, r, params, use_observed=True)
    rows = dispatch_constraint_gradients(x, r, params)
    expect = project_capped_simplex(x - 0.1 * (vhat + rows.T @ lam), 1.0)
    assert np.allclose(state.primal_X, expect, atol=1e-15)


# ---------------------------------------------------------------------------
# compiled Lagrangian fast path


def test_lagrangian_solver_matches_generic_path():
    gen = np.random.default_rng(43)
    for _ in range(8):
        dim, num_r = int(gen.integers(1, 5)), int(gen.integers(1, 4))
        params = _params(gen.uniform(0, 1, size=(num_r, dim)),
                         gen.uniform(0, 1, size=(num_r, dim)),
                         xi=float(gen.uniform(0, 5)))
        a = gen.uniform(4.5, 6.0, size=dim)
        b = gen.uniform(5.0, 8.0, size=dim)
        r = _round(a, b, float(gen.uniform(0.4, 0.9)),
                   gen.uniform(0.1, 0.4, size=num_r))
        w = gen.uniform(0.0, 2.0, size=num_r)
        fast = solve_dispatch_lagrangian(r, params, w, 1e-9)

        def oracle(x):
            val = (dispatch_loss(x, r, params, use_observed=True)
                   + float(w @ dispatch_constraints(x, r, params)))
            grad = (dispatch_loss_gradient(x, r, params, use_observed=True)
                    + dispatch_constraint_gradients(x, r, params).T @ w)
            return val, grad

        slow = inner_solve_convex(oracle, params.cap_B, dim, 1e-9)
        assert np.linalg.norm(fast - slow) <= 1e-6
