# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of `_fallback.solve_dispatch_objective`.

Same algorithm, same constants, same status codes; C loops instead of numpy
calls. Kept intentionally line-for-line comparable with the fallback.
"""

import numpy as np

cimport numpy as cnp
from libc.float cimport DBL_EPSILON
from libc.math cimport fabs, sqrt

cnp.import_array()

BACKEND_NAME = "native"

STATUS_CONVERGED = 0
STATUS_STAGNATED = 1
STATUS_ITER_CAP = 2

cdef double _ARMIJO = 1e-4
cdef double _ETA_MIN = 1e-22
cdef double _ETA_MAX = 1e12
cdef long _STALL_LIMIT = 256


cdef void _project(double* y, double* out, double* work, Py_ssize_t D,
                   double B) nogil:
    cdef Py_ssize_t i, j, k
    cdef double s = 0.0
    cdef double key, css, theta
    for i in range(D):
        out[i] = y[i] if y[i] > 0.0 else 0.0
        s += out[i]
    if s <= B:
        return
    # insertion sort of y, descending, into work
    for i in range(D):
        work[i] = y[i]
    for i in range(1, D):
        key = work[i]
        j = i - 1
        while j >= 0 and work[j] < key:
            work[j + 1] = work[j]
            j -= 1
        work[j + 1] = key
    css = 0.0
    theta = 0.0
    k = 0
    for i in range(D):
        css += work[i]
        if work[i] - (css - B) / (i + 1) > 0.0:
            k = i + 1
            theta = (css - B) / (i + 1)
    if k == 0:
        theta = work[0] - B
    for i in range(D):
        out[i] = y[i] - theta
        if out[i] < 0.0:
            out[i] = 0.0


cdef double _objective(double* x, double* quad_a, double* lin_b, double xi,
                       double demand_d, double* curv_C, double* slope_E,
                       double* emax, double* dual_w, double rho,
                       Py_ssize_t D, Py_ssize_t R, double* g_out) nogil:
    cdef Py_ssize_t i, j
    cdef double s = 0.0, val = 0.0, gj, gp
    for i in range(D):
        val += quad_a[i] * x[i] * x[i] + lin_b[i] * x[i]
        s += x[i]
    val += xi * (s - demand_d) * (s - demand_d)
    for j in range(R):
        gj = -emax[j]
        for i in range(D):
            gj += curv_C[j * D + i] * x[i] * x[i] + slope_E[j * D + i] * x[i]
        g_out[j] = gj
        if dual_w != NULL:
            val += dual_w[j] * gj
        if rho > 0.0 and gj > 0.0:
            val += rho * gj * gj
    return val


cdef void _gradient(double* x, double* quad_a, double* lin_b, double xi,
                    double demand_d, double* curv_C, double* slope_E,
                    double* dual_w, double rho, double* g,
                    Py_ssize_t D, Py_ssize_t R, double* grad_out) nogil:
    cdef Py_ssize_t i, j
    cdef double s = 0.0, coef
    for i in range(D):
        s += x[i]
    for i in range(D):
        grad_out[i] = 2.0 * quad_a[i] * x[i] + lin_b[i] \
            + 2.0 * xi * (s - demand_d)
    for j in range(R):
        coef = 0.0
        if dual_w != NULL:
            coef += dual_w[j]
        if rho > 0.0 and g[j] > 0.0:
            coef += 2.0 * rho * g[j]
        if coef != 0.0:
            for i in range(D):
                grad_out[i] += coef * (2.0 * curv_C[j * D + i] * x[i]
                                       + slope_E[j * D + i])


def solve_dispatch_objective(quad_a, lin_b, double xi, double demand_d,
                             curv_C, slope_E, emax, dual_w, double rho,
                             double cap_B, x0, double tol, long max_iter):
    """See `_fallback.solve_dispatch_objective`; identical contract."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] a_ = \
        np.ascontiguousarray(quad_a, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_ = \
        np.ascontiguousarray(lin_b, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] C_ = \
        np.ascontiguousarray(curv_C, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] E_ = \
        np.ascontiguousarray(slope_E, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] emax_ = \
        np.ascontiguousarray(emax, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x_ = \
        np.ascontiguousarray(x0, dtype=np.float64).copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_
    cdef double* w_ptr = NULL
    if dual_w is not None:
        w_ = np.ascontiguousarray(dual_w, dtype=np.float64)
        w_ptr = &w_[0]

    cdef Py_ssize_t D = a_.shape[0]
    cdef Py_ssize_t R = emax_.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.zeros(8 * D + 2 * R)
    cdef double* x = &x_[0]
    cdef double* xn = &buf[0]
    cdef double* grad = &buf[D]
    cdef double* trial = &buf[2 * D]
    cdef double* proj = &buf[3 * D]
    cdef double* work = &buf[4 * D]
    cdef double* xbest = &buf[5 * D]
    cdef double* xprev = &buf[6 * D]
    cdef double* gprev = &buf[7 * D]
    cdef double* g = &buf[8 * D]
    cdef double* gn = &buf[8 * D + R]

    cdef double fx, fn, eta, eta_try, dec, pgn, res, best_res, f_mark, thresh, diff
    cdef double ss, sy
    cdef Py_ssize_t i, j
    cdef long it, stall
    cdef bint accepted, moved, have_prev

    _project(x, xbest, work, D, cap_B)
    for i in range(D):
        x[i] = xbest[i]
    fx = _objective(x, &a_[0], &b_[0], xi, demand_d, &C_[0, 0], &E_[0, 0],
                    &emax_[0], w_ptr, rho, D, R, g)
    eta = 1.0
    best_res = -1.0
    f_mark = fx
    stall = 0
    have_prev = False
    for it in range(1, max_iter + 1):
        _gradient(x, &a_[0], &b_[0], xi, demand_d, &C_[0, 0], &E_[0, 0],
                  w_ptr, rho, g, D, R, grad)
        for i in range(D):
            trial[i] = x[i] - grad[i]
        _project(trial, proj, work, D, cap_B)
        pgn = 0.0
        for i in range(D):
            diff = x[i] - proj[i]
            pgn += diff * diff
        res = sqrt(pgn)
        if best_res < 0.0 or res < best_res:
            best_res = res
            for i in range(D):
                xbest[i] = x[i]
        if res <= tol:
            return x_, int(it), STATUS_CONVERGED
        # Stagnation when average decrease over the window is < 4 ulps/iter.
        thresh = fabs(f_mark)
        if thresh < 1.0:
            thresh = 1.0
        if fx < f_mark - 4.0 * _STALL_LIMIT * DBL_EPSILON * thresh:
            f_mark = fx
            stall = 0
        else:
            stall += 1
            if stall >= _STALL_LIMIT:
                for i in range(D):
                    x[i] = xbest[i]
                return x_, int(it), STATUS_STAGNATED
        eta_try = eta * 2.0
        if eta_try > _ETA_MAX:
            eta_try = _ETA_MAX
        if have_prev:
            # Spectral (Barzilai-Borwein) trial step s.s/s.y.
            ss = 0.0
            sy = 0.0
            for i in range(D):
                diff = x[i] - xprev[i]
                ss += diff * diff
                sy += diff * (grad[i] - gprev[i])
            if sy > 0.0:
                eta_try = ss / sy
                if eta_try < _ETA_MIN:
                    eta_try = _ETA_MIN
                elif eta_try > _ETA_MAX:
                    eta_try = _ETA_MAX
        accepted = False
        while eta_try >= _ETA_MIN:
            for i in range(D):
                trial[i] = x[i] - eta_try * grad[i]
            _project(trial, xn, work, D, cap_B)
            moved = False
            for i in range(D):
                if xn[i] != x[i]:
                    moved = True
                    break
            if moved:
                fn = _objective(xn, &a_[0], &b_[0], xi, demand_d, &C_[0, 0],
                                &E_[0, 0], &emax_[0], w_ptr, rho, D, R, gn)
                dec = 0.0
                for i in range(D):
                    dec += grad[i] * (xn[i] - x[i])
                if fn <= fx + _ARMIJO * dec:
                    accepted = True
                    break
            eta_try *= 0.5
        if not accepted:
            for i in range(D):
                x[i] = xbest[i]
            return x_, int(it), STATUS_STAGNATED
        for i in range(D):
            xprev[i] = x[i]
            gprev[i] = grad[i]
        have_prev = True
        for i in range(D):
            x[i] = xn[i]
        for j in range(R):
            g[j] = gn[j]
        fx = fn
        eta = eta_try
    for i in range(D):
        x[i] = xbest[i]
    return x_, int(max_iter), STATUS_ITER_CAP
