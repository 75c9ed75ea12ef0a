# cython: boundscheck=False, wraparound=False, cdivision=True, embedsignature=True
"""Compiled kernels: the sequential filter recursion and the backward
smoothing draw.  Algebra mirrors _ref.py exactly so the two backends
agree to rounding error."""

from libc.math cimport INFINITY, NAN, exp, fabs, isfinite, lgamma, log, log1p, sqrt

import numpy as np


cdef inline double _softplus(double x) nogil:
    if x > 35.0:
        return x
    if x < -35.0:
        return exp(x)
    return log1p(exp(x))


cdef inline double _lgamma_diff(double a, double s) nogil:
    cdef double m
    if a <= 1e8:
        return lgamma(a + s) - lgamma(a)
    m = a + 0.5 * s
    return s * (log(m) - 0.5 / m - 1.0 / (12.0 * m * m))


def filter_pass(object y_in, double alpha, double phi, double s2, double r,
                double a0, double b0):
    """One full forward pass of the conjugate gamma filter.

    Returns (a_prior, log_b_prior, a_post, log_b_post, log_predictive,
    total_loglik, fail_t); fail_t is -1 on success.
    """
    y_arr = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef double[::1] y = y_arr
    cdef Py_ssize_t n = y.shape[0]

    a_prior_arr = np.empty(n)
    log_b_prior_arr = np.full(n, np.nan)
    a_post_arr = np.empty(n)
    log_b_post_arr = np.full(n, np.nan)
    log_pred_arr = np.full(n, np.nan)
    cdef double[::1] a_prior = a_prior_arr
    cdef double[::1] log_b_prior = log_b_prior_arr
    cdef double[::1] a_post = a_post_arr
    cdef double[::1] log_b_post = log_b_post_arr
    cdef double[::1] log_pred = log_pred_arr

    cdef double inv_r = 1.0 / r
    cdef double lpsi = 0.5 * r * (lgamma(3.0 / r) - lgamma(1.0 / r))
    cdef double lconst = log(r) + 0.5 * lgamma(3.0 / r) - log(2.0) \
        - 1.5 * lgamma(1.0 / r)

    cdef double a_prev = a0
    cdef double lb_prev = log(b0)
    cdef double total = 0.0
    cdef double d, a_pr, lb_pr, ay, c, sp, lb_po, lp
    cdef Py_ssize_t t
    cdef Py_ssize_t fail_t = -1

    for t in range(n):
        d = phi * phi / a_prev + s2
        a_pr = 1.0 / d
        lb_pr = alpha - phi * (log(a_prev) - lb_prev) - log(d)
        ay = fabs(y[t])
        if ay > 0.0:
            c = lpsi + r * log(ay)
        else:
            c = -INFINITY
        sp = _softplus(c - lb_pr)
        lb_po = lb_pr + sp
        lp = _lgamma_diff(a_pr, inv_r) - a_pr * sp - inv_r * lb_po + lconst

        a_prior[t] = a_pr
        log_b_prior[t] = lb_pr
        a_post[t] = a_pr + inv_r
        log_b_post[t] = lb_po
        log_pred[t] = lp

        if not isfinite(lb_po) or not isfinite(lp):
            fail_t = t
            break
        total += lp
        a_prev = a_pr + inv_r
        lb_prev = lb_po

    if fail_t >= 0:
        total = NAN
    return (a_prior_arr, log_b_prior_arr, a_post_arr, log_b_post_arr,
            log_pred_arr, total, fail_t)


def backward_sample(object f_in, object q_in, double alpha, double phi,
                    double s2, object z_in):
    """Backward draws of ln(lambda_{1:n}); z is an (M, n) block of
    standard normals, one output row per joint path."""
    f_arr = np.ascontiguousarray(f_in, dtype=np.float64)
    q_arr = np.ascontiguousarray(q_in, dtype=np.float64)
    z_arr = np.atleast_2d(np.ascontiguousarray(z_in, dtype=np.float64))
    cdef double[::1] f = f_arr
    cdef double[::1] q = q_arr
    cdef double[:, ::1] z = z_arr
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t m = z.shape[0]

    x_arr = np.empty((m, n))
    cdef double[:, ::1] x = x_arr

    cdef double s2_star, sd_star, couple, anchor, sd_n
    cdef Py_ssize_t t, j

    sd_n = sqrt(q[n - 1])
    for j in range(m):
        x[j, n - 1] = f[n - 1] + sd_n * z[j, n - 1]
    for t in range(n - 2, -1, -1):
        s2_star = 1.0 / (phi * phi / s2 + 1.0 / q[t])
        sd_star = sqrt(s2_star)
        couple = s2_star * phi / s2
        anchor = s2_star * f[t] / q[t]
        for j in range(m):
            x[j, t] = couple * (x[j, t + 1] + alpha) + anchor + sd_star * z[j, t]
    return x_arr
