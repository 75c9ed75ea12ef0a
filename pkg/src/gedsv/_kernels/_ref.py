"""Pure-Python reference kernels.

Same algebra as the compiled twin in _core.pyx; the b-recursions stay
as Python loops (each step feeds the next) while everything that only
depends on the data-independent shape sequence is vectorized.  The
compiled module is preferred at import time when available.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

# Above this shape the direct lgamma difference loses more digits than
# the midpoint digamma expansion; both backends switch at the same point.
_LGAMMA_DIFF_SWITCH = 1e8


def _softplus(x: float) -> float:
    if x > 35.0:
        return x
    if x < -35.0:
        return math.exp(x)
    return math.log1p(math.exp(x))


def _lgamma_diff_large(a: np.ndarray, s: float) -> np.ndarray:
    """lgamma(a+s) - lgamma(a) via s * digamma(a + s/2) for huge a."""
    m = a + 0.5 * s
    return s * (np.log(m) - 0.5 / m - 1.0 / (12.0 * m * m))


def filter_pass(y, alpha, phi, s2, r, a0, b0):
    """One full forward pass of the conjugate gamma filter.

    Returns (a_prior, log_b_prior, a_post, log_b_post, log_predictive,
    total_loglik, fail_t); fail_t is -1 on success, else the first index
    whose belief or predictive went non-finite.
    """
    y = np.ascontiguousarray(y, dtype=float)
    n = y.size
    inv_r = 1.0 / r
    lpsi = 0.5 * r * (math.lgamma(3.0 / r) - math.lgamma(1.0 / r))
    lconst = (
        math.log(r)
        + 0.5 * math.lgamma(3.0 / r)
        - math.log(2.0)
        - 1.5 * math.lgamma(1.0 / r)
    )

    # shape recursion is data-free: run it first, then vectorize the
    # lgamma terms over the whole path
    a_prior = np.empty(n)
    denom = np.empty(n)
    a_prev = a0
    for t in range(n):
        d = phi * phi / a_prev + s2
        a = 1.0 / d
        a_prior[t] = a
        denom[t] = d
        a_prev = a + inv_r
    a_post = a_prior + inv_r

    small = a_prior <= _LGAMMA_DIFF_SWITCH
    lgam_diff = np.where(
        small,
        gammaln(np.minimum(a_prior, _LGAMMA_DIFF_SWITCH) + inv_r)
        - gammaln(np.minimum(a_prior, _LGAMMA_DIFF_SWITCH)),
        _lgamma_diff_large(a_prior, inv_r),
    )

    a_shift = np.concatenate(([a0], a_post[:-1]))
    drift = alpha - phi * np.log(a_shift) - np.log(denom)

    abs_y = np.abs(y)
    c = np.full(n, -math.inf)
    nz = abs_y > 0.0
    c[nz] = lpsi + r * np.log(abs_y[nz])

    log_b_prior = np.full(n, np.nan)
    log_b_post = np.full(n, np.nan)
    sp = np.full(n, np.nan)
    lb_prev = math.log(b0)
    fail_t = -1
    for t in range(n):
        lb_pr = drift[t] + phi * lb_prev
        s = _softplus(c[t] - lb_pr)
        lb_po = lb_pr + s
        log_b_prior[t] = lb_pr
        log_b_post[t] = lb_po
        sp[t] = s
        if not math.isfinite(lb_po):
            fail_t = t
            break
        lb_prev = lb_po

    if fail_t >= 0:
        log_pred = np.full(n, np.nan)
        return a_prior, log_b_prior, a_post, log_b_post, log_pred, math.nan, fail_t

    log_pred = lgam_diff - a_prior * sp - inv_r * log_b_post + lconst
    total = float(np.sum(log_pred))
    if not math.isfinite(total):
        fail_t = int(np.flatnonzero(~np.isfinite(log_pred))[0])
        return a_prior, log_b_prior, a_post, log_b_post, log_pred, math.nan, fail_t
    return a_prior, log_b_prior, a_post, log_b_post, log_pred, total, fail_t


def backward_sample(f, q, alpha, phi, s2, z):
    """Backward draws of ln(lambda_{1:n}) given filtered log moments.

    f and q are the per-t mean/variance of ln(lambda_t) under the
    filtered belief; z is an (M, n) block of standard normals.  Row j
    of the result is one joint path drawn from the smoothing law.
    """
    f = np.ascontiguousarray(f, dtype=float)
    q = np.ascontiguousarray(q, dtype=float)
    z = np.atleast_2d(np.ascontiguousarray(z, dtype=float))
    n = f.size
    m = z.shape[0]

    s2_star = 1.0 / (phi * phi / s2 + 1.0 / q)
    sd_star = np.sqrt(s2_star)
    couple = s2_star * phi / s2
    anchor = s2_star * f / q

    x = np.empty((m, n))
    x[:, n - 1] = f[n - 1] + math.sqrt(q[n - 1]) * z[:, n - 1]
    for t in range(n - 2, -1, -1):
        mu = couple[t] * (x[:, t + 1] + alpha) + anchor[t]
        x[:, t] = mu + sd_star[t] * z[:, t]
    return x
