"""Conjugate gamma filtering for the GED stochastic volatility model.

Sequential state prediction and update, the one-step predictive
density, the marginal log-likelihood of a whole series, and multi-step
volatility forecasts.  The per-series recursion runs in a compiled
kernel when available; rates are carried in log space throughout so
diffuse initializations survive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaincinv

from . import _kernels
from .model import DIFFUSE_INIT, GammaBelief, ReturnSeries, StaticParams, psi_r
from .model import ged_log_constant

__all__ = [
    "FilterDivergedError",
    "FilterOutput",
    "VolatilityForecast",
    "predict_state",
    "update_state",
    "log_predictive_one_step",
    "run_filter",
    "forecast_volatility",
]


class FilterDivergedError(RuntimeError):
    """A belief or predictive became non-finite at step t.

    Carries the offending quantities so callers (the MCMC sampler in
    particular) can reject the parameter point instead of aborting.
    """

    def __init__(self, t: int, shape: float, log_rate: float, y: float):
        self.t = int(t)
        self.shape = float(shape)
        self.log_rate = float(log_rate)
        self.y = float(y)
        super().__init__(
            f"filter diverged at t={t}: shape={shape!r}, "
            f"log_rate={log_rate!r}, y={y!r}"
        )


@dataclass(frozen=True)
class FilterOutput:
    """Full forward-pass record: per-t prior and posterior beliefs (as
    shape plus log-rate arrays), per-t predictive log-densities, and
    their total."""

    a_prior: np.ndarray
    log_b_prior: np.ndarray
    a_post: np.ndarray
    log_b_post: np.ndarray
    log_predictive: np.ndarray
    total_loglik: float

    @property
    def n(self) -> int:
        return int(self.a_prior.size)

    @cached_property
    def priors(self) -> list[GammaBelief]:
        return [
            GammaBelief(a, math.exp(lb))
            for a, lb in zip(self.a_prior, self.log_b_prior)
        ]

    @cached_property
    def posteriors(self) -> list[GammaBelief]:
        return [
            GammaBelief(a, math.exp(lb))
            for a, lb in zip(self.a_post, self.log_b_post)
        ]

    @property
    def last_posterior(self) -> GammaBelief:
        return GammaBelief(float(self.a_post[-1]), math.exp(float(self.log_b_post[-1])))


def predict_state(posterior: GammaBelief, params: StaticParams) -> GammaBelief:
    """One evolution step: Gamma(a, b) at t-1 to the prior belief at t.

    a' = (phi^2/a + sigma_eta2)^(-1) and
    b' = exp(alpha) (a/b)^(-phi) / (phi^2/a + sigma_eta2), evaluated
    through ln b' so extreme mean ratios cannot overflow.
    """
    d = params.phi**2 / posterior.shape + params.sigma_eta2
    shape = 1.0 / d
    log_rate = (
        params.alpha
        - params.phi * (math.log(posterior.shape) - math.log(posterior.rate))
        - math.log(d)
    )
    return GammaBelief(shape, math.exp(log_rate))


def update_state(prior: GammaBelief, y: float, r: float) -> GammaBelief:
    """Observation step: shape grows by 1/r, rate by psi_r(r) |y|^r."""
    if not (math.isfinite(r) and r > 0.0):
        raise ValueError("r must be positive and finite")
    return GammaBelief(
        prior.shape + 1.0 / r,
        prior.rate + psi_r(r) * abs(float(y)) ** r,
    )


def _log_predictive(a: float, log_b: float, y: float, r: float) -> float:
    """Stable one-step predictive log-density given shape and log-rate."""
    inv_r = 1.0 / r
    ay = abs(float(y))
    if ay > 0.0:
        c = math.log(psi_r(r)) + r * math.log(ay)
    else:
        c = -math.inf
    x = c - log_b
    if x > 35.0:
        sp = x
    elif x < -35.0:
        sp = math.exp(x)
    else:
        sp = math.log1p(math.exp(x))
    log_b_post = log_b + sp
    if a <= 1e8:
        lgam_diff = math.lgamma(a + inv_r) - math.lgamma(a)
    else:
        m = a + 0.5 * inv_r
        lgam_diff = inv_r * (math.log(m) - 0.5 / m - 1.0 / (12.0 * m * m))
    return lgam_diff - a * sp - inv_r * log_b_post + ged_log_constant(r)


def log_predictive_one_step(prior: GammaBelief, y: float, r: float) -> float:
    """Log-density of the next observation with the state integrated out.

    A generalized Student-t: for r=2 it is exactly the Student-t with
    2a degrees of freedom and scale sqrt(b/a).
    """
    if not (math.isfinite(r) and r > 0.0):
        raise ValueError("r must be positive and finite")
    return _log_predictive(prior.shape, math.log(prior.rate), y, r)


def run_filter(
    series: ReturnSeries,
    params: StaticParams,
    init: GammaBelief = DIFFUSE_INIT,
) -> FilterOutput:
    """Forward pass over the whole series from the initial belief.

    Alternates predict and update steps, accumulating the per-step
    predictive log-densities whose sum is the marginal log-likelihood.
    Raises FilterDivergedError with the offending step if any quantity
    goes non-finite.
    """
    a_pr, lb_pr, a_po, lb_po, log_pred, total, fail_t = _kernels.filter_pass(
        series.values,
        params.alpha,
        params.phi,
        params.sigma_eta2,
        params.r,
        init.shape,
        init.rate,
    )
    if fail_t >= 0:
        raise FilterDivergedError(
            fail_t, a_pr[fail_t], lb_pr[fail_t], series.values[fail_t]
        )
    return FilterOutput(a_pr, lb_pr, a_po, lb_po, log_pred, float(total))


@dataclass(frozen=True)
class VolatilityForecast:
    """Multi-step volatility forecast: per-horizon mean of h (NaN where
    the prior shape is at most 1 and the mean does not exist) and
    2.5%/97.5% quantiles of h = 1/lambda."""

    horizon: int
    means: np.ndarray
    lower95: np.ndarray
    upper95: np.ndarray
    beliefs: tuple[GammaBelief, ...]


def forecast_volatility(
    last_posterior: GammaBelief,
    params: StaticParams,
    horizon: int,
) -> VolatilityForecast:
    """Iterate the evolution step h times without new observations.

    At each horizon lambda is Gamma(a, b), so h = 1/lambda is
    inverse-gamma: mean b/(a-1) when a > 1, quantiles from the inverse
    incomplete-gamma function.
    """
    horizon = int(horizon)
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    means = np.empty(horizon)
    lower = np.empty(horizon)
    upper = np.empty(horizon)
    beliefs = []
    belief = last_posterior
    for k in range(horizon):
        belief = predict_state(belief, params)
        beliefs.append(belief)
        a, b = belief.shape, belief.rate
        means[k] = b / (a - 1.0) if a > 1.0 else math.nan
        # P(1/lambda <= x) = 1 - P(lambda <= 1/x)
        upper[k] = b / float(gammaincinv(a, 0.025))
        lower[k] = b / float(gammaincinv(a, 0.975))
    return VolatilityForecast(horizon, means, lower, upper, tuple(beliefs))
