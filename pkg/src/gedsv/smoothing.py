"""Backward-sampling smoother.

The filtered Gamma beliefs are moment-matched on the log scale
(ln lambda_t is approximately Normal(f_t, q_t) with f = digamma(shape)
- ln(rate), q = trigamma(shape)); joint draws of ln lambda_{1:n} | Y_n
then follow from a terminal draw plus backward Gaussian conditioning
through the AR(1) evolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .filtering import FilterOutput, run_filter
from .model import DIFFUSE_INIT, GammaBelief, ReturnSeries, StaticParams
from .special import RngStream, digamma, trigamma

__all__ = [
    "SmoothedDraws",
    "log_gamma_moments",
    "backward_conditional",
    "sample_smoothed_path",
    "sample_smoothed_paths",
    "smoothed_path_log_density",
    "smooth_over_posterior",
    "smoothed_volatility_summary",
]


@dataclass(frozen=True)
class SmoothedDraws:
    """M x n matrix of ln(lambda) path draws, one row per joint draw."""

    draws: np.ndarray

    def __post_init__(self) -> None:
        draws = np.ascontiguousarray(self.draws, dtype=float)
        object.__setattr__(self, "draws", draws)
        if draws.ndim != 2:
            raise ValueError("draws must be an M x n matrix")
        if not np.all(np.isfinite(draws)):
            raise ValueError("draws must be finite")

    @property
    def n_draws(self) -> int:
        return int(self.draws.shape[0])

    @property
    def n(self) -> int:
        return int(self.draws.shape[1])


def log_gamma_moments(belief: GammaBelief) -> tuple[float, float]:
    """Mean and variance of ln(lambda) when lambda ~ Gamma(shape, rate)."""
    f = digamma(belief.shape) - math.log(belief.rate)
    q = trigamma(belief.shape)
    return f, q


def backward_conditional(
    ln_lambda_next: float,
    posterior_t: GammaBelief,
    params: StaticParams,
) -> tuple[float, float]:
    """Gaussian law of ln(lambda_t) given ln(lambda_{t+1}) and Y_t.

    Precision adds: 1/sigma2* = phi^2/sigma_eta2 + 1/q_t, and the mean
    blends the evolution pull-back with the filtered location.
    """
    if params.sigma_eta2 <= 0.0:
        raise ValueError("sigma_eta2 must be positive")
    f, q = log_gamma_moments(posterior_t)
    s2_star = 1.0 / (params.phi**2 / params.sigma_eta2 + 1.0 / q)
    mu_star = s2_star * (
        params.phi * (float(ln_lambda_next) + params.alpha) / params.sigma_eta2
        + f / q
    )
    return mu_star, s2_star


def _filtered_log_moments(filter_out: FilterOutput) -> tuple[np.ndarray, np.ndarray]:
    f = np.array(
        [digamma(a) for a in filter_out.a_post]
    ) - filter_out.log_b_post
    q = np.array([trigamma(a) for a in filter_out.a_post])
    return f, q


def sample_smoothed_paths(
    filter_out: FilterOutput,
    params: StaticParams,
    rng: RngStream,
    n_draws: int,
) -> SmoothedDraws:
    """n_draws independent joint draws of ln(lambda_{1:n}) | Y_n."""
    n_draws = int(n_draws)
    if n_draws < 1:
        raise ValueError("n_draws must be at least 1")
    f, q = _filtered_log_moments(filter_out)
    z = rng.standard_normal((n_draws, filter_out.n))
    x = _kernels.backward_sample(
        f, q, params.alpha, params.phi, params.sigma_eta2, z
    )
    return SmoothedDraws(x)


def sample_smoothed_path(
    filter_out: FilterOutput,
    params: StaticParams,
    rng: RngStream,
) -> np.ndarray:
    """A single joint draw of ln(lambda_{1:n}) | Y_n."""
    return sample_smoothed_paths(filter_out, params, rng, 1).draws[0]


def smoothed_path_log_density(
    path,
    filter_out: FilterOutput,
    params: StaticParams,
) -> float:
    """Log-density of a ln(lambda) path under the backward factorization:
    terminal Normal(f_n, q_n) times the backward conditionals."""
    path = np.asarray(path, dtype=float)
    n = filter_out.n
    if path.shape != (n,):
        raise ValueError(f"path must have length {n}")
    posts = filter_out.posteriors
    f_n, q_n = log_gamma_moments(posts[-1])
    total = -0.5 * ((path[-1] - f_n) ** 2 / q_n + math.log(2.0 * math.pi * q_n))
    for t in range(n - 2, -1, -1):
        mu, s2 = backward_conditional(path[t + 1], posts[t], params)
        total += -0.5 * ((path[t] - mu) ** 2 / s2 + math.log(2.0 * math.pi * s2))
    return float(total)


def smooth_over_posterior(
    draws_params: list[StaticParams],
    series: ReturnSeries,
    rng: RngStream,
    init: GammaBelief = DIFFUSE_INIT,
) -> SmoothedDraws:
    """One smoothed path per posterior parameter draw.

    Re-runs the filter under each draw, so the returned matrix mixes
    over parameter uncertainty as well as state uncertainty.
    """
    if not draws_params:
        raise ValueError("draws_params must be non-empty")
    paths = np.empty((len(draws_params), series.n))
    for j, params in enumerate(draws_params):
        out = run_filter(series, params, init)
        paths[j] = sample_smoothed_path(out, params, rng)
    return SmoothedDraws(paths)


def smoothed_volatility_summary(
    draws: SmoothedDraws,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-t mean and equal-tailed 95% band of h_t = exp(-ln lambda_t)."""
    if draws.n_draws < 2:
        raise ValueError("need at least 2 draws to summarize")
    h = np.exp(-draws.draws)
    mean = h.mean(axis=0)
    lower, upper = np.quantile(h, [0.025, 0.975], axis=0)
    return mean, lower, upper
