"""Bayesian inference for the static parameters.

Priors and log-posterior, quasi-Newton posterior-mode search on the
unconstrained scale, single-site Metropolis-Hastings with truncated
normal proposals, predictive mixing over posterior draws, and a Laplace
approximation of the marginal likelihood for Bayes factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .filtering import FilterDivergedError, forecast_volatility, run_filter
from .model import (
    DIFFUSE_INIT,
    PARAM_NAMES,
    GammaBelief,
    ReturnSeries,
    StaticParams,
    from_unconstrained,
    to_unconstrained,
)
from .special import (
    RngStream,
    log_gamma,
    sample_gamma,
    sample_truncated_normal,
    truncated_normal_logpdf,
)

__all__ = [
    "UniformPrior",
    "NormalPrior",
    "TransformedBetaPrior",
    "InverseGammaPrior",
    "GammaPrior",
    "PriorSpec",
    "McmcConfig",
    "PosteriorSamples",
    "OptimizerOptions",
    "McmcStuckError",
    "TuningFailedError",
    "HessianNotPDError",
    "log_posterior",
    "default_start",
    "quasi_newton_maximize",
    "posterior_mode",
    "metropolis_accept",
    "run_mcmc",
    "split_chain_psrf",
    "tune_proposals",
    "PrecisionMixture",
    "latent_predictive_mixture",
    "laplace_log_evidence",
    "marginal_loglik_laplace",
]

# Hard domain of StaticParams, intersected with every prior's support
# when building proposal truncation bounds.
_MODEL_BOUNDS = (
    (-math.inf, math.inf),
    (0.0, 1.0),
    (0.0, math.inf),
    (0.0, math.inf),
)


class McmcStuckError(RuntimeError):
    """A proposal block was rejected for 500 consecutive iterations."""


class TuningFailedError(RuntimeError):
    """Proposal tuning did not reach the target band within the round budget."""


class HessianNotPDError(RuntimeError):
    """The negative Hessian at the mode is not positive definite."""


@dataclass(frozen=True)
class UniformPrior:
    lower: float
    upper: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise ValueError("uniform bounds must be finite")
        if not self.lower < self.upper:
            raise ValueError("uniform bounds must be ordered")

    @property
    def support(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    def log_density(self, x: float) -> float:
        if self.lower < x < self.upper:
            return -math.log(self.upper - self.lower)
        return -math.inf


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mean) and self.sd > 0.0):
            raise ValueError("mean must be finite and sd positive")

    @property
    def support(self) -> tuple[float, float]:
        return (-math.inf, math.inf)

    def log_density(self, x: float) -> float:
        z = (x - self.mean) / self.sd
        return -0.5 * z * z - math.log(self.sd) - 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class TransformedBetaPrior:
    """Beta(a, b) prior on (x+1)/2, i.e. x supported on (-1, 1)."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not (self.a > 0.0 and self.b > 0.0):
            raise ValueError("beta hyperparameters must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return (-1.0, 1.0)

    def log_density(self, x: float) -> float:
        if not -1.0 < x < 1.0:
            return -math.inf
        u = 0.5 * (x + 1.0)
        lbeta = log_gamma(self.a) + log_gamma(self.b) - log_gamma(self.a + self.b)
        return (
            (self.a - 1.0) * math.log(u)
            + (self.b - 1.0) * math.log1p(-u)
            - lbeta
            - math.log(2.0)
        )


@dataclass(frozen=True)
class InverseGammaPrior:
    shape: float
    scale: float

    def __post_init__(self) -> None:
        if not (self.shape > 0.0 and self.scale > 0.0):
            raise ValueError("shape and scale must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def log_density(self, x: float) -> float:
        if x <= 0.0:
            return -math.inf
        return (
            self.shape * math.log(self.scale)
            - log_gamma(self.shape)
            - (self.shape + 1.0) * math.log(x)
            - self.scale / x
        )


@dataclass(frozen=True)
class GammaPrior:
    shape: float
    rate: float

    def __post_init__(self) -> None:
        if not (self.shape > 0.0 and self.rate > 0.0):
            raise ValueError("shape and rate must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def log_density(self, x: float) -> float:
        if x <= 0.0:
            return -math.inf
        return (
            self.shape * math.log(self.rate)
            - log_gamma(self.shape)
            + (self.shape - 1.0) * math.log(x)
            - self.rate * x
        )


@dataclass(frozen=True)
class PriorSpec:
    """Independent priors for (alpha, phi, sigma_eta2, r).

    The defaults are the proper uniforms used throughout: alpha on
    (-1000, 1000), phi on (0, 1), sigma_eta2 and r on (0, 1000).
    """

    alpha: object = field(default_factory=lambda: UniformPrior(-1000.0, 1000.0))
    phi: object = field(default_factory=lambda: UniformPrior(0.0, 1.0))
    sigma_eta2: object = field(default_factory=lambda: UniformPrior(0.0, 1000.0))
    r: object = field(default_factory=lambda: UniformPrior(0.0, 1000.0))

    @staticmethod
    def default() -> "PriorSpec":
        return PriorSpec()

    def _priors(self):
        return (self.alpha, self.phi, self.sigma_eta2, self.r)

    def log_density(self, params: StaticParams) -> float:
        total = 0.0
        for prior, x in zip(self._priors(), params.as_array()):
            lp = prior.log_density(float(x))
            if lp == -math.inf:
                return -math.inf
            total += lp
        return total

    def proposal_bounds(self) -> list[tuple[float, float]]:
        """Per-parameter truncation interval: prior support clipped to
        the model's hard domain."""
        out = []
        for prior, (mlo, mhi) in zip(self._priors(), _MODEL_BOUNDS):
            lo, hi = prior.support
            out.append((max(lo, mlo), min(hi, mhi)))
        return out


@dataclass(frozen=True)
class McmcConfig:
    chains: int = 2
    iterations: int = 5000
    burn_in: int = 4000
    proposal_sd: tuple[float, float, float, float] = (0.08, 0.015, 0.06, 0.18)
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.chains) < 1 or int(self.iterations) < 1:
            raise ValueError("chains and iterations must be positive")
        if not 0 <= int(self.burn_in) < int(self.iterations):
            raise ValueError("burn_in must be non-negative and below iterations")
        sd = tuple(float(s) for s in self.proposal_sd)
        if len(sd) != 4 or any(not (math.isfinite(s) and s > 0.0) for s in sd):
            raise ValueError("proposal_sd must be 4 positive reals")
        object.__setattr__(self, "proposal_sd", sd)


@dataclass(frozen=True)
class PosteriorSamples:
    """Post burn-in draws from every chain, stacked chain-major."""

    values: np.ndarray
    chain_ids: np.ndarray
    log_liks: np.ndarray
    acceptance_rates: np.ndarray

    @property
    def n_draws(self) -> int:
        return int(self.values.shape[0])

    @property
    def draws(self) -> list[StaticParams]:
        return [StaticParams.from_array(v) for v in self.values]

    def parameter(self, name: str) -> np.ndarray:
        return self.values[:, PARAM_NAMES.index(name)]

    def mean_params(self) -> StaticParams:
        return StaticParams.from_array(self.values.mean(axis=0))

    def credible_interval(self, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
        tail = 0.5 * (1.0 - float(level))
        lo, hi = np.quantile(self.values, [tail, 1.0 - tail], axis=0)
        return lo, hi


def log_posterior(
    params: StaticParams,
    series: ReturnSeries,
    priors: PriorSpec,
    init: GammaBelief = DIFFUSE_INIT,
) -> float:
    """Unnormalized log-posterior: marginal log-likelihood plus log prior.

    Returns -inf outside the prior support and when the filter diverges,
    so optimizers and samplers treat such points as simply rejected.
    """
    prior_lp = priors.log_density(params)
    if prior_lp == -math.inf:
        return -math.inf
    try:
        out = run_filter(series, params, init)
    except FilterDivergedError:
        return -math.inf
    return out.total_loglik + prior_lp


def default_start(series: ReturnSeries) -> StaticParams:
    """Moment-based optimizer start: persistence 0.9, moderate evolution
    noise, Gaussian tails, and alpha matched to the sample variance."""
    var = float(np.var(series.values))
    var = max(var, 1e-12)
    phi0 = 0.9
    return StaticParams((1.0 - phi0) * math.log(var), phi0, 0.05, 2.0)


@dataclass(frozen=True)
class OptimizerOptions:
    maxiter: int = 500
    gtol: float = 1e-6
    # classification threshold for `converged`: central differences on a
    # length-500 log-likelihood carry noise of order 1e-5, so demanding
    # the strict gtol for the flag would misreport good optima
    gtol_soft: float = 1e-3
    rel_step: float = 1e-5
    penalty: float = 1e12
    fixed_r: float | None = None


def _central_gradient(f: Callable, x: np.ndarray, rel_step: float) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(float(x[i])))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def quasi_newton_maximize(
    f: Callable[[np.ndarray], float],
    x0,
    options: OptimizerOptions = OptimizerOptions(),
) -> tuple[np.ndarray, bool, float]:
    """BFGS maximization with central-difference gradients.

    Stops when the gradient infinity-norm falls below gtol or after
    maxiter iterations; never raises on numerical trouble, reporting
    the best iterate instead.
    """
    x0 = np.asarray(x0, dtype=float)

    def neg(v: np.ndarray) -> float:
        val = f(v)
        if not math.isfinite(val):
            return options.penalty
        return -val

    def grad(v: np.ndarray) -> np.ndarray:
        return _central_gradient(neg, v, options.rel_step)

    res = minimize(
        neg,
        x0,
        method="BFGS",
        jac=grad,
        options={"maxiter": options.maxiter, "gtol": options.gtol, "norm": np.inf},
    )
    gnorm = float(np.max(np.abs(res.jac))) if res.jac is not None else math.inf
    converged = bool(res.success) or gnorm < options.gtol_soft
    return np.asarray(res.x, dtype=float), converged, float(-res.fun)


def posterior_mode(
    series: ReturnSeries,
    priors: PriorSpec,
    init_params: StaticParams,
    options: OptimizerOptions = OptimizerOptions(),
    init: GammaBelief = DIFFUSE_INIT,
) -> tuple[StaticParams, bool, float]:
    """Maximize the log-posterior over the unconstrained scale.

    With options.fixed_r set, r is pinned at that value and only the
    remaining three coordinates are optimized (the Gaussian-errors model
    variant).  Returns (mode, converged, log-posterior at the mode).
    """
    fixed_r = options.fixed_r
    if fixed_r is not None:
        init_params = replace(init_params, r=float(fixed_r))
    v0 = to_unconstrained(init_params)

    if fixed_r is None:
        pack = lambda v: v
        v_start = v0
    else:
        log_r = v0[3]
        pack = lambda v: np.append(v, log_r)
        v_start = v0[:3]

    def objective(v: np.ndarray) -> float:
        try:
            params = from_unconstrained(pack(v))
        except ValueError:
            return -math.inf
        return log_posterior(params, series, priors, init)

    v_opt, converged, value = quasi_newton_maximize(objective, v_start, options)
    mode = from_unconstrained(pack(v_opt))
    return mode, converged, value


def metropolis_accept(log_ratio: float, rng: RngStream) -> bool:
    """Single Metropolis-Hastings accept decision; always consumes one
    uniform so the draw stream stays aligned."""
    u = 1.0 - float(rng.uniform())
    return math.log(u) < log_ratio


_STUCK_LIMIT = 500


def _run_single_chain(
    series: ReturnSeries,
    priors: PriorSpec,
    config: McmcConfig,
    start: StaticParams,
    chain_id: int,
    init: GammaBelief,
):
    rng = RngStream(config.seed, chain_id)
    bounds = priors.proposal_bounds()
    sds = config.proposal_sd

    x = start.as_array().copy()
    cur_prior = priors.log_density(start)
    if cur_prior == -math.inf:
        raise ValueError("initial parameters lie outside the prior support")
    cur_ll = _loglik_or_neginf(series, start, init)
    if cur_ll == -math.inf:
        raise ValueError("filter diverges at the initial parameters")

    kept_values = []
    kept_ll = []
    accepts = np.zeros(4, dtype=int)
    rejected_streak = np.zeros(4, dtype=int)

    for it in range(config.iterations):
        for k in range(4):
            lo, hi = bounds[k]
            prop = sample_truncated_normal(x[k], sds[k], lo, hi, rng)
            cand = x.copy()
            cand[k] = prop
            try:
                cand_params = StaticParams.from_array(cand)
            except ValueError:
                cand_prior = -math.inf
            else:
                cand_prior = priors.log_density(cand_params)
            if cand_prior == -math.inf:
                cand_ll = -math.inf
            else:
                cand_ll = _loglik_or_neginf(series, cand_params, init)
            # asymmetric proposal: the truncated-normal masses differ
            correction = truncated_normal_logpdf(
                x[k], prop, sds[k], lo, hi
            ) - truncated_normal_logpdf(prop, x[k], sds[k], lo, hi)
            log_ratio = (cand_ll + cand_prior) - (cur_ll + cur_prior) + correction
            if metropolis_accept(log_ratio, rng):
                x = cand
                cur_ll = cand_ll
                cur_prior = cand_prior
                accepts[k] += 1
                rejected_streak[k] = 0
            else:
                rejected_streak[k] += 1
                if rejected_streak[k] >= _STUCK_LIMIT:
                    raise McmcStuckError(
                        f"block {PARAM_NAMES[k]} rejected {_STUCK_LIMIT} "
                        f"consecutive proposals (sd={sds[k]!r})"
                    )
        if it >= config.burn_in:
            kept_values.append(x.copy())
            kept_ll.append(cur_ll)

    return (
        np.asarray(kept_values),
        np.asarray(kept_ll),
        accepts / config.iterations,
    )


def _loglik_or_neginf(series, params, init) -> float:
    try:
        return run_filter(series, params, init).total_loglik
    except FilterDivergedError:
        return -math.inf


def run_mcmc(
    series: ReturnSeries,
    priors: PriorSpec,
    config: McmcConfig,
    init_params: StaticParams | Sequence[StaticParams],
    init: GammaBelief = DIFFUSE_INIT,
) -> PosteriorSamples:
    """Single-site Metropolis-Hastings over (alpha, phi, sigma_eta2, r).

    Proposals are truncated normals centered at the current value and
    truncated to the prior support, with the Hastings correction for
    the location-dependent normalization.  Chains use independent
    streams keyed by (config.seed, chain index); draws from all chains
    are stacked after burn-in.
    """
    if isinstance(init_params, StaticParams):
        starts = [init_params] * config.chains
    else:
        starts = list(init_params)
        if len(starts) != config.chains:
            raise ValueError("need one start per chain")

    all_values = []
    all_chain_ids = []
    all_ll = []
    rates = np.zeros(4)
    for c in range(config.chains):
        values, lls, acc = _run_single_chain(
            series, priors, config, starts[c], c, init
        )
        all_values.append(values)
        all_ll.append(lls)
        all_chain_ids.append(np.full(values.shape[0], c, dtype=int))
        rates += acc
    return PosteriorSamples(
        values=np.concatenate(all_values, axis=0),
        chain_ids=np.concatenate(all_chain_ids),
        log_liks=np.concatenate(all_ll),
        acceptance_rates=rates / config.chains,
    )


def split_chain_psrf(samples: PosteriorSamples) -> np.ndarray:
    """Split-chain potential scale reduction factor per parameter."""
    halves = []
    for c in np.unique(samples.chain_ids):
        vals = samples.values[samples.chain_ids == c]
        m = vals.shape[0] // 2
        if m < 2:
            raise ValueError("chains too short to split")
        halves.append(vals[:m])
        halves.append(vals[m : 2 * m])
    seqs = np.stack(halves)  # (m_seq, n, 4)
    n = seqs.shape[1]
    seq_means = seqs.mean(axis=1)
    seq_vars = seqs.var(axis=1, ddof=1)
    w = seq_vars.mean(axis=0)
    b = n * seq_means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * w + b / n
    return np.sqrt(var_plus / w)


def tune_proposals(
    series: ReturnSeries,
    priors: PriorSpec,
    init_params: StaticParams,
    target_rate: float = 0.35,
    initial_sd: tuple[float, float, float, float] | None = None,
    pilot_iterations: int = 150,
    max_rounds: int = 20,
    seed: int = 0,
    init: GammaBelief = DIFFUSE_INIT,
) -> tuple[float, float, float, float]:
    """Scale each proposal sd until its acceptance rate is within 0.1
    of target_rate, using short pilot chains."""
    if not 0.1 < target_rate < 0.6:
        raise ValueError("target_rate must lie in (0.1, 0.6)")
    sds = np.asarray(
        initial_sd if initial_sd is not None else McmcConfig().proposal_sd,
        dtype=float,
    )
    for round_id in range(max_rounds):
        config = McmcConfig(
            chains=1,
            iterations=pilot_iterations,
            burn_in=0,
            proposal_sd=tuple(sds),
            seed=seed + round_id,
        )
        _, _, acc = _run_single_chain(
            series, priors, config, init_params, 0, init
        )
        off = np.abs(acc - target_rate) > 0.1
        if not np.any(off):
            return tuple(float(s) for s in sds)
        sds[off] *= np.exp(2.0 * (acc[off] - target_rate))
        sds = np.clip(sds, 1e-8, 1e3)
    raise TuningFailedError(
        f"acceptance rates {acc!r} not within 0.1 of {target_rate} "
        f"after {max_rounds} pilot rounds"
    )


@dataclass(frozen=True)
class PrecisionMixture:
    """Equal-weight mixture of Gamma precision beliefs, one component per
    retained posterior draw."""

    components: tuple[GammaBelief, ...]
    horizon: int
    skipped: int = 0

    def mean_precision(self) -> float:
        return float(np.mean([c.shape / c.rate for c in self.components]))

    def mean_volatility(self) -> float:
        """Mixture mean of h; NaN when any component shape is at most 1."""
        means = [
            c.rate / (c.shape - 1.0) if c.shape > 1.0 else math.nan
            for c in self.components
        ]
        return float(np.mean(means))

    def volatility_quantiles(
        self,
        probs,
        rng: RngStream,
        draws_per_component: int = 200,
    ) -> np.ndarray:
        """Empirical quantiles of h under the mixture, by sampling each
        component equally."""
        pools = []
        for c in self.components:
            lam = sample_gamma(c.shape, c.rate, rng, size=draws_per_component)
            pools.append(1.0 / lam)
        return np.quantile(np.concatenate(pools), probs)


def latent_predictive_mixture(
    samples: PosteriorSamples,
    series: ReturnSeries,
    h: int,
    init: GammaBelief = DIFFUSE_INIT,
) -> PrecisionMixture:
    """h-step-ahead precision belief averaged over posterior draws.

    Each draw contributes the Gamma belief reached by filtering the
    series and stepping the evolution h times; draws whose filter
    diverges are skipped and counted.
    """
    h = int(h)
    if h < 1:
        raise ValueError("h must be at least 1")
    if samples.n_draws < 1:
        raise ValueError("samples must be non-empty")
    components = []
    skipped = 0
    for params in samples.draws:
        try:
            out = run_filter(series, params, init)
        except FilterDivergedError:
            skipped += 1
            continue
        fc = forecast_volatility(out.last_posterior, params, h)
        components.append(fc.beliefs[-1])
    if not components:
        raise FilterDivergedError(0, math.nan, math.nan, math.nan)
    return PrecisionMixture(tuple(components), h, skipped)


def laplace_log_evidence(
    logpost: Callable[[np.ndarray], float],
    mode,
    rel_step: float = 1e-4,
) -> float:
    """Laplace approximation around a mode of an unnormalized log-density:
    logpost(mode) + (d/2) ln(2 pi) - 0.5 ln det(-Hessian)."""
    mode = np.asarray(mode, dtype=float)
    d = mode.size
    f0 = logpost(mode)
    if not math.isfinite(f0):
        raise ValueError("logpost must be finite at the mode")
    steps = rel_step * np.maximum(1.0, np.abs(mode))
    hess = np.empty((d, d))
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = steps[i]
        hess[i, i] = (logpost(mode + ei) - 2.0 * f0 + logpost(mode - ei)) / steps[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = steps[j]
            hess[i, j] = hess[j, i] = (
                logpost(mode + ei + ej)
                - logpost(mode + ei - ej)
                - logpost(mode - ei + ej)
                + logpost(mode - ei - ej)
            ) / (4.0 * steps[i] * steps[j])
    neg_h = -hess
    try:
        chol = np.linalg.cholesky(neg_h)
    except np.linalg.LinAlgError as exc:
        raise HessianNotPDError(
            "negative Hessian at the mode is not positive definite"
        ) from exc
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return f0 + 0.5 * d * math.log(2.0 * math.pi) - 0.5 * log_det


def marginal_loglik_laplace(
    series: ReturnSeries,
    priors: PriorSpec,
    mode: StaticParams,
    init: GammaBelief = DIFFUSE_INIT,
    rel_step: float = 1e-4,
) -> float:
    """Laplace marginal log-likelihood of the model at a posterior mode.

    Differences of this value between two models give the log Bayes
    factor.  Raises HessianNotPDError when the mode's curvature is not
    negative definite (reported, never fudged).
    """

    def logpost(v: np.ndarray) -> float:
        try:
            params = StaticParams.from_array(v)
        except ValueError:
            return -math.inf
        return log_posterior(params, series, priors, init)

    return laplace_log_evidence(logpost, mode.as_array(), rel_step)
