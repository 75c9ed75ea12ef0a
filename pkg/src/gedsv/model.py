"""Core model objects for the GED stochastic volatility model.

The observation y_t follows a generalized error distribution whose
precision lambda_t = 1/h_t evolves as a stationary log-AR(1).  This
module holds the parameter/belief/series types, the observation
density, forward simulation, the coefficient-of-variation design
parameterization used by the simulation benchmark, and the smooth
bijection onto unconstrained coordinates used by the optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .special import RngStream, log_gamma, psi_r, sample_ged, sample_gamma

__all__ = [
    "StaticParams",
    "GammaBelief",
    "ReturnSeries",
    "LatentPath",
    "SimulationDesign",
    "DIFFUSE_INIT",
    "psi_r",
    "ged_log_constant",
    "ged_log_density",
    "simulate",
    "params_from_design",
    "to_unconstrained",
    "from_unconstrained",
]

# Keeps a belief-sampled ln(lambda_0) representable; the diffuse default
# Gamma(0.001, 0.001) otherwise produces astronomically spread starts.
_LOG_PRECISION_CLAMP = 50.0

_PHI_MAX = float(np.nextafter(1.0, 0.0))


def _check_finite(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class StaticParams:
    """Static parameters: volatility drift alpha, persistence phi,
    evolution variance sigma_eta2, GED shape r.

    alpha is the constant of the volatility form
    ln h_t = alpha + phi ln h_{t-1} + eta; the precision form uses the
    same constant with opposite sign.
    """

    alpha: float
    phi: float
    sigma_eta2: float
    r: float

    def __post_init__(self) -> None:
        _check_finite(self.alpha, "alpha")
        phi = _check_finite(self.phi, "phi")
        if not 0.0 <= phi < 1.0:
            raise ValueError(f"phi must lie in [0, 1), got {phi!r}")
        if _check_finite(self.sigma_eta2, "sigma_eta2") <= 0.0:
            raise ValueError("sigma_eta2 must be positive")
        if _check_finite(self.r, "r") <= 0.0:
            raise ValueError("r must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha, self.phi, self.sigma_eta2, self.r])

    @staticmethod
    def from_array(v) -> "StaticParams":
        a, p, s, r = (float(x) for x in v)
        return StaticParams(a, p, s, r)


PARAM_NAMES = ("alpha", "phi", "sigma_eta2", "r")


@dataclass(frozen=True)
class GammaBelief:
    """Gamma state belief with density proportional to
    lambda^(shape-1) exp(-rate * lambda); rate is a rate, not a scale."""

    shape: float
    rate: float

    def __post_init__(self) -> None:
        if _check_finite(self.shape, "shape") <= 0.0:
            raise ValueError("shape must be positive")
        if _check_finite(self.rate, "rate") <= 0.0:
            raise ValueError("rate must be positive")

    @property
    def mean(self) -> float:
        return self.shape / self.rate


DIFFUSE_INIT = GammaBelief(0.001, 0.001)


@dataclass(frozen=True)
class ReturnSeries:
    """Observed returns, optionally centered around their sample mean."""

    values: np.ndarray
    centered: bool = False
    original_mean: float = 0.0

    def __post_init__(self) -> None:
        values = np.ascontiguousarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("values must be a one-dimensional series with n >= 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must all be finite")
        if self.centered and abs(float(values.sum())) > 1e-9 * values.size:
            raise ValueError("centered series must sum to zero within 1e-9 * n")

    @property
    def n(self) -> int:
        return int(self.values.size)

    @staticmethod
    def from_returns(values, center: bool = False) -> "ReturnSeries":
        values = np.ascontiguousarray(values, dtype=float)
        if values.size == 0:
            raise ValueError("a return series needs at least one observation")
        if not center:
            return ReturnSeries(values, centered=False, original_mean=0.0)
        mean = float(values.mean())
        return ReturnSeries(values - mean, centered=True, original_mean=mean)

    def prefix(self, m: int) -> "ReturnSeries":
        """First m observations as a plain (uncentered) series."""
        if not 1 <= m <= self.n:
            raise ValueError(f"prefix length must be in [1, {self.n}], got {m}")
        return ReturnSeries(self.values[:m].copy(), centered=False, original_mean=0.0)


@dataclass(frozen=True)
class LatentPath:
    """True latent log-precision path ln(lambda_t), t = 1..n."""

    log_precision: np.ndarray

    def __post_init__(self) -> None:
        lp = np.ascontiguousarray(self.log_precision, dtype=float)
        object.__setattr__(self, "log_precision", lp)
        if lp.ndim != 1 or not np.all(np.isfinite(lp)):
            raise ValueError("log_precision must be a finite one-dimensional path")

    @property
    def precision(self) -> np.ndarray:
        return np.exp(self.log_precision)

    @property
    def volatility(self) -> np.ndarray:
        return np.exp(-self.log_precision)


@dataclass(frozen=True)
class SimulationDesign:
    """One cell of the simulation study grid."""

    phi: float
    cv: float
    expected_var: float = 0.0009
    r: float = 2.0
    n: int = 500
    replications: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        phi = _check_finite(self.phi, "phi")
        if not 0.0 <= phi < 1.0:
            raise ValueError(f"phi must lie in [0, 1), got {phi!r}")
        if _check_finite(self.cv, "cv") <= 0.0:
            raise ValueError("cv must be positive")
        if _check_finite(self.expected_var, "expected_var") <= 0.0:
            raise ValueError("expected_var must be positive")
        if _check_finite(self.r, "r") <= 0.0:
            raise ValueError("r must be positive")
        if int(self.n) < 1 or int(self.replications) < 1:
            raise ValueError("n and replications must be positive integers")


def ged_log_constant(r: float) -> float:
    """ln of the GED normalizing constant r Gamma(3/r)^(1/2) / (2 Gamma(1/r)^(3/2))."""
    return (
        math.log(r)
        + 0.5 * log_gamma(3.0 / r)
        - math.log(2.0)
        - 1.5 * log_gamma(1.0 / r)
    )


def ged_log_density(y: float, lam: float, r: float) -> float:
    """Log-density of the GED observation given precision lam and shape r."""
    lam = float(lam)
    r = float(r)
    if not (math.isfinite(lam) and lam > 0.0):
        raise ValueError("lam must be positive and finite")
    if not (math.isfinite(r) and r > 0.0):
        raise ValueError("r must be positive and finite")
    return (
        ged_log_constant(r)
        + math.log(lam) / r
        - lam * psi_r(r) * abs(float(y)) ** r
    )


def simulate(
    params: StaticParams,
    n: int,
    init: GammaBelief | None = None,
    rng: RngStream | None = None,
) -> tuple[ReturnSeries, LatentPath]:
    """Simulate n observations and the true latent path.

    ln(lambda_t) = -alpha + phi ln(lambda_{t-1}) + eta_t with
    eta_t ~ Normal(0, sigma_eta2), then y_t ~ GED(r, lambda_t).  When
    init is None the chain starts from its stationary law; otherwise
    lambda_0 is drawn from init with ln(lambda_0) clamped to +-50.
    """
    if rng is None:
        raise ValueError("an RngStream is required")
    n = int(n)
    if n < 1:
        raise ValueError("n must be at least 1")

    if init is None:
        mean0 = -params.alpha / (1.0 - params.phi)
        var0 = params.sigma_eta2 / (1.0 - params.phi**2)
        x = mean0 + math.sqrt(var0) * float(rng.standard_normal())
    else:
        lam0 = sample_gamma(init.shape, init.rate, rng)
        # diffuse inits can underflow the draw to 0; the clamp absorbs it
        x = math.log(lam0) if lam0 > 0.0 else -math.inf
        x = min(max(x, -_LOG_PRECISION_CLAMP), _LOG_PRECISION_CLAMP)

    eta = math.sqrt(params.sigma_eta2) * rng.standard_normal(n)
    log_lam = np.empty(n)
    for t in range(n):
        x = -params.alpha + params.phi * x + eta[t]
        log_lam[t] = x

    y = sample_ged(params.r, np.exp(log_lam), rng, size=n)
    return ReturnSeries(np.asarray(y, dtype=float)), LatentPath(log_lam)


def params_from_design(design: SimulationDesign) -> StaticParams:
    """Map a (phi, cv, expected_var, r) design cell to model parameters.

    The stationary variance of ln h is pinned by the coefficient of
    variation of volatility, cv = exp(var[ln h]) - 1, and alpha is set
    so that the stationary mean of h equals expected_var.
    """
    var_log_h = math.log1p(design.cv)
    sigma_eta2 = (1.0 - design.phi**2) * var_log_h
    alpha = (1.0 - design.phi) * (math.log(design.expected_var) - 0.5 * var_log_h)
    return StaticParams(alpha, design.phi, sigma_eta2, design.r)


def to_unconstrained(params: StaticParams) -> np.ndarray:
    """Map params to R^4: alpha identity, logit(phi), ln sigma_eta2, ln r."""
    if params.phi <= 0.0 or params.phi >= 1.0:
        raise ValueError("phi must lie strictly inside (0, 1) for the logit map")
    return np.array(
        [
            params.alpha,
            math.log(params.phi / (1.0 - params.phi)),
            math.log(params.sigma_eta2),
            math.log(params.r),
        ]
    )


def from_unconstrained(v) -> StaticParams:
    """Inverse of to_unconstrained for any finite 4-vector.

    Components saturate at the edge of the representable parameter
    space (phi just below 1, variances within [1e-300, 1e300]) so large
    optimizer excursions still produce a valid parameter point.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (4,) or not np.all(np.isfinite(v)):
        raise ValueError("expected a finite 4-vector")
    if v[1] >= 0.0:
        phi = 1.0 / (1.0 + math.exp(-v[1]))
    else:
        e = math.exp(v[1])
        phi = e / (1.0 + e)
    phi = min(phi, _PHI_MAX)
    sigma_eta2 = min(max(math.exp(v[2]), 1e-300), 1e300)
    r = min(max(math.exp(v[3]), 1e-300), 1e300)
    return StaticParams(float(v[0]), phi, sigma_eta2, r)
