"""Forward filter tests: recursion identities, predictive density oracles,
Student-t equivalence, and volatility forecasting."""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad
from scipy.special import gammaincinv

from gedsv.filtering import (
    FilterDivergedError,
    FilterOutput,
    forecast_volatility,
    log_predictive_one_step,
    predict_state,
    run_filter,
    update_state,
)
from gedsv.model import (
    DIFFUSE_INIT,
    GammaBelief,
    ReturnSeries,
    SimulationDesign,
    StaticParams,
    ged_log_density,
    params_from_design,
    simulate,
)
from gedsv.special import RngStream, psi_r


def quadrature_log_predictive(prior, y, r):
    """ln of integral p(y | lambda, r) Gamma(lambda; a, b) d lambda, in u = ln lambda."""
    a, b = prior.shape, prior.rate
    log_norm = a * math.log(b) - math.lgamma(a)

    def integrand(u):
        lam = math.exp(u)
        log_gamma_term = log_norm + a * u - b * lam  # includes Jacobian lam
        return math.exp(ged_log_density(y, lam, r) + log_gamma_term)

    total, err = quad(integrand, -60, 60, limit=400)
    return math.log(total)


class TestPredictState:
    def test_worked_example(self):
        """(a=2, b=2, phi=0.9, s2=0.1, alpha=0) -> both 1/0.505."""
        p = StaticParams(alpha=0.0, phi=0.9, sigma_eta2=0.1, r=2.0)
        prior = predict_state(GammaBelief(2.0, 2.0), p)
        np.testing.assert_allclose(prior.shape, 1.0 / 0.505, rtol=1e-12)
        np.testing.assert_allclose(prior.rate, 1.0 / 0.505, rtol=1e-12)

    def test_mean_identity(self):
        """E[lambda'] = exp(-alpha) (a/b)^phi for random beliefs."""
        rng = np.random.default_rng(42)
        for _ in range(200):
            a = math.exp(rng.uniform(-6, 6))
            b = math.exp(rng.uniform(-6, 6))
            p = StaticParams(
                alpha=rng.uniform(-2, 2),
                phi=rng.uniform(0.05, 0.99),
                sigma_eta2=math.exp(rng.uniform(-7, 1)),
                r=2.0,
            )
            prior = predict_state(GammaBelief(a, b), p)
            want = math.exp(-p.alpha) * (a / b) ** p.phi
            np.testing.assert_allclose(prior.shape / prior.rate, want, rtol=1e-10)

    def test_no_noise_limit_preserves_mean(self):
        p = StaticParams(alpha=0.0, phi=0.0, sigma_eta2=1e-12, r=2.0)
        prior = predict_state(GammaBelief(2.0, 2.0), p)
        assert prior.shape > 1e11
        np.testing.assert_allclose(prior.shape / prior.rate, 1.0, rtol=1e-9)

    def test_shape_formula(self):
        p = StaticParams(alpha=0.3, phi=0.8, sigma_eta2=0.2, r=1.0)
        prior = predict_state(GammaBelief(5.0, 3.0), p)
        np.testing.assert_allclose(prior.shape, 1.0 / (0.64 / 5.0 + 0.2), rtol=1e-12)


class TestUpdateState:
    def test_worked_example(self):
        post = update_state(GammaBelief(1.9802, 1.9802), 1.0, 2.0)
        np.testing.assert_allclose(post.shape, 2.4802, rtol=1e-12)
        np.testing.assert_allclose(post.rate, 2.4802, rtol=1e-12)

    def test_zero_observation(self):
        post = update_state(GammaBelief(3.0, 5.0), 0.0, 1.7)
        np.testing.assert_allclose(post.shape, 3.0 + 1.0 / 1.7, rtol=1e-14)
        assert post.rate == 5.0

    def test_laplace_increment(self):
        post = update_state(GammaBelief(1.0, 1.0), -2.0, 1.0)
        np.testing.assert_allclose(post.rate, 1.0 + math.sqrt(2.0) * 2.0, rtol=1e-12)


class TestLogPredictive:
    def test_student_t_equivalence(self):
        """r=2 predictive is Student-t with 2a dof and scale sqrt(b/a)."""
        rng = np.random.default_rng(7)
        for _ in range(8):
            a = math.exp(rng.uniform(-2, 4))
            b = math.exp(rng.uniform(-2, 4))
            ys = np.linspace(-5, 5, 50) * math.sqrt(b / a)
            want = stats.t.logpdf(ys, df=2 * a, loc=0.0, scale=math.sqrt(b / a))
            got = [log_predictive_one_step(GammaBelief(a, b), y, 2.0) for y in ys]
            np.testing.assert_allclose(got, want, rtol=1e-10)

    def test_quadrature_worked_example(self):
        prior = GammaBelief(2.0, 2.0)
        for y in range(-3, 4):
            want = quadrature_log_predictive(prior, float(y), 2.0)
            got = log_predictive_one_step(prior, float(y), 2.0)
            np.testing.assert_allclose(got, want, atol=1e-8)

    def test_quadrature_random_tuples(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            a = math.exp(rng.uniform(-1.5, 3))
            b = math.exp(rng.uniform(-1.5, 3))
            r = math.exp(rng.uniform(math.log(0.8), math.log(3.0)))
            y = rng.normal() * (b / a) ** (1.0 / r)
            want = quadrature_log_predictive(GammaBelief(a, b), y, r)
            got = log_predictive_one_step(GammaBelief(a, b), y, r)
            np.testing.assert_allclose(math.exp(got), math.exp(want), rtol=1e-6)

    def test_integrates_to_one(self):
        for a, b, r in ((2.0, 2.0, 2.0), (0.7, 1.3, 1.0), (5.0, 0.5, 1.5)):
            total, err = quad(
                lambda y: math.exp(log_predictive_one_step(GammaBelief(a, b), y, r)),
                -np.inf,
                np.inf,
                limit=400,
            )
            assert abs(total - 1.0) <= max(1e-7, 10 * err)

    def test_zero_observation_finite(self):
        v = log_predictive_one_step(GammaBelief(2.0, 2.0), 0.0, 2.0)
        assert math.isfinite(v)
        # matches the r=2 Student-t at zero
        want = stats.t.logpdf(0.0, df=4.0, scale=1.0)
        np.testing.assert_allclose(v, want, rtol=1e-10)


class TestRunFilter:
    def test_single_step_composition(self):
        y1 = 0.8
        series = ReturnSeries.from_returns([y1], center=False)
        p = StaticParams(-0.3, 0.9, 0.05, 2.0)
        init = GammaBelief(1.5, 2.5)
        out = run_filter(series, p, init)
        prior = predict_state(init, p)
        np.testing.assert_allclose(out.priors[0].shape, prior.shape, rtol=1e-12)
        np.testing.assert_allclose(out.priors[0].rate, prior.rate, rtol=1e-12)
        np.testing.assert_allclose(
            out.total_loglik, log_predictive_one_step(prior, y1, 2.0), rtol=1e-12
        )

    def test_shape_increment_exact(self):
        """a_t = a_(t|t-1) + 1/r bit for bit at every t."""
        p = StaticParams(-0.368, 0.95, 0.068, 1.3)
        series, _ = simulate(p, 200, rng=RngStream(3, 0))
        out = run_filter(series, p)
        np.testing.assert_array_equal(out.a_post, out.a_prior + 1.0 / 1.3)

    def test_total_is_sum(self):
        p = StaticParams(-0.368, 0.95, 0.068, 2.0)
        series, _ = simulate(p, 300, rng=RngStream(4, 0))
        out = run_filter(series, p)
        np.testing.assert_allclose(out.total_loglik, out.log_predictive.sum(), atol=1e-10)

    def test_mean_identity_along_run(self):
        """a'/b' = exp(-alpha) (a/b)^phi at every step of a real run."""
        p = StaticParams(-0.5, 0.9, 0.1, 2.0)
        series, _ = simulate(p, 150, rng=RngStream(5, 0))
        out = run_filter(series, p)
        prev_shape = np.concatenate(([DIFFUSE_INIT.shape], out.a_post[:-1]))
        prev_lograte = np.concatenate(([math.log(DIFFUSE_INIT.rate)], out.log_b_post[:-1]))
        want = -p.alpha + p.phi * (np.log(prev_shape) - prev_lograte)
        got = np.log(out.a_prior) - out.log_b_prior
        np.testing.assert_allclose(got, want, atol=1e-10)

    def test_total_matches_quadrature_oracle(self):
        """Marginal log-likelihood equals the sum of quadrature one-step terms."""
        p = StaticParams(-0.368, 0.95, 0.068, 2.0)
        series, _ = simulate(p, 50, rng=RngStream(6, 0))
        out = run_filter(series, p)
        oracle = sum(
            quadrature_log_predictive(prior, y, p.r)
            for prior, y in zip(out.priors, series.values)
        )
        np.testing.assert_allclose(out.total_loglik, oracle, atol=1e-6)

    def test_representation_invariance(self):
        """Kernel output equals composing the scalar public operations."""
        p = StaticParams(-0.4, 0.92, 0.07, 1.4)
        series, _ = simulate(p, 120, rng=RngStream(7, 0))
        out = run_filter(series, p)
        belief = DIFFUSE_INIT
        for t, y in enumerate(series.values):
            prior = predict_state(belief, p)
            np.testing.assert_allclose(prior.shape, out.a_prior[t], rtol=1e-9)
            np.testing.assert_allclose(
                math.log(prior.rate), out.log_b_prior[t], atol=1e-9
            )
            np.testing.assert_allclose(
                log_predictive_one_step(prior, y, p.r),
                out.log_predictive[t],
                atol=1e-9,
            )
            belief = update_state(prior, y, p.r)

    def test_likelihood_discrimination(self):
        """True params beat phi=0.5 in at least 95 of 100 replications."""
        design = SimulationDesign(phi=0.95, cv=1.0, r=2.0, n=500, seed=0)
        truth = params_from_design(design)
        wrong = StaticParams(truth.alpha, 0.5, truth.sigma_eta2, truth.r)
        wins = 0
        for rep in range(100):
            series, _ = simulate(truth, design.n, rng=RngStream(900 + rep, 0))
            wins += (
                run_filter(series, truth).total_loglik
                > run_filter(series, wrong).total_loglik
            )
        assert wins >= 95

    def test_diverged_error_payload(self):
        series = ReturnSeries.from_returns([0.5, -1.0, 2.0, 0.3], center=False)
        with pytest.raises(FilterDivergedError) as exc:
            run_filter(series, StaticParams(1e308, 0.5, 0.1, 2.0))
        assert exc.value.t == 3
        assert exc.value.y == 0.3
        assert not math.isfinite(exc.value.log_rate)

    def test_zero_return_in_series(self):
        series = ReturnSeries.from_returns([0.4, 0.0, -0.2], center=False)
        p = StaticParams(-0.3, 0.9, 0.05, 2.0)
        out = run_filter(series, p)
        assert np.isfinite(out.log_predictive).all()
        # rate unchanged through the zero observation
        np.testing.assert_allclose(out.log_b_post[1], out.log_b_prior[1], rtol=1e-12)

    def test_diffuse_init_default(self):
        p = StaticParams(-0.3, 0.9, 0.05, 2.0)
        series = ReturnSeries.from_returns([1.0, 2.0], center=False)
        out = run_filter(series, p)
        prior0 = predict_state(DIFFUSE_INIT, p)
        np.testing.assert_allclose(out.priors[0].shape, prior0.shape, rtol=1e-12)

    def test_output_views(self):
        p = StaticParams(-0.3, 0.9, 0.05, 2.0)
        series, _ = simulate(p, 10, rng=RngStream(8, 0))
        out = run_filter(series, p)
        assert out.n == 10
        assert len(out.priors) == 10 and len(out.posteriors) == 10
        assert isinstance(out.priors[0], GammaBelief)
        lp = out.last_posterior
        np.testing.assert_allclose(lp.shape, out.a_post[-1], rtol=1e-15)
        np.testing.assert_allclose(math.log(lp.rate), out.log_b_post[-1], rtol=1e-12)


class TestForecastVolatility:
    def test_persistence_limit_mean(self):
        """phi -> 1 with vanishing noise keeps E[h] at b/(a-1) = 2."""
        p = StaticParams(alpha=0.0, phi=1 - 1e-9, sigma_eta2=1e-12, r=2.0)
        fc = forecast_volatility(GammaBelief(3.0, 4.0), p, 1)
        np.testing.assert_allclose(fc.means[0], 2.0, rtol=1e-6)

    def test_static_no_noise_behavior(self):
        # phi = 0 forgets the posterior: a' = 1/s2, ln b' = alpha - ln s2
        p = StaticParams(alpha=0.0, phi=0.0, sigma_eta2=0.01, r=2.0)
        fc = forecast_volatility(GammaBelief(3.0, 4.0), p, 1)
        a, b = fc.beliefs[0].shape, fc.beliefs[0].rate
        np.testing.assert_allclose(a, 100.0, rtol=1e-12)
        np.testing.assert_allclose(b, 100.0, rtol=1e-12)
        np.testing.assert_allclose(fc.means[0], 100.0 / 99.0, rtol=1e-12)

    def test_quantile_oracle(self):
        """P(1/lambda <= q) equals 0.025 and 0.975 by the incomplete-gamma CDF."""
        p = StaticParams(-0.368, 0.95, 0.068, 2.0)
        fc = forecast_volatility(GammaBelief(5.0, 3.0), p, 3)
        for k in range(3):
            a, b = fc.beliefs[k].shape, fc.beliefs[k].rate
            dist = stats.gamma(a, scale=1.0 / b)
            np.testing.assert_allclose(dist.cdf(1.0 / fc.upper95[k]), 0.025, atol=1e-6)
            np.testing.assert_allclose(dist.cdf(1.0 / fc.lower95[k]), 0.975, atol=1e-6)

    def test_horizon_composition(self):
        p = StaticParams(-0.368, 0.95, 0.068, 2.0)
        last = GammaBelief(5.0, 3.0)
        fc2 = forecast_volatility(last, p, 2)
        step1 = predict_state(last, p)
        step2 = predict_state(step1, p)
        np.testing.assert_allclose(fc2.beliefs[1].shape, step2.shape, rtol=1e-12)
        np.testing.assert_allclose(fc2.beliefs[1].rate, step2.rate, rtol=1e-12)

    def test_mean_unavailable_when_shape_small(self):
        p = StaticParams(alpha=0.0, phi=0.9, sigma_eta2=0.1, r=2.0)
        fc = forecast_volatility(GammaBelief(0.5, 1.0), p, 1)
        assert fc.beliefs[0].shape < 1.0
        assert math.isnan(fc.means[0])
        assert math.isfinite(fc.lower95[0]) and math.isfinite(fc.upper95[0])

    def test_band_orders_mean(self):
        p = StaticParams(-0.368, 0.95, 0.068, 2.0)
        series, _ = simulate(p, 400, rng=RngStream(9, 0))
        out = run_filter(series, p)
        fc = forecast_volatility(out.last_posterior, p, 5)
        assert (fc.lower95 < fc.means).all() and (fc.means < fc.upper95).all()

    def test_formula_cross_check(self):
        a, b = 7.0, 5.0
        p = StaticParams(-0.368, 0.95, 0.068, 2.0)
        fc = forecast_volatility(GammaBelief(a, b), p, 1)
        a1, b1 = fc.beliefs[0].shape, fc.beliefs[0].rate
        np.testing.assert_allclose(fc.means[0], b1 / (a1 - 1.0), rtol=1e-12)
        np.testing.assert_allclose(
            fc.upper95[0], b1 / gammaincinv(a1, 0.025), rtol=1e-10
        )
        np.testing.assert_allclose(
            fc.lower95[0], b1 / gammaincinv(a1, 0.975), rtol=1e-10
        )

    def test_horizon_validation(self):
        p = StaticParams(-0.368, 0.95, 0.068, 2.0)
        with pytest.raises(ValueError):
            forecast_volatility(GammaBelief(2.0, 2.0), p, 0)
