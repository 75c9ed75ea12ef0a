"""Simulation-study harness and forecast scoring tests."""

import math

import numpy as np
import pytest

from gedsv.bench import (
    BenchError,
    CellResult,
    cell_table,
    constant_variance_forecast,
    mae,
    model_forecast_fn,
    out_of_sample_eval,
    run_design_cell,
    srmse,
)
from gedsv.inference import OptimizerOptions
from gedsv.model import ReturnSeries, SimulationDesign, params_from_design, simulate
from gedsv.special import RngStream


class TestSrmse:
    def test_identical_is_zero(self):
        assert srmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0

    def test_unit_case(self):
        assert srmse([1.0, 1.0], [0.0, 0.0]) == 1.0

    def test_hand_value(self):
        np.testing.assert_allclose(
            srmse([4.0, 0.0, 1.0], [1.0, 1.0, 1.0]), math.sqrt(10.0 / 3.0), rtol=1e-15
        )

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            srmse([1.0, 2.0], [1.0])


class TestMae:
    def test_hand_value(self):
        np.testing.assert_allclose(
            mae([4.0, 0.0, 1.0], [1.0, 1.0, 1.0]), 4.0 / 3.0, rtol=1e-15
        )

    def test_never_exceeds_srmse(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            a = rng.normal(size=n)
            b = rng.normal(size=n)
            assert mae(a, b) <= srmse(a, b) + 1e-15

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mae([], [])


class TestRunDesignCell:
    def test_single_replication_mse(self):
        design = SimulationDesign(phi=0.95, cv=1.0, r=2.0, n=400, seed=1, replications=1)
        res = run_design_cell(design)
        assert res.replications == 1 and res.failures == 0
        np.testing.assert_allclose(
            res.mse, (res.mean_estimates - res.truth) ** 2, rtol=1e-14
        )

    def test_aggregates_shape_and_determinism(self):
        design = SimulationDesign(phi=0.95, cv=1.0, r=2.0, n=300, seed=1, replications=3)
        r1 = run_design_cell(design)
        r2 = run_design_cell(design)
        np.testing.assert_array_equal(r1.mean_estimates, r2.mean_estimates)
        np.testing.assert_array_equal(r1.mse, r2.mse)
        assert r1.successes == 3
        assert (r1.mse >= 0.0).all()

    def test_fixed_r_fit_reports_r_two(self):
        design = SimulationDesign(phi=0.95, cv=1.0, r=1.0, n=300, seed=2, replications=2)
        res = run_design_cell(design, fit_r_free=False)
        np.testing.assert_allclose(res.mean_estimates[3], 2.0, rtol=1e-12)
        assert res.fit_r_free is False

    def test_failure_threshold(self, monkeypatch):
        import gedsv.bench as bench

        design = SimulationDesign(phi=0.95, cv=1.0, r=2.0, n=200, seed=3, replications=4)

        def failing(*args, **kwargs):
            return None

        monkeypatch.setattr(bench, "_fit_one_replication", failing)
        with pytest.raises(BenchError):
            run_design_cell(design)


class TestCellTable:
    def test_format(self):
        design = SimulationDesign(phi=0.9, cv=0.1, r=2.0, n=250, seed=5, replications=1)
        res = run_design_cell(design)
        text = cell_table([res])
        lines = text.strip().split("\n")
        assert len(lines) == 2
        header = lines[0].split(",")
        row = lines[1].split(",")
        assert len(header) == len(row) == 18
        assert header[0] == "phi" and header[-1] == "failures"
        assert float(row[0]) == 0.9
        assert row[4] == "250" and row[5] == "1"
        # round-trip at 17 significant digits
        idx = header.index("mean_phi")
        assert float(row[idx]) == res.mean_estimates[1]

    def test_custom_delimiter(self):
        design = SimulationDesign(phi=0.9, cv=0.1, r=2.0, n=250, seed=5, replications=1)
        res = run_design_cell(design)
        assert ";" in cell_table([res], delimiter=";")


class TestOutOfSampleEval:
    def test_oracle_forecaster_scores_zero(self):
        """A forecaster that already knows the held-out squared return
        is scored perfectly."""
        series = ReturnSeries.from_returns([1.0, -2.0, 0.5, 3.0, -1.0, 2.0], center=False)

        def oracle(train):
            return float(series.values[train.n]) ** 2

        s, m = out_of_sample_eval(series, oracle, k_max=3)
        assert s == 0.0 and m == 0.0

    def test_single_fold(self):
        series = ReturnSeries.from_returns([1.0, 2.0, 3.0], center=False)
        s, m = out_of_sample_eval(series, lambda train: 4.0, k_max=1)
        np.testing.assert_allclose(s, 5.0, rtol=1e-15)  # |9 - 4|
        np.testing.assert_allclose(m, 5.0, rtol=1e-15)

    def test_folds_see_growing_prefixes(self):
        series = ReturnSeries.from_returns(list(range(1, 11)), center=False)
        seen = []

        def spy(train):
            seen.append(train.n)
            return 0.0

        out_of_sample_eval(series, spy, k_max=4)
        assert seen == [6, 7, 8, 9]

    def test_length_validation(self):
        series = ReturnSeries.from_returns([1.0, 2.0], center=False)
        with pytest.raises(ValueError):
            out_of_sample_eval(series, lambda t: 1.0, k_max=2)
        with pytest.raises(ValueError):
            out_of_sample_eval(series, lambda t: 1.0, k_max=0)


class TestForecasters:
    def test_constant_variance(self):
        series = ReturnSeries.from_returns([1.0, -1.0, 1.0, -1.0], center=False)
        np.testing.assert_allclose(constant_variance_forecast(series), 1.0, rtol=1e-15)

    def test_model_beats_constant_on_sv_data(self):
        """On strongly heteroskedastic simulated data the model forecaster
        should outscore the constant-variance benchmark."""
        design = SimulationDesign(phi=0.95, cv=10.0, r=2.0, n=260, seed=0)
        truth = params_from_design(design)
        series, _ = simulate(truth, design.n, rng=RngStream(55, 0))
        model_fn = model_forecast_fn()
        s_model, m_model = out_of_sample_eval(series, model_fn, k_max=5)
        s_const, m_const = out_of_sample_eval(series, constant_variance_forecast, k_max=5)
        assert math.isfinite(s_model) and math.isfinite(m_model)
        assert m_model < m_const

    def test_model_forecast_positive(self):
        design = SimulationDesign(phi=0.9, cv=1.0, r=2.0, n=150, seed=0)
        truth = params_from_design(design)
        series, _ = simulate(truth, design.n, rng=RngStream(56, 0))
        val = model_forecast_fn()(series)
        assert val > 0.0
