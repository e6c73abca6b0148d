import numpy as np
import pandas as pd
import pytest
from scipy import integrate, special

from frontdoor_lab.errors import EstimationError, MissingColumnError
from frontdoor_lab.ols import (
    Dataset,
    fdc_two_step,
    iv_2sls,
    naive_ols_effect,
    ols_fit,
    t_pvalue,
)
from frontdoor_lab.population import complier_late, instrument_cells
from frontdoor_lab.scenarios import ScenarioConfig, simulate, simulate_complier_world


def student_t_tail(t: float, df: int) -> float:
    """P(|T| >= |t|) by quadrature of the Student-t density."""
    log_norm = (
        special.gammaln((df + 1) / 2)
        - special.gammaln(df / 2)
        - 0.5 * np.log(df * np.pi)
    )

    def density(s: float) -> float:
        return np.exp(log_norm - (df + 1) / 2 * np.log1p(s * s / df))

    inner, _ = integrate.quad(density, 0.0, abs(t), epsabs=1e-14, epsrel=1e-14, limit=200)
    return 1.0 - 2.0 * inner


class TestOlsFit:
    def test_three_points(self):
        fit = ols_fit(np.array([1.0, 2.0, 4.0]), {"x": np.array([0.0, 1.0, 2.0])})
        assert fit["x"] == pytest.approx(1.5, abs=1e-12)
        assert fit["Intercept"] == pytest.approx(5 / 6, abs=1e-12)
        assert fit.df == 1

    def test_perfect_fit(self):
        x = np.array([0.0, 1.0, 3.0, 4.0, 7.0])
        fit = ols_fit(2 * x + 1, {"x": x})
        assert fit["x"] == pytest.approx(2.0, abs=1e-12)
        assert fit["Intercept"] == pytest.approx(1.0, abs=1e-12)
        assert fit.residual_variance == pytest.approx(0.0, abs=1e-20)

    def test_collinear_regressor_dropped(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=50)
        y = 3 * x + rng.normal(size=50)
        fit = ols_fit(y, {"x": x, "twice_x": 2 * x})
        assert fit.dropped == ("twice_x",)
        assert np.isnan(fit["twice_x"])
        assert fit["x"] == pytest.approx(3.0, abs=0.5)

    def test_too_few_observations(self):
        with pytest.raises(EstimationError):
            ols_fit(np.array([1.0, 2.0]), {"x": np.array([0.0, 1.0])})

    def test_standard_errors_match_textbook_formula(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=40)
        y = 0.5 + 1.2 * x + rng.normal(size=40)
        fit = ols_fit(y, {"x": x})
        design = np.column_stack([np.ones(40), x])
        expected = np.sqrt(np.diag(np.linalg.inv(design.T @ design)) * fit.residual_variance)
        assert fit.coefficient("x").std_error == pytest.approx(expected[1], rel=1e-10)
        assert fit.coefficient("Intercept").std_error == pytest.approx(expected[0], rel=1e-10)


class TestTPvalue:
    def test_center(self):
        assert t_pvalue(0.0, 7) == 1.0

    def test_cauchy_quartile(self):
        assert t_pvalue(1.0, 1) == pytest.approx(0.5, abs=1e-15)

    def test_infinite_statistic(self):
        assert t_pvalue(float("inf"), 10) == 0.0

    def test_matches_quadrature(self):
        grid = [(t, df) for t in (0.3, 1.0, 1.96, 2.5, 4.0) for df in (1, 5, 30, 198)]
        assert len(grid) == 20
        for t, df in grid:
            assert t_pvalue(t, df) == pytest.approx(student_t_tail(t, df), abs=1e-8)
            assert t_pvalue(-t, df) == t_pvalue(t, df)

    def test_invalid_df(self):
        with pytest.raises(ValueError):
            t_pvalue(1.0, 0)


class TestTwoStep:
    def test_exact_chain(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=300)
        m = 2 * x + 0.01 * rng.normal(size=300)
        data = Dataset(frame=pd.DataFrame({"X": x, "M": m, "Y": 3 * m}))
        result = fdc_two_step(data)
        assert result.fdc_estimate == pytest.approx(6.0, abs=0.01)
        assert not result.x_dropped

    def test_constant_mediator_rejected(self):
        frame = pd.DataFrame(
            {"X": [0.0, 1.0, 2.0, 3.0], "M": 1.0, "Y": [1.0, 0.0, 2.0, 1.0]}
        )
        data = Dataset(frame=frame)
        with pytest.raises(EstimationError, match="Assumption 1"):
            fdc_two_step(data)

    def test_missing_column(self):
        data = Dataset(frame=pd.DataFrame({"X": [0.0, 1.0], "Y": [1.0, 2.0]}))
        with pytest.raises(MissingColumnError) as e:
            fdc_two_step(data)
        assert e.value.column == "M"

    def test_residuals_orthogonal_to_regressors(self):
        for dag in (1, 2, 3, 4):
            data = simulate(ScenarioConfig(dag=dag, n=200, seed=17)).observed
            result = fdc_two_step(data)
            for fit, columns in (
                (result.step1, {"X": data.column("X")}),
                (result.step2, {"M": data.column("M"), "X": data.column("X")}),
            ):
                for name in fit.retained:
                    values = np.ones(data.n) if name == "Intercept" else columns[name]
                    assert abs(values @ fit.residuals) < 1e-8

    def test_sobel_standard_error(self):
        data = simulate(ScenarioConfig(dag=1, n=200, seed=3)).observed
        result = fdc_two_step(data)
        beta = result.step1.coefficient("X")
        delta = result.step2.coefficient("M")
        expected = np.hypot(beta.estimate * delta.std_error, delta.estimate * beta.std_error)
        assert result.sobel_std_error == pytest.approx(expected)
        assert 0.0 <= result.sobel_p_value <= 1.0

    def test_naive_ols_is_confounded(self):
        data = simulate(ScenarioConfig(dag=1, n=50_000, seed=8)).observed
        # 0.595 plus the backdoor term 0.2 * 0.5 / 4.25
        assert naive_ols_effect(data) == pytest.approx(0.6185, abs=0.02)


class TestIv2sls:
    def test_instrument_equal_to_treatment_is_ols(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=500)
        y = 1.0 + 0.7 * x + rng.normal(size=500)
        data = Dataset(frame=pd.DataFrame({"X": x, "Z": x, "Y": y}), instrument="Z")
        iv = iv_2sls(data)
        ols = ols_fit(y, {"X": x})
        assert iv["X"] == pytest.approx(ols["X"], abs=1e-10)
        assert iv["Intercept"] == pytest.approx(ols["Intercept"], abs=1e-10)
        assert not iv.weak_instrument

    def test_exact_complier_data_recovers_late(self, complier_population):
        rows = []
        for cell in instrument_cells(complier_population):
            rows += [(cell.z, cell.x, cell.y)] * round(cell.probability * 100)
        frame = pd.DataFrame(rows, columns=["Z", "X", "Y"]).astype(float)
        iv = iv_2sls(Dataset(frame=frame, instrument="Z"))
        assert iv["X"] == pytest.approx(complier_late(complier_population), abs=1e-10)

    def test_sampled_complier_world(self, complier_population):
        data = simulate_complier_world(complier_population, n=10_000, seed=12)
        iv = iv_2sls(data)
        row = iv.coefficient("X")
        assert abs(row.estimate - complier_late(complier_population)) < 3 * row.std_error

    def test_confounded_dag_recovers_structural_slope(self):
        config = ScenarioConfig(dag=1, n=100_000, seed=3, with_instrument=True)
        data = simulate(config).observed
        iv = iv_2sls(data)
        row = iv.coefficient("X")
        assert abs(row.estimate - 0.595) < 3 * row.std_error
        # OLS keeps the backdoor term 0.2 * 0.5 / 5.25
        assert abs(naive_ols_effect(data) - 0.595) > 3 * row.std_error
        assert not iv.weak_instrument

    def test_unrelated_instrument_is_weak(self):
        x = np.linspace(-1.0, 1.0, 201)
        # cov(x, x^2) vanishes on a symmetric grid; first-stage |t| is about 0.27
        z = x**2 + 0.01 * x
        y = 0.5 * x + 0.1 * np.sin(7 * x)
        iv = iv_2sls(Dataset(frame=pd.DataFrame({"Z": z, "X": x, "Y": y}), instrument="Z"))
        assert abs(iv.first_stage.coefficient("Z").t_value) < 1.0
        assert iv.weak_instrument is True

    def test_strong_instrument_is_not_weak(self):
        data = simulate(ScenarioConfig(dag=1, n=1000, seed=4, with_instrument=True)).observed
        iv = iv_2sls(data)
        assert abs(iv.first_stage.coefficient("Z").t_value) > 3.0
        assert iv.weak_instrument is False

    def test_instrument_required(self):
        data = Dataset(frame=pd.DataFrame({"X": [0.0, 1.0, 2.0], "Y": [1.0, 2.0, 2.0]}))
        with pytest.raises(EstimationError):
            iv_2sls(data)
