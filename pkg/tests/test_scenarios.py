import numpy as np
import pytest

from frontdoor_lab.errors import ScenarioError
from frontdoor_lab.ols import fdc_two_step
from frontdoor_lab.scenarios import (
    ConfounderDist,
    ScenarioConfig,
    estimate_limit,
    replicate,
    replication_seed,
    scenario_params,
    scenario_truth,
    simulate,
    true_effects,
)

MIXED_ATE = 2.3 * 0.25 + 1.7 * 0.35 * 0.75


def fit(dag: int, n: int, seed: int, **fields):
    config = ScenarioConfig(dag=dag, n=n, seed=seed, **fields)
    return fdc_two_step(simulate(config).observed)


class TestTrueEffects:
    def test_dag1(self):
        effects = true_effects(ScenarioConfig(dag=1, seed=0))
        assert effects.ate == pytest.approx(0.595)
        assert effects.pate == pytest.approx(0.595)

    def test_dag2(self):
        effects = true_effects(ScenarioConfig(dag=2, seed=0))
        assert effects.ate == pytest.approx(2.895)
        assert effects.pate == pytest.approx(0.595)

    @pytest.mark.parametrize("dag", [3, 4])
    def test_mixed(self, dag):
        assert true_effects(ScenarioConfig(dag=dag, seed=0)).ate == pytest.approx(1.02125)

    def test_override(self):
        config = ScenarioConfig(dag=1, seed=0, overrides={"delta": 0.5})
        assert config.coefficients.delta == 0.5
        assert true_effects(config).ate == pytest.approx(0.85)


class TestScenarioTruth:
    def test_dag1_has_no_direct_group(self):
        params = scenario_params(ScenarioConfig(dag=1, seed=0))
        assert params.p_i == 1.0
        assert params.p_j == 0.0

    def test_dag2_gap_is_direct_effect(self):
        config = ScenarioConfig(dag=2, seed=0)
        assert scenario_params(config) is None
        truth = scenario_truth(config)
        assert truth.calculated_ate == pytest.approx(0.595)
        assert truth.calculated_bias == pytest.approx(2.3)

    @pytest.mark.parametrize("dag", [1, 2, 3, 4])
    def test_bias_identities(self, dag):
        truth = scenario_truth(ScenarioConfig(dag=dag, seed=0))
        assert abs(truth.ate - truth.calculated_ate - truth.calculated_bias) < 1e-12
        assert abs(truth.ate - truth.estimate_limit - truth.limit_bias) < 1e-12

    def test_dag4_calculated_ate(self):
        truth = scenario_truth(ScenarioConfig(dag=4, seed=0))
        # (0.35 * 0.75 + 2.3 / 5.7 * 0.25) * 2.7
        assert truth.calculated_ate == pytest.approx(0.98112, abs=1e-4)
        assert truth.calculated_bias == pytest.approx(0.04013, abs=1e-4)

    def test_dag4_limit_is_not_the_calculated_ate(self):
        truth = scenario_truth(ScenarioConfig(dag=4, seed=0))
        assert truth.estimate_limit == pytest.approx(0.864511, abs=1e-6)
        assert truth.calculated_ate - truth.estimate_limit > 0.1


class TestEstimateLimit:
    @pytest.mark.parametrize(
        "dag, expected, dropped",
        [
            (1, 0.595, False),
            (2, 0.595, False),
            # MIXED_ATE plus the backdoor term 0.2 * 0.5 / 4.25 left once X is dropped
            (3, MIXED_ATE + 0.1 / 4.25, True),
            (4, 0.864511, False),
        ],
    )
    def test_defaults(self, dag, expected, dropped):
        limit = estimate_limit(ScenarioConfig(dag=dag, seed=0))
        assert limit.fdc_estimate == pytest.approx(expected, abs=1e-6)
        assert limit.x_dropped is dropped

    def test_step1_slope_pools_group_slopes(self):
        limit = estimate_limit(ScenarioConfig(dag=4, seed=0))
        assert limit.step1_slope == pytest.approx(0.75 * 1.7 + 0.25 * 5.7, abs=1e-9)

    def test_without_confounding(self):
        overrides = {"x_confounder_loading": 0.0, "y_confounder_loading": 0.0}
        dag3 = estimate_limit(ScenarioConfig(dag=3, seed=0, overrides=overrides))
        dag4 = estimate_limit(ScenarioConfig(dag=4, seed=0, overrides=overrides))
        assert dag3.fdc_estimate == pytest.approx(MIXED_ATE, abs=1e-9)
        # 2.7 * 30.42 / 96 from the pooled step-2 normal equations
        assert dag4.fdc_estimate == pytest.approx(0.8555625, abs=1e-9)

    def test_instrument_leaves_dag1_unbiased(self):
        config = ScenarioConfig(dag=1, seed=0, with_instrument=True)
        assert estimate_limit(config).fdc_estimate == pytest.approx(0.595, abs=1e-9)

    def test_constant_treatment(self):
        overrides = {"x_confounder_loading": 0.0, "x_noise_sd": 0.0}
        with pytest.raises(ScenarioError):
            estimate_limit(ScenarioConfig(dag=1, seed=0, overrides=overrides))

    def test_dag4_sample_fit_converges_to_limit(self):
        limit = estimate_limit(ScenarioConfig(dag=4, seed=0)).fdc_estimate
        assert fit(4, 50_000, 11).fdc_estimate == pytest.approx(limit, abs=0.03)


class TestConfig:
    @pytest.mark.parametrize(
        "fields",
        [
            {"dag": 5},
            {"dag": 1, "n": 5},
            {"dag": 1, "seed": -1},
            {"dag": 1, "seed": 2**64},
            {"dag": 1, "overrides": {"gamma": 1.0}},
            {"dag": 1, "overrides": {"mediated_share": 0.5}},
            {"dag": 3, "overrides": {"mediated_share": 1.0}},
            {"dag": 2, "overrides": {"y_noise_sd": -1.0}},
        ],
    )
    def test_invalid(self, fields):
        with pytest.raises(ScenarioError):
            ScenarioConfig.create(**fields)

    def test_unknown_dag_message_lists_choices(self):
        with pytest.raises(ScenarioError, match=r"\[1, 2, 3, 4\]"):
            ScenarioConfig.create(dag=0)

    def test_seed_from_environment(self, monkeypatch):
        monkeypatch.setenv("FRONTDOOR_LAB_SEED", "99")
        assert ScenarioConfig(dag=1).seed == 99


class TestSimulate:
    def test_same_seed_same_rows(self):
        config = ScenarioConfig(dag=4, n=300, seed=42)
        first, second = simulate(config), simulate(config)
        assert first.observed.frame.equals(second.observed.frame)
        assert first.truth.equals(second.truth)

    def test_different_seed_different_rows(self):
        first = simulate(ScenarioConfig(dag=1, n=50, seed=1)).observed.frame
        second = simulate(ScenarioConfig(dag=1, n=50, seed=2)).observed.frame
        assert not first.equals(second)

    def test_columns(self):
        output = simulate(ScenarioConfig(dag=2, n=20, seed=0))
        assert list(output.observed.frame.columns) == ["X", "M", "Y"]
        assert list(output.truth.columns) == ["C", "group", "ate", "pate"]
        assert set(output.truth["group"]) == {"both"}
        assert list(output.combined().columns) == ["X", "M", "Y", "C", "group", "ate", "pate"]

    def test_instrument_column(self):
        output = simulate(ScenarioConfig(dag=1, n=20, seed=0, with_instrument=True))
        assert list(output.observed.frame.columns) == ["Z", "X", "M", "Y"]
        assert output.observed.instrument == "Z"

    def test_dag1_step1_slope(self):
        assert fit(1, 200, 3).step1["X"] == pytest.approx(1.7, abs=0.3)

    def test_dag1_confounding_structure(self):
        output = simulate(ScenarioConfig(dag=1, n=100_000, seed=4))
        c = output.truth["C"].to_numpy()
        x = output.observed.column("X")
        assert abs(c.mean()) < 4 * c.std() / np.sqrt(len(c))
        # corr(C, X) = 0.5 / sqrt(4.25)
        assert 0.22 < np.corrcoef(c, x)[0, 1] < 0.27
        m_residual = fdc_two_step(output.observed).step1.residuals
        assert abs(np.corrcoef(c, m_residual)[0, 1]) < 4 / np.sqrt(100_000)

    @pytest.mark.parametrize("dist", list(ConfounderDist))
    def test_confounder_is_standardized(self, dist):
        config = ScenarioConfig(dag=1, n=100_000, seed=5, confounder_dist=dist)
        c = simulate(config).truth["C"].to_numpy()
        assert abs(c.mean()) < 4 * c.std() / np.sqrt(len(c))
        assert c.std() == pytest.approx(1.0, abs=0.02)

    @pytest.mark.parametrize("dag", [3, 4])
    def test_exact_group_counts(self, dag):
        groups = simulate(ScenarioConfig(dag=dag, n=200, seed=6)).truth["group"]
        assert (groups == "mediated").sum() == 150
        assert (groups == "direct").sum() == 50


class TestScenarioEstimates:
    def test_dag1_product(self):
        result = fit(1, 50_000, 7)
        assert 0.575 <= result.fdc_estimate <= 0.615

    def test_dag2_product_and_direct_effect(self):
        result = fit(2, 50_000, 8)
        assert 0.575 <= result.fdc_estimate <= 0.615
        assert 2.2 <= result.step2["X"] <= 2.5

    def test_dag3_deterministic_link(self):
        result = fit(3, 200, 9)
        assert result.step1["X"] == pytest.approx(1.7, abs=1e-8)
        assert result.x_dropped
        assert result.step2.dropped == ("X",)

    def test_dag3_product(self):
        assert fit(3, 50_000, 10).fdc_estimate == pytest.approx(MIXED_ATE, abs=0.05)

    def test_dag4_pooled_slope_and_bias(self):
        result = fit(4, 50_000, 11)
        assert result.step1["X"] == pytest.approx(2.7, abs=0.05)
        assert abs(result.fdc_estimate - MIXED_ATE) > 0.05


class TestReplicate:
    def test_seeds_are_distinct(self):
        seeds = {replication_seed(2024, i) for i in range(1000)}
        assert len(seeds) == 1000
        assert replication_seed(2024, 3) == replication_seed(2024, 3)
        assert replication_seed(2024, 3) != replication_seed(2025, 3)

    def test_dag1_monte_carlo(self):
        summary = replicate(ScenarioConfig(dag=1, n=200, seed=2024), reps=500)
        assert summary.mean("fdc_estimate") == pytest.approx(0.595, abs=0.02)
        small_t = (summary.records["step2_x_t"].abs() < 3).mean()
        assert small_t >= 0.95
        assert list(summary.stats.index) == [
            "mean", "std", "q0.05", "q0.25", "q0.5", "q0.75", "q0.95"
        ]

    def test_single_replication_matches_simulate(self):
        config = ScenarioConfig(dag=2, n=200, seed=31)
        summary = replicate(config, reps=1)
        seed = replication_seed(31, 0)
        direct = fdc_two_step(simulate(config.model_copy(update={"seed": seed})).observed)
        assert summary.records.loc[0, "seed"] == seed
        assert summary.records.loc[0, "fdc_estimate"] == direct.fdc_estimate

    def test_independent_of_worker_count(self):
        config = ScenarioConfig(dag=4, n=100, seed=12)
        serial = replicate(config, reps=40, workers=1)
        threaded = replicate(config, reps=40, workers=4)
        assert serial.records.equals(threaded.records)
        assert serial.stats.equals(threaded.stats)

    def test_dag3_flags_dropped_x(self):
        summary = replicate(ScenarioConfig(dag=3, n=100, seed=13), reps=5)
        assert summary.records["x_dropped"].all()

    def test_reps_must_be_positive(self):
        with pytest.raises(ValueError):
            replicate(ScenarioConfig(dag=1, seed=0), reps=0)
