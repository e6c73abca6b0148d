"""
Seeded data-generating processes for the four linear DAG scenarios, plus
constructors for exact binary populations.

DAG 1   C -> X, C -> Y, X -> M -> Y                     (all front-door assumptions hold)
DAG 2   DAG 1 plus a direct X -> Y edge for every unit   (uniqueness violated)
DAG 3   75% of units X -> M -> Y, 25% X -> Y; one deterministic X -> M line (Case 1)
DAG 4   as DAG 3, but the direct group has its own X -> M slope (Case 2)

Every noise term and the confounder come from numpy's PCG64 bit generator seeded
with ScenarioConfig.seed; normals use Generator.standard_normal (ziggurat). Draw
order is fixed, so a config always reproduces the same rows within one build.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import StrEnum
from typing import Any

import numpy as np
import pandas as pd
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from frontdoor_lab.bias import (
    MixedPathParams,
    case2_ate_cal,
    case2_bias,
    other_path_gap,
)
from frontdoor_lab.config import MAX_SEED, default_seed
from frontdoor_lab.errors import ScenarioError
from frontdoor_lab.ols import CONDITION_LIMIT, Dataset, fdc_two_step
from frontdoor_lab.population import (
    BinaryPopulation,
    InstrumentPopulation,
    SubgroupSpec,
    UnitPotentials,
)

logger = logging.getLogger(__name__)

MIN_UNITS = 10
SUMMARY_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


class ConfounderDist(StrEnum):
    """Confounder law. Only NORMAL satisfies the mean-zero normal assumption."""

    NORMAL = "normal"
    UNIFORM = "uniform"
    SKEWED = "skewed"


class Coefficients(BaseModel):
    """Structural coefficients and noise scales of a DAG scenario.

    beta_j is the direct group's X -> M slope (DAG 3/4); None means it shares beta.
    mediated_share is P(i), the share of units on the mediated path (DAG 3/4).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    confounder_mean: float = 0.0
    confounder_sd: float = 1.0
    x_intercept: float = 2.0
    x_confounder_loading: float = 0.5
    x_noise_sd: float = 2.0
    instrument_loading: float = 1.0
    m_intercept: float = 4.5
    beta: float = 1.7
    beta_j: float | None = None
    m_noise_sd: float = 2.0
    y_intercept: float = 7.0
    delta: float = 0.35
    direct_effect: float = 0.0
    y_confounder_loading: float = 0.2
    y_noise_sd: float = 1.0
    mediated_share: float = 1.0

    @field_validator("confounder_sd", "x_noise_sd", "m_noise_sd", "y_noise_sd")
    @classmethod
    def validate_scale(cls, v):
        if v < 0:
            raise ValueError("Standard deviations must be nonnegative")
        return v

    @property
    def direct_group_beta(self) -> float:
        return self.beta if self.beta_j is None else self.beta_j


DAG_DEFAULTS: dict[int, dict[str, float]] = {
    1: {},
    2: {"y_intercept": 8.0, "direct_effect": 2.3},
    3: {
        "m_intercept": 5.0,
        "m_noise_sd": 0.0,
        "direct_effect": 2.3,
        "mediated_share": 0.75,
    },
    4: {
        "m_intercept": 5.0,
        "m_noise_sd": 0.0,
        "direct_effect": 2.3,
        "mediated_share": 0.75,
        "beta_j": 5.7,
    },
}
MIXED_DAGS = (3, 4)


class ScenarioConfig(BaseModel):
    """Everything that determines one simulated dataset."""

    model_config = ConfigDict(frozen=True)

    dag: int
    n: int = 200
    seed: int = Field(default_factory=default_seed)
    overrides: dict[str, float] = Field(default_factory=dict)
    confounder_dist: ConfounderDist = ConfounderDist.NORMAL
    with_instrument: bool = False

    @field_validator("dag")
    @classmethod
    def validate_dag(cls, v):
        if v not in DAG_DEFAULTS:
            raise ValueError(f"Unknown DAG {v}; available: {sorted(DAG_DEFAULTS)}")
        return v

    @field_validator("n")
    @classmethod
    def validate_n(cls, v):
        if v < MIN_UNITS:
            raise ValueError(f"n must be at least {MIN_UNITS}, got {v}")
        return v

    @field_validator("seed")
    @classmethod
    def validate_seed(cls, v):
        if not 0 <= v < MAX_SEED:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {v}")
        return v

    @field_validator("overrides")
    @classmethod
    def validate_override_keys(cls, v):
        unknown = sorted(set(v) - set(Coefficients.model_fields))
        if unknown:
            raise ValueError(
                f"Unknown coefficient override(s): {', '.join(unknown)}. "
                f"Available: {', '.join(Coefficients.model_fields)}"
            )
        return v

    @model_validator(mode="after")
    def validate_groups(self):
        coefficients = self.coefficients
        if self.dag in MIXED_DAGS:
            if not 0 < coefficients.mediated_share < 1:
                raise ValueError("mediated_share must be in (0, 1) for DAG 3 and 4")
        elif "mediated_share" in self.overrides or "beta_j" in self.overrides:
            raise ValueError("mediated_share and beta_j apply to DAG 3 and 4 only")
        return self

    @classmethod
    def create(cls, **fields: Any) -> "ScenarioConfig":
        """Validate fields, reporting any problem as a ScenarioError."""
        try:
            return cls(**fields)
        except ValidationError as e:
            problems = "; ".join(error["msg"] for error in e.errors())
            raise ScenarioError(f"Invalid scenario: {problems}") from e

    @property
    def coefficients(self) -> Coefficients:
        return Coefficients(**(DAG_DEFAULTS[self.dag] | self.overrides))


@dataclass(frozen=True, kw_only=True)
class TrueEffects:
    ate: float
    pate: float


@dataclass(frozen=True, kw_only=True)
class SimOutput:
    """Observed columns plus the row-aligned truth sidecar."""

    config: ScenarioConfig
    observed: Dataset
    truth: pd.DataFrame
    effects: TrueEffects

    def combined(self) -> pd.DataFrame:
        return pd.concat([self.observed.frame, self.truth], axis=1)


def true_effects(config: ScenarioConfig) -> TrueEffects:
    c = config.coefficients
    mediated = c.beta * c.delta
    if config.dag in MIXED_DAGS:
        pate = mediated * c.mediated_share
        return TrueEffects(ate=pate + c.direct_effect * (1 - c.mediated_share), pate=pate)
    return TrueEffects(ate=mediated + c.direct_effect, pate=mediated)


def scenario_params(config: ScenarioConfig) -> MixedPathParams | None:
    """Mixed-path parameters of a scenario; DAG 2 has no direct-only group."""
    c = config.coefficients
    match config.dag:
        case 1:
            return MixedPathParams(
                p_i=1.0, p_j=0.0, c_i=c.delta, n_j=c.direct_effect, m_i=c.beta, m_j=c.beta
            )
        case 2:
            return None
        case _:
            return MixedPathParams(
                p_i=c.mediated_share,
                p_j=1 - c.mediated_share,
                c_i=c.delta,
                n_j=c.direct_effect,
                m_i=c.beta,
                m_j=c.direct_group_beta,
            )


@dataclass(frozen=True, kw_only=True)
class EstimateLimit:
    """Population limit of the two-step fit for a scenario, as n grows without bound."""

    step1_slope: float
    step2_mediator: float
    x_dropped: bool

    @property
    def fdc_estimate(self) -> float:
        return self.step1_slope * self.step2_mediator


# Second-moment matrix layout.
ONE, X_ROW, M_ROW, Y_ROW = range(4)


def _group_forms(config: ScenarioConfig) -> list[tuple[float, np.ndarray]]:
    """(share, rows 1/X/M/Y) per unit group.

    Each row holds a variable's coefficients on the independent, unit-variance terms
    (1, confounder draw, e_x, Z, e_m, e_y), so E[uv] within a group is a dot product.
    """
    c = config.coefficients
    one, draw, e_x, z, e_m, e_y = np.eye(6)
    confounder = c.confounder_mean * one + c.confounder_sd * draw
    x = c.x_intercept * one + c.x_confounder_loading * confounder + c.x_noise_sd * e_x
    if config.with_instrument:
        x = x + c.instrument_loading * z
    y_rest = c.y_intercept * one + c.y_confounder_loading * confounder + c.y_noise_sd * e_y
    if config.dag in MIXED_DAGS:
        groups = [
            (c.mediated_share, c.beta, c.delta, 0.0),
            (1 - c.mediated_share, c.direct_group_beta, 0.0, c.direct_effect),
        ]
    else:
        groups = [(1.0, c.beta, c.delta, c.direct_effect)]
    forms = []
    for share, slope, m_weight, x_weight in groups:
        m = c.m_intercept * one + slope * x + c.m_noise_sd * e_m
        y = y_rest + m_weight * m + x_weight * x
        forms.append((share, np.stack([one, x, m, y])))
    return forms


def _population_fit(
    moments: np.ndarray, regressors: list[int], target: int
) -> np.ndarray | None:
    """Normal-equation solution on population moments; None past the condition limit."""
    block = moments[np.ix_(regressors, regressors)]
    norms = np.sqrt(np.diag(block))
    if np.any(norms == 0):
        return None
    if np.linalg.cond(block / np.outer(norms, norms)) > CONDITION_LIMIT:
        return None
    return np.linalg.solve(block, moments[regressors, target])


def estimate_limit(config: ScenarioConfig) -> EstimateLimit:
    """Exact large-sample value of the two-step estimate, confounding and pooling included.

    Step 2 drops X under the same condition limit the sample fit uses, which happens
    when every group shares one noiseless X -> M line (DAG 3).
    """
    moments = sum(share * rows @ rows.T for share, rows in _group_forms(config))
    step1 = _population_fit(moments, [ONE, X_ROW], M_ROW)
    if step1 is None:
        raise ScenarioError(f"DAG {config.dag}: the treatment has no variance")
    step2 = _population_fit(moments, [ONE, M_ROW, X_ROW], Y_ROW)
    x_dropped = step2 is None
    if x_dropped:
        step2 = _population_fit(moments, [ONE, M_ROW], Y_ROW)
        if step2 is None:
            raise ScenarioError(f"DAG {config.dag}: the mediator has no variance")
    return EstimateLimit(
        step1_slope=float(step1[1]), step2_mediator=float(step2[1]), x_dropped=x_dropped
    )


@dataclass(frozen=True, kw_only=True)
class ScenarioTruth:
    """Analytic effects next to two reference values for the two-step estimate.

    estimate_limit is what the estimate converges to (confounding and the pooled fit
    included); limit_bias is ate minus that. calculated_ate is the pooled-population
    value from the mixed-path formulas, and calculated_bias its gap from the ate (the
    other-path gap for DAG 2). The formulas ignore confounding and assume X leaves
    step 2, so in DAG 4, where X stays in, the two references differ.
    """

    ate: float
    pate: float
    estimate_limit: float
    limit_bias: float
    calculated_ate: float
    calculated_bias: float


def scenario_truth(config: ScenarioConfig) -> ScenarioTruth:
    effects = true_effects(config)
    params = scenario_params(config)
    if params is None:
        # the formulas credit the mediated path only
        calculated = effects.pate
        bias = other_path_gap(effects.ate, effects.pate)
    else:
        calculated = case2_ate_cal(params)
        bias = case2_bias(params).epsilon
    limit = estimate_limit(config).fdc_estimate
    return ScenarioTruth(
        ate=effects.ate,
        pate=effects.pate,
        estimate_limit=limit,
        limit_bias=effects.ate - limit,
        calculated_ate=calculated,
        calculated_bias=bias,
    )


def _draw_confounder(
    rng: np.random.Generator, n: int, dist: ConfounderDist, mean: float, sd: float
) -> np.ndarray:
    match dist:
        case ConfounderDist.NORMAL:
            draws = rng.standard_normal(n)
        case ConfounderDist.UNIFORM:
            draws = rng.uniform(-math.sqrt(3), math.sqrt(3), n)
        case ConfounderDist.SKEWED:
            draws = rng.standard_exponential(n) - 1.0
    return mean + sd * draws


def _direct_group_mask(rng: np.random.Generator, n: int, share: float) -> np.ndarray:
    """Exactly round(share * n) mediated units, placed by a seeded permutation."""
    n_mediated = math.floor(share * n + 0.5)
    mask = np.zeros(n, dtype=bool)
    mask[rng.permutation(n)[n_mediated:]] = True
    return mask


def simulate(config: ScenarioConfig) -> SimOutput:
    c = config.coefficients
    n = config.n
    rng = np.random.Generator(np.random.PCG64(config.seed))

    confounder = _draw_confounder(
        rng, n, config.confounder_dist, c.confounder_mean, c.confounder_sd
    )
    instrument = rng.standard_normal(n) if config.with_instrument else None
    e_x, e_m, e_y = (rng.standard_normal(n) for _ in range(3))

    x = c.x_intercept + c.x_confounder_loading * confounder + c.x_noise_sd * e_x
    if instrument is not None:
        x = x + c.instrument_loading * instrument

    if config.dag in MIXED_DAGS:
        is_direct = _direct_group_mask(rng, n, c.mediated_share)
        slope = np.where(is_direct, c.direct_group_beta, c.beta)
        m = c.m_intercept + slope * x + c.m_noise_sd * e_m
        path = np.where(is_direct, c.direct_effect * x, c.delta * m)
        y = c.y_intercept + path + c.y_confounder_loading * confounder + c.y_noise_sd * e_y
        group = np.where(is_direct, "direct", "mediated")
    else:
        m = c.m_intercept + c.beta * x + c.m_noise_sd * e_m
        y = (
            c.y_intercept
            + c.delta * m
            + c.direct_effect * x
            + c.y_confounder_loading * confounder
            + c.y_noise_sd * e_y
        )
        group = np.full(n, "mediated" if config.dag == 1 else "both")

    columns = {"X": x, "M": m, "Y": y}
    if instrument is not None:
        columns = {"Z": instrument} | columns
    effects = true_effects(config)
    truth = pd.DataFrame(
        {"C": confounder, "group": group, "ate": effects.ate, "pate": effects.pate}
    )
    logger.debug(f"Simulated DAG {config.dag}: n={n}, seed={config.seed}")
    return SimOutput(
        config=config,
        observed=Dataset(
            frame=pd.DataFrame(columns),
            instrument="Z" if instrument is not None else None,
        ),
        truth=truth,
        effects=effects,
    )


def replication_seed(base_seed: int, index: int) -> int:
    """Seed of replication `index`: SeedSequence(base_seed, spawn_key=(index,)).

    SeedSequence hashes the entropy together with the spawn key, giving distinct,
    well-mixed streams for every (base seed, index) pair.
    """
    sequence = np.random.SeedSequence(base_seed, spawn_key=(index,))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True, kw_only=True)
class ReplicationSummary:
    """Per-replication records and their summary statistics (rows: statistics)."""

    config: ScenarioConfig
    records: pd.DataFrame
    stats: pd.DataFrame

    def mean(self, metric: str) -> float:
        return float(self.stats.loc["mean", metric])


REPLICATION_METRICS = (
    "fdc_estimate",
    "step1_intercept",
    "step1_x",
    "step2_intercept",
    "step2_m",
    "step2_x",
)


def _replicate_once(config: ScenarioConfig, index: int) -> dict[str, Any]:
    seed = replication_seed(config.seed, index)
    output = simulate(config.model_copy(update={"seed": seed}))
    fit = fdc_two_step(output.observed)
    x_row = fit.x_coefficient
    return {
        "replication": index,
        "seed": seed,
        "fdc_estimate": fit.fdc_estimate,
        "step1_intercept": fit.step1["Intercept"],
        "step1_x": fit.step1[fit.treatment],
        "step2_intercept": fit.step2["Intercept"],
        "step2_m": fit.step2[fit.mediator],
        "step2_x": x_row.estimate,
        "step2_x_t": x_row.t_value,
        "x_dropped": x_row.dropped,
    }


def replicate(config: ScenarioConfig, reps: int, workers: int = 1) -> ReplicationSummary:
    """Monte Carlo over `reps` independent seeds derived from config.seed.

    Replications may run on several threads; results are ordered by replication
    index before aggregation, so the summary does not depend on scheduling.
    """
    if reps < 1:
        raise ValueError(f"reps must be at least 1, got {reps}")
    logger.info(f"Replicating DAG {config.dag} x{reps} (n={config.n}, workers={workers})")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(lambda i: _replicate_once(config, i), range(reps)))
    frame = pd.DataFrame(records).sort_values("replication").reset_index(drop=True)
    metrics = frame[list(REPLICATION_METRICS)]
    stats = pd.concat(
        [
            metrics.agg(["mean", "std"]),
            metrics.quantile(list(SUMMARY_QUANTILES)).rename(index=lambda q: f"q{q:g}"),
        ]
    )
    return ReplicationSummary(config=config, records=frame, stats=stats)


# Binary-population constructors.


def two_group_population(
    e_p: float, p_p: float, e_n: float, p_n: float, null_frac: float = 0.0
) -> BinaryPopulation:
    """Positive responders with effect e_p, negative responders with effect e_n, and
    optional null responders (M(0) = M(1) = 0)."""
    groups = [
        (p_p, UnitPotentials.mediated(0, 1, 0.0, e_p)),
        (p_n, UnitPotentials.mediated(1, 0, 0.0, e_n)),
        (null_frac, UnitPotentials.mediated(0, 0, 0.0, 0.0)),
    ]
    return BinaryPopulation(
        subgroups=tuple(
            SubgroupSpec(proportion=share, unit=unit) for share, unit in groups if share > 0
        )
    )


def population_from_params(params: MixedPathParams) -> BinaryPopulation:
    """Binary population realizing a MixedPathParams.

    A mean mediator response m in [-1, 1] is encoded as a mix of positive responders
    (share (1 + m) / 2) and negative responders (share (1 - m) / 2).
    """
    for name, m in (("m_i", params.m_i), ("m_j", params.m_j)):
        if abs(m) > 1:
            raise ValueError(f"{name}={m} is not a binary mediator mean (|m| <= 1)")
    groups = [
        (params.p_i * (1 + params.m_i) / 2, UnitPotentials.mediated(0, 1, 0.0, params.c_i)),
        (params.p_i * (1 - params.m_i) / 2, UnitPotentials.mediated(1, 0, 0.0, params.c_i)),
        (params.p_j * (1 + params.m_j) / 2, UnitPotentials.direct(0, 1, 0.0, params.n_j)),
        (params.p_j * (1 - params.m_j) / 2, UnitPotentials.direct(1, 0, 0.0, params.n_j)),
    ]
    return BinaryPopulation(
        subgroups=tuple(
            SubgroupSpec(proportion=share, unit=unit) for share, unit in groups if share > 0
        )
    )


def simulate_complier_world(
    pop: InstrumentPopulation,
    n: int,
    seed: int,
    p_z: float = 0.5,
    y_noise_sd: float = 1.0,
) -> Dataset:
    """Sample (Z, X, Y) from a binary-instrument population."""
    rng = np.random.Generator(np.random.PCG64(seed))
    z = (rng.random(n) < p_z).astype(int)
    proportions = np.array([g.proportion for g in pop.groups])
    kind = rng.choice(len(pop.groups), size=n, p=proportions / proportions.sum())
    treatment = np.array([[g.kind.treatment(0), g.kind.treatment(1)] for g in pop.groups])
    x = treatment[kind, z]
    y0 = np.array([g.y0 for g in pop.groups])[kind]
    y1 = np.array([g.y1 for g in pop.groups])[kind]
    y = np.where(x == 1, y1, y0) + y_noise_sd * rng.standard_normal(n)
    return Dataset(
        frame=pd.DataFrame({"Z": z.astype(float), "X": x.astype(float), "Y": y}),
        instrument="Z",
    )
