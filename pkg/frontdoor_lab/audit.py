"""
Randomized oracle suites and bias audits.

Each suite draws random inputs, computes a quantity two independent ways, and
reports the largest absolute disagreement against the suite's tolerance.
"""

import logging
from enum import StrEnum

import numpy as np
from pydantic import BaseModel, ConfigDict

from frontdoor_lab.bias import (
    MixedPathParams,
    case1_ate_cal,
    case2_ate_cal,
    case2_bias,
    heterogeneity_bias,
    heterogeneity_bias_closed_form,
    mixed_path_ate,
    mixed_path_params,
    null_inclusion_bias,
    null_inclusion_bias_closed_form,
    other_path_gap,
)
from frontdoor_lab.discrete import (
    StructuralWorld,
    front_door_conditions,
    front_door_table,
    interventional_oracle,
    random_world,
    world_to_joint,
)
from frontdoor_lab.errors import PopulationError
from frontdoor_lab.population import (
    BinaryPopulation,
    classify,
    responsive_share,
    true_ate,
    true_late,
    true_pate,
)
from frontdoor_lab.scenarios import (
    ScenarioConfig,
    estimate_limit,
    population_from_params,
    scenario_params,
    true_effects,
    two_group_population,
)

logger = logging.getLogger(__name__)

DEFAULT_SWEEPS = 1000
FRONT_DOOR_TOLERANCE = 1e-10
# MixedPathParams draws are cheap, so the algebraic suites run this many per sweep
ALGEBRA_SWEEP_FACTOR = 10


class SuiteStatus(StrEnum):
    PASS = "pass"
    FAIL = "FAIL"
    EXPECTED_FAILURE = "expected-failure"
    UNEXPECTED_PASS = "UNEXPECTED-PASS"


class SuiteResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    suite: str
    cases: int
    max_deviation: float
    tolerance: float
    status: SuiteStatus

    @property
    def ok(self) -> bool:
        return self.status in (SuiteStatus.PASS, SuiteStatus.EXPECTED_FAILURE)


class BiasQuantity(BaseModel):
    model_config = ConfigDict(frozen=True)

    quantity: str
    value: float


def _judge(
    suite: str, deviations: list[float], tolerance: float, expect_failure: bool = False
) -> SuiteResult:
    worst = float(np.max(deviations))
    within = worst < tolerance
    if expect_failure:
        status = SuiteStatus.UNEXPECTED_PASS if within else SuiteStatus.EXPECTED_FAILURE
    else:
        status = SuiteStatus.PASS if within else SuiteStatus.FAIL
    logger.info(f"Suite {suite}: {len(deviations)} cases, max deviation {worst:.3e} ({status})")
    return SuiteResult(
        suite=suite,
        cases=len(deviations),
        max_deviation=worst,
        tolerance=tolerance,
        status=status,
    )


def _random_params(rng: np.random.Generator, equal_slopes: bool = False) -> MixedPathParams:
    p_i = float(rng.uniform(0.0, 1.0))
    m_i = float(rng.uniform(-2.0, 2.0))
    m_j = m_i if equal_slopes else float(rng.choice([-1, 1]) * rng.uniform(0.1, 2.0))
    return MixedPathParams(
        p_i=p_i,
        p_j=1.0 - p_i,
        c_i=float(rng.normal()),
        n_j=float(rng.normal()),
        m_i=m_i,
        m_j=m_j,
    )


def front_door_suite(
    rng: np.random.Generator, sweeps: int, negate_condition1: bool = False
) -> SuiteResult:
    """Front-door formula on the observational joint vs the truncated factorization.

    With negate_condition1 every world gets a direct X -> Y effect, so the two must
    disagree.
    """
    deviations = []
    for _ in range(sweeps):
        sizes = tuple(int(s) for s in rng.integers(2, 5, size=4))
        world = random_world(rng, sizes, direct_effect=negate_condition1)
        adjusted = front_door_table(world_to_joint(world))
        truth = np.stack([interventional_oracle(world, x) for x in world.x_labels])
        deviations.append(float(np.max(np.abs(adjusted - truth))))
    name = "front-door vs oracle (direct X->Y)" if negate_condition1 else "front-door vs oracle"
    return _judge(name, deviations, FRONT_DOOR_TOLERANCE, expect_failure=negate_condition1)


def case2_identity_suite(rng: np.random.Generator, cases: int) -> SuiteResult:
    """epsilon equals true ATE minus the pooled calculated ATE."""
    deviations = []
    for _ in range(cases):
        params = _random_params(rng)
        gap = mixed_path_ate(params) - case2_ate_cal(params)
        deviations.append(abs(case2_bias(params).epsilon - gap))
    return _judge("case 2 bias identity", deviations, 1e-12)


def case1_zero_suite(rng: np.random.Generator, cases: int) -> SuiteResult:
    deviations = []
    for _ in range(cases):
        params = _random_params(rng, equal_slopes=True)
        deviations.append(abs(case2_bias(params).epsilon))
        deviations.append(abs(mixed_path_ate(params) - case1_ate_cal(params)))
    return _judge("case 1 zero bias", deviations, 1e-12)


def heterogeneity_suite(rng: np.random.Generator, cases: int) -> SuiteResult:
    deviations = []
    for _ in range(cases):
        e_p, e_n = (float(v) for v in rng.normal(size=2))
        p_p = float(rng.uniform(0.01, 0.99))
        pop = two_group_population(e_p, p_p, e_n, 1.0 - p_p)
        closed = heterogeneity_bias_closed_form(e_p, p_p, e_n, 1.0 - p_p)
        deviations.append(abs(heterogeneity_bias(pop).bias - closed))
    return _judge("heterogeneity bias closed form", deviations, 1e-12)


def null_inclusion_suite(rng: np.random.Generator, cases: int) -> SuiteResult:
    deviations = []
    for _ in range(cases):
        tau = float(rng.normal())
        p_p, p_n, null = (float(v) for v in rng.dirichlet(np.ones(3)))
        pop = two_group_population(tau, p_p, tau, p_n, null_frac=null)
        closed = null_inclusion_bias_closed_form(tau, p_p, p_n)
        deviations.append(abs(null_inclusion_bias(pop) - closed))
    return _judge("null-inclusion bias closed form", deviations, 1e-12)


def mixed_population_suite(rng: np.random.Generator, cases: int) -> SuiteResult:
    """True ATE of the mixed-path formula vs enumeration over an equivalent population."""
    deviations = []
    for _ in range(cases):
        params = _random_params(rng)
        bounded = params.model_copy(
            update={"m_i": float(np.tanh(params.m_i)), "m_j": float(np.tanh(params.m_j))}
        )
        pop = population_from_params(bounded)
        deviations.append(abs(true_ate(pop) - mixed_path_ate(bounded)))
    return _judge("mixed-path ATE vs population", deviations, 1e-12)


def run_oracle_suites(
    sweeps: int = DEFAULT_SWEEPS, seed: int = 0, negate_condition1: bool = False
) -> list[SuiteResult]:
    if sweeps < 1:
        raise ValueError(f"sweeps must be at least 1, got {sweeps}")
    rng = np.random.Generator(np.random.PCG64(seed))
    algebra_cases = sweeps * ALGEBRA_SWEEP_FACTOR
    return [
        front_door_suite(rng, sweeps, negate_condition1),
        case2_identity_suite(rng, algebra_cases),
        case1_zero_suite(rng, algebra_cases),
        heterogeneity_suite(rng, sweeps),
        null_inclusion_suite(rng, sweeps),
        mixed_population_suite(rng, sweeps),
    ]


# Single-world check.


class WorldCell(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: str
    y: str
    front_door: float
    oracle: float
    deviation: float


class WorldCheck(BaseModel):
    """Front-door formula vs truncated factorization for one given world."""

    model_config = ConfigDict(frozen=True)

    cells: tuple[WorldCell, ...]
    max_deviation: float
    tolerance: float
    condition1_holds: bool

    @property
    def status(self) -> SuiteStatus:
        within = self.max_deviation < self.tolerance
        if self.condition1_holds:
            return SuiteStatus.PASS if within else SuiteStatus.FAIL
        return SuiteStatus.UNEXPECTED_PASS if within else SuiteStatus.EXPECTED_FAILURE

    @property
    def ok(self) -> bool:
        return self.status in (SuiteStatus.PASS, SuiteStatus.EXPECTED_FAILURE)


def check_world(world: StructuralWorld) -> WorldCheck:
    """Compare P(y | do(x)) from the observational joint with the world's own truth.

    A world with a direct X -> Y effect is expected to disagree.
    """
    adjusted = front_door_table(world_to_joint(world))
    cells = []
    for i, x in enumerate(world.x_labels):
        truth = interventional_oracle(world, x)
        for j, y in enumerate(world.y_labels):
            estimate = float(adjusted[i, j])
            cells.append(
                WorldCell(
                    x=x,
                    y=y,
                    front_door=estimate,
                    oracle=float(truth[j]),
                    deviation=abs(estimate - float(truth[j])),
                )
            )
    check = WorldCheck(
        cells=tuple(cells),
        max_deviation=max(cell.deviation for cell in cells),
        tolerance=FRONT_DOOR_TOLERANCE,
        condition1_holds=front_door_conditions(world).no_direct_effect,
    )
    logger.info(f"World check: max deviation {check.max_deviation:.3e} ({check.status})")
    return check


# Bias audits.


def audit_params(params: MixedPathParams) -> list[BiasQuantity]:
    bias = case2_bias(params)
    quantities = {
        "p_i": params.p_i,
        "p_j": params.p_j,
        "m_i": params.m_i,
        "m_j": params.m_j,
        "true_ate": mixed_path_ate(params),
        "calculated_ate": case2_ate_cal(params),
        "gamma": bias.gamma,
        "epsilon": bias.epsilon,
    }
    return [BiasQuantity(quantity=k, value=v) for k, v in quantities.items()]


def audit_population(pop: BinaryPopulation) -> list[BiasQuantity]:
    """Every bias quantity that is defined for this population."""
    if not pop.is_mediated:
        quantities = [BiasQuantity(quantity="true_ate", value=true_ate(pop))]
        return quantities + audit_params(mixed_path_params(pop))

    shares = classify(pop)
    quantities = {
        "p_frac": shares.p_frac,
        "n_frac": shares.n_frac,
        "null_frac": shares.null_frac,
        "omega": shares.omega,
        "true_pate": true_pate(pop),
    }
    if responsive_share(pop) > 0:
        quantities["true_late"] = true_late(pop)
    try:
        het = heterogeneity_bias(pop)
        quantities["calculated_pate"] = het.calculated_pate
        quantities["heterogeneity_bias"] = het.bias
    except PopulationError as e:
        logger.debug(f"Skipping heterogeneity bias: {e.message}")
    try:
        quantities["null_inclusion_bias"] = null_inclusion_bias(pop)
    except PopulationError as e:
        logger.debug(f"Skipping null-inclusion bias: {e.message}")
    return [BiasQuantity(quantity=k, value=v) for k, v in quantities.items()]


def audit_scenario(config: ScenarioConfig) -> list[BiasQuantity]:
    effects = true_effects(config)
    limit = estimate_limit(config)
    quantities = [
        BiasQuantity(quantity="ate", value=effects.ate),
        BiasQuantity(quantity="pate", value=effects.pate),
        BiasQuantity(quantity="estimate_limit", value=limit.fdc_estimate),
        BiasQuantity(quantity="limit_bias", value=effects.ate - limit.fdc_estimate),
    ]
    params = scenario_params(config)
    if params is None:
        gap = other_path_gap(effects.ate, effects.pate)
        return quantities + [BiasQuantity(quantity="other_path_gap", value=gap)]
    return quantities + audit_params(params)
