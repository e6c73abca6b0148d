"""
Bias of the product-of-coefficients front-door estimate when its assumptions fail.

Sign convention: every bias is the true value minus the calculated value. For the
heterogeneity bias this gives

    Ep * P(p) * (1 - omega) - En * P(n) * (1 + omega)

Enumerating the population agrees with the minus between the two terms; a plus there
would turn the 0.24 of the {1.0 at 0.6, 0.5 at 0.4} population into 0.72.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

from pydantic import BaseModel, ConfigDict, model_validator

from frontdoor_lab.errors import PopulationError
from frontdoor_lab.population import (
    BinaryPopulation,
    PathTag,
    classify,
    true_pate,
)

PARAMETER_TOLERANCE = 1e-12


class MixedPathParams(BaseModel):
    """Population i follows X -> M -> Y, population j follows X -> Y directly.

    c_i is E[C_i], the per-unit M -> Y effect in i; n_j is E[N_j], the per-unit X -> Y
    effect in j; m_i and m_j are the mean mediator responses E[M(1) - M(0)].
    """

    model_config = ConfigDict(frozen=True)

    p_i: float
    p_j: float
    c_i: float
    n_j: float
    m_i: float
    m_j: float

    @model_validator(mode="after")
    def validate_params(self):
        if self.p_i < 0 or self.p_j < 0:
            raise ValueError("Population shares must be nonnegative")
        if abs(self.p_i + self.p_j - 1.0) > PARAMETER_TOLERANCE:
            raise ValueError(f"p_i + p_j must equal 1, got {self.p_i + self.p_j!r}")
        if self.m_j == 0:
            raise ValueError("m_j must be nonzero; its reciprocal enters the M -> Y weight")
        return self

    @classmethod
    def from_json_file(cls, json_file: Path) -> "MixedPathParams":
        with open(json_file, "r") as f:
            return cls(**json.load(f))

    @property
    def pooled_mediator_weight(self) -> float:
        """c_i * P(i) + (n_j / m_j) * P(j): what the pooled step-2 slope targets."""
        return self.c_i * self.p_i + (self.n_j / self.m_j) * self.p_j


@dataclass(frozen=True, kw_only=True)
class HeterogeneityBias:
    bias: float
    omega: float
    true_pate: float
    calculated_pate: float


@dataclass(frozen=True, kw_only=True)
class Case2Bias:
    gamma: float
    epsilon: float


def _responsive_effects(pop: BinaryPopulation) -> dict[int, list[tuple[float, float]]]:
    """(proportion, Y(1) - Y(0)) pairs keyed by mediator response +1 / -1."""
    effects: dict[int, list[tuple[float, float]]] = {1: [], -1: []}
    for group in pop.subgroups:
        if group.unit.m_difference != 0:
            effects[group.unit.m_difference].append(
                (group.proportion, group.unit.y_difference)
            )
    return effects


def _mean_effect(pairs: list[tuple[float, float]]) -> float:
    total = math.fsum(p for p, _ in pairs)
    if total == 0:
        return 0.0
    return math.fsum(p * e for p, e in pairs) / total


def heterogeneity_bias(pop: BinaryPopulation) -> HeterogeneityBias:
    """Bias from unequal M -> Y effects among positive and negative responders."""
    shares = classify(pop)
    if shares.null_frac > 0:
        raise PopulationError(
            "Heterogeneity bias assumes every unit responds to treatment; "
            "use null_inclusion_bias for populations with M(1) = M(0) units"
        )
    population_mean = math.fsum(
        g.proportion * g.unit.y_difference for g in pop.subgroups
    )
    truth = true_pate(pop)
    calculated = shares.omega * population_mean
    return HeterogeneityBias(
        bias=truth - calculated,
        omega=shares.omega,
        true_pate=truth,
        calculated_pate=calculated,
    )


def heterogeneity_bias_closed_form(e_p: float, p_p: float, e_n: float, p_n: float) -> float:
    omega = p_p - p_n
    return e_p * p_p * (1 - omega) - e_n * p_n * (1 + omega)


def null_inclusion_bias(pop: BinaryPopulation) -> float:
    """Bias from leaving units with M(1) = M(0) in the population.

    Null units count as contributing zero to E[Y(1) - Y(0)], so the population mean is
    tau * (P(p) + P(n)). A population with no null units has no such bias.
    """
    shares = classify(pop)
    effects = _responsive_effects(pop)
    taus = [e for side in effects.values() for _, e in side]
    if not taus:
        return 0.0
    if max(taus) - min(taus) > PARAMETER_TOLERANCE:
        raise PopulationError(
            "Null-inclusion bias assumes one M -> Y effect across responders "
            "(Assumption 6); heterogeneous responders belong to heterogeneity_bias"
        )
    tau = taus[0]
    population_mean = tau * (shares.p_frac + shares.n_frac)
    return true_pate(pop) - shares.omega * population_mean


def null_inclusion_bias_closed_form(tau: float, p_p: float, p_n: float) -> float:
    return tau * (p_p - p_n) * (1 - p_p - p_n)


def other_path_gap(ate_full: float, pate: float) -> float:
    """ATE minus PATE: the effect carried by paths that bypass M.

    ate_full must come from a known data-generating process or oracle; the front-door
    estimate cannot reveal it.
    """
    return ate_full - pate


def mixed_path_ate(params: MixedPathParams) -> float:
    """True ATE of the mixed population: c_i P(i) m_i + n_j P(j)."""
    return params.c_i * params.p_i * params.m_i + params.n_j * params.p_j


def case1_ate_cal(params: MixedPathParams) -> float:
    """Calculated ATE when both populations share the X -> M function."""
    if abs(params.m_i - params.m_j) > PARAMETER_TOLERANCE:
        raise PopulationError(
            f"Case 1 needs m_i = m_j, got m_i={params.m_i}, m_j={params.m_j}; "
            "use case2_ate_cal"
        )
    return params.pooled_mediator_weight * params.m_i


def case2_ate_cal(params: MixedPathParams) -> float:
    """Calculated ATE when the X -> M functions differ: pooled M -> Y weight times
    the pooled first-step slope m_i P(i) + m_j P(j)."""
    pooled_slope = params.m_i * params.p_i + params.m_j * params.p_j
    return params.pooled_mediator_weight * pooled_slope


def case2_bias(params: MixedPathParams) -> Case2Bias:
    gamma = params.p_i * params.p_j * (params.m_i - params.m_j)
    epsilon = gamma * (params.c_i - params.n_j / params.m_j)
    return Case2Bias(gamma=gamma, epsilon=epsilon)


def mixed_path_params(pop: BinaryPopulation) -> MixedPathParams:
    """Summarize a population with mediated (i) and direct (j) subgroups.

    m_i = P(p) - P(n) within i, and likewise for j; c_i and n_j are the mean
    Y-differences within each population.
    """
    mediated = [g for g in pop.subgroups if g.unit.path_tag is PathTag.MEDIATED]
    direct = [g for g in pop.subgroups if g.unit.path_tag is PathTag.DIRECT]
    if not mediated or not direct:
        raise PopulationError("A mixed-path population needs mediated and direct subgroups")

    def summarize(groups) -> tuple[float, float, float]:
        share = math.fsum(g.proportion for g in groups)
        m_mean = math.fsum(g.proportion * g.unit.m_difference for g in groups) / share
        y_mean = math.fsum(g.proportion * g.unit.y_difference for g in groups) / share
        return share, m_mean, y_mean

    p_i, m_i, c_i = summarize(mediated)
    p_j, m_j, n_j = summarize(direct)
    return MixedPathParams(p_i=p_i, p_j=p_j, c_i=c_i, n_j=n_j, m_i=m_i, m_j=m_j)
