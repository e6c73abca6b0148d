"""
Potential-outcome populations for binary treatment and mediator worlds.

A population is a finite mixture of homogeneous subgroups, so every causal effect
defined here is an exact weighted sum over subgroups rather than an estimate.
"""

import json
import math
from collections import namedtuple
from dataclasses import dataclass
from enum import StrEnum
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from frontdoor_lab.errors import PopulationError

PROBABILITY_TOLERANCE = 1e-12


class PathTag(StrEnum):
    """Which path carries the unit's treatment effect to the outcome."""

    MEDIATED = "mediated"
    DIRECT = "direct"


class UnitPotentials(BaseModel):
    """One unit's potential-outcome schedule.

    `m_response` is (M(0), M(1)). `y_schedule` holds (Y(m=0), Y(m=1)) for a mediated
    unit and (Y(x=0), Y(x=1)) for a direct unit; `path_tag` says which.
    """

    model_config = ConfigDict(frozen=True)

    m_response: tuple[int, int]
    y_schedule: tuple[float, float]
    path_tag: PathTag = PathTag.MEDIATED

    @field_validator("m_response")
    @classmethod
    def validate_binary_mediator(cls, v):
        """Ensure both mediator responses are 0 or 1."""
        if any(m not in (0, 1) for m in v):
            raise ValueError(f"Mediator responses must be 0 or 1, got {v}")
        return v

    @classmethod
    def mediated(cls, m0: int, m1: int, y0: float, y1: float) -> "UnitPotentials":
        return cls(m_response=(m0, m1), y_schedule=(y0, y1), path_tag=PathTag.MEDIATED)

    @classmethod
    def direct(cls, m0: int, m1: int, y0: float, y1: float) -> "UnitPotentials":
        return cls(m_response=(m0, m1), y_schedule=(y0, y1), path_tag=PathTag.DIRECT)

    @property
    def m_difference(self) -> int:
        return self.m_response[1] - self.m_response[0]

    @property
    def y_difference(self) -> float:
        return self.y_schedule[1] - self.y_schedule[0]


class SubgroupSpec(BaseModel):
    """A share of the population whose members all have the same potentials."""

    model_config = ConfigDict(frozen=True)

    proportion: float
    unit: UnitPotentials

    @field_validator("proportion")
    @classmethod
    def validate_proportion(cls, v):
        if not 0 < v <= 1:
            raise ValueError(f"Subgroup proportion must be in (0, 1], got {v}")
        return v

    @classmethod
    def from_record(cls, record: dict[str, Any]) -> "SubgroupSpec":
        """Build a subgroup from a flat {proportion, path, m0, m1, y_low, y_high} record."""
        return cls(
            proportion=record["proportion"],
            unit=UnitPotentials(
                m_response=(record["m0"], record["m1"]),
                y_schedule=(record["y_low"], record["y_high"]),
                path_tag=PathTag(record.get("path", PathTag.MEDIATED)),
            ),
        )

    def to_record(self) -> dict[str, Any]:
        return {
            "proportion": self.proportion,
            "path": self.unit.path_tag.value,
            "m0": self.unit.m_response[0],
            "m1": self.unit.m_response[1],
            "y_low": self.unit.y_schedule[0],
            "y_high": self.unit.y_schedule[1],
        }


class BinaryPopulation(BaseModel):
    """Exact finite mixture of subgroups whose proportions sum to one."""

    model_config = ConfigDict(frozen=True)

    subgroups: tuple[SubgroupSpec, ...]

    @model_validator(mode="after")
    def validate_mixture(self):
        if not self.subgroups:
            raise ValueError("A population needs at least one subgroup")
        total = math.fsum(group.proportion for group in self.subgroups)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"Subgroup proportions must sum to 1, got {total!r}")
        return self

    @classmethod
    def from_records(cls, records: list[dict[str, Any]]) -> "BinaryPopulation":
        return cls(subgroups=tuple(SubgroupSpec.from_record(r) for r in records))

    @classmethod
    def from_json_file(cls, json_file: Path) -> "BinaryPopulation":
        """Create a population from a JSON file holding a list of subgroup records."""
        with open(json_file, "r") as f:
            records = json.load(f)
        return cls.from_records(records)

    def to_records(self) -> list[dict[str, Any]]:
        return [group.to_record() for group in self.subgroups]

    @property
    def is_mediated(self) -> bool:
        return all(g.unit.path_tag is PathTag.MEDIATED for g in self.subgroups)

    def __len__(self) -> int:
        return len(self.subgroups)


@dataclass(frozen=True, kw_only=True)
class Classification:
    """Shares of positive, negative and null mediator responders."""

    p_frac: float
    n_frac: float
    null_frac: float

    @property
    def omega(self) -> float:
        return self.p_frac - self.n_frac


def _require_mediated(pop: BinaryPopulation, operation: str) -> None:
    if not pop.is_mediated:
        raise PopulationError(
            f"{operation} is defined along X -> M -> Y only; "
            "the population contains direct-path subgroups"
        )


def pite(unit: UnitPotentials) -> float:
    """Path individual treatment effect (Y(1) - Y(0)) * (M(1) - M(0))."""
    if unit.path_tag is not PathTag.MEDIATED:
        raise PopulationError("PITE is defined along X -> M -> Y only")
    return unit.y_difference * unit.m_difference


def unit_effect(unit: UnitPotentials) -> float:
    """End-to-end X -> Y effect of one unit, whichever path carries it."""
    if unit.path_tag is PathTag.DIRECT:
        return unit.y_difference
    return pite(unit)


def classify(pop: BinaryPopulation) -> Classification:
    _require_mediated(pop, "classify")
    shares = {1: [], -1: [], 0: []}
    for group in pop.subgroups:
        shares[group.unit.m_difference].append(group.proportion)
    return Classification(
        p_frac=math.fsum(shares[1]),
        n_frac=math.fsum(shares[-1]),
        null_frac=math.fsum(shares[0]),
    )


def responsive_share(pop: BinaryPopulation) -> float:
    """Total proportion of units whose mediator reacts to treatment."""
    return math.fsum(g.proportion for g in pop.subgroups if g.unit.m_difference != 0)


def true_pate(pop: BinaryPopulation) -> float:
    _require_mediated(pop, "PATE")
    return math.fsum(g.proportion * pite(g.unit) for g in pop.subgroups)


def true_ate(pop: BinaryPopulation) -> float:
    return math.fsum(g.proportion * unit_effect(g.unit) for g in pop.subgroups)


def true_late(pop: BinaryPopulation) -> float:
    """PATE over the units whose mediator responds, proportions renormalized."""
    _require_mediated(pop, "LATE")
    responsive = [g for g in pop.subgroups if g.unit.m_difference != 0]
    if not responsive:
        raise PopulationError(
            "LATE is undefined: no unit has M(1) != M(0) in this population"
        )
    total = math.fsum(g.proportion for g in responsive)
    return math.fsum(g.proportion * pite(g.unit) for g in responsive) / total


# Binary-instrument worlds, used to compare the front-door estimand with IV.


class ComplianceType(StrEnum):
    COMPLIER = "complier"
    NEVER_TAKER = "never_taker"
    ALWAYS_TAKER = "always_taker"
    DEFIER = "defier"

    def treatment(self, z: int) -> int:
        """Treatment X taken by this type when assigned instrument value z."""
        match self:
            case ComplianceType.COMPLIER:
                return z
            case ComplianceType.NEVER_TAKER:
                return 0
            case ComplianceType.ALWAYS_TAKER:
                return 1
            case ComplianceType.DEFIER:
                return 1 - z


InstrumentCell = namedtuple("InstrumentCell", ["z", "x", "y", "probability"])


class ComplianceGroup(BaseModel):
    model_config = ConfigDict(frozen=True)

    proportion: float
    kind: ComplianceType
    y0: float
    y1: float

    @field_validator("proportion")
    @classmethod
    def validate_proportion(cls, v):
        if not 0 < v <= 1:
            raise ValueError(f"Group proportion must be in (0, 1], got {v}")
        return v


class InstrumentPopulation(BaseModel):
    """Mixture of compliance types facing a randomized binary instrument Z."""

    model_config = ConfigDict(frozen=True)

    groups: tuple[ComplianceGroup, ...]

    @model_validator(mode="after")
    def validate_mixture(self):
        if not self.groups:
            raise ValueError("An instrument population needs at least one group")
        total = math.fsum(group.proportion for group in self.groups)
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"Group proportions must sum to 1, got {total!r}")
        return self


def instrument_cells(pop: InstrumentPopulation, p_z: float = 0.5) -> list[InstrumentCell]:
    """Enumerate every (Z, compliance type) cell with its observed X, Y and mass."""
    if not 0 < p_z < 1:
        raise PopulationError(f"P(Z=1) must be in (0, 1), got {p_z}")
    cells = []
    for z, z_mass in ((0, 1 - p_z), (1, p_z)):
        for group in pop.groups:
            x = group.kind.treatment(z)
            y = group.y1 if x else group.y0
            cells.append(InstrumentCell(z, x, y, z_mass * group.proportion))
    return cells


def wald_estimand(pop: InstrumentPopulation, p_z: float = 0.5) -> float:
    """Population Wald ratio cov(Y, Z) / cov(X, Z), by enumeration."""
    cells = instrument_cells(pop, p_z)

    def expect(f) -> float:
        return math.fsum(cell.probability * f(cell) for cell in cells)

    e_z = expect(lambda c: c.z)
    cov_yz = expect(lambda c: c.y * c.z) - expect(lambda c: c.y) * e_z
    cov_xz = expect(lambda c: c.x * c.z) - expect(lambda c: c.x) * e_z
    if abs(cov_xz) < 1e-15:
        raise PopulationError("The instrument does not move the treatment (no first stage)")
    return cov_yz / cov_xz


def complier_late(pop: InstrumentPopulation) -> float:
    compliers = [g for g in pop.groups if g.kind is ComplianceType.COMPLIER]
    if not compliers:
        raise PopulationError("No compliers: the complier LATE is undefined")
    total = math.fsum(g.proportion for g in compliers)
    return math.fsum(g.proportion * (g.y1 - g.y0) for g in compliers) / total
