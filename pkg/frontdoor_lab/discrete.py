"""
Exact front-door adjustment over finite discrete distributions.

`StructuralWorld` is a generative model with one unobserved confounder U:

    U -> X, U -> Y, X -> M -> Y   (and optionally X -> Y, violating Condition 1)

Its observational table (`world_to_joint`) feeds the front-door formula, and its
truncated factorization (`interventional_oracle`) is the ground truth that formula
must reproduce.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any

import numpy as np
import pandas as pd
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    PlainSerializer,
    model_validator,
)

from frontdoor_lab.errors import PositivityError

logger = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-12
POSITIVITY_FLOOR = 1e-15
MECHANISM_TOLERANCE = 1e-12


def _frozen_float_array(v: Any) -> np.ndarray:
    array = np.array(v, dtype=float)
    array.setflags(write=False)
    return array


ProbabilityArray = Annotated[
    np.ndarray,
    BeforeValidator(_frozen_float_array),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]
Labels = tuple[str, ...]


def _default_labels(data: dict[str, Any], key: str, size: int) -> None:
    if not data.get(key):
        data[key] = tuple(str(i) for i in range(size))
    else:
        data[key] = tuple(str(label) for label in data[key])


def _check_rows(name: str, array: np.ndarray) -> None:
    """Every slice along the last axis must be a probability distribution."""
    if np.any(array < 0):
        raise ValueError(f"{name} has negative entries")
    sums = array.sum(axis=-1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > PROBABILITY_TOLERANCE:
        raise ValueError(f"{name} rows must sum to 1 (worst deviation {worst:.3e})")


def _index_of(labels: Labels, value: str | int, role: str) -> int:
    key = str(value)
    if key not in labels:
        raise KeyError(f"Unknown {role} value '{value}'. Support: {', '.join(labels)}")
    return labels.index(key)


class JointXMY(BaseModel):
    """Probability mass over every (x, m, y) cell, with explicit support labels."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x_labels: Labels = ()
    m_labels: Labels = ()
    y_labels: Labels = ()
    table: ProbabilityArray

    @model_validator(mode="before")
    @classmethod
    def fill_labels(cls, data: Any) -> Any:
        if isinstance(data, dict) and "table" in data:
            data = dict(data)
            shape = np.shape(data["table"])
            if len(shape) != 3:
                raise ValueError(f"Joint table must be 3-dimensional, got shape {shape}")
            for key, size in zip(("x_labels", "m_labels", "y_labels"), shape):
                _default_labels(data, key, size)
        return data

    @model_validator(mode="after")
    def validate_table(self):
        expected = (len(self.x_labels), len(self.m_labels), len(self.y_labels))
        if self.table.shape != expected:
            raise ValueError(
                f"Table shape {self.table.shape} does not match labels {expected}"
            )
        if np.any(self.table < 0):
            raise ValueError("Joint table has negative mass")
        total = float(self.table.sum())
        if abs(total - 1.0) > PROBABILITY_TOLERANCE:
            raise ValueError(f"Joint table must sum to 1, got {total!r}")
        return self

    @classmethod
    def from_json_file(cls, json_file: Path) -> "JointXMY":
        with open(json_file, "r") as f:
            return cls.model_validate_json(f.read())

    def to_json_file(self, json_file: Path) -> None:
        with open(json_file, "w") as f:
            f.write(self.model_dump_json(indent=2))

    def x_index(self, x: str | int) -> int:
        return _index_of(self.x_labels, x, "treatment")


class StructuralWorld(BaseModel):
    """Conditional probability tables for P(u), P(x|u), P(m|x) and P(y|x, m, u).

    Array layouts: p_u[u], p_x_given_u[u, x], p_m_given_x[x, m], p_y_given_xmu[x, m, u, y].
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    u_labels: Labels = ()
    x_labels: Labels = ()
    m_labels: Labels = ()
    y_labels: Labels = ()
    p_u: ProbabilityArray
    p_x_given_u: ProbabilityArray
    p_m_given_x: ProbabilityArray
    p_y_given_xmu: ProbabilityArray

    @model_validator(mode="before")
    @classmethod
    def fill_labels(cls, data: Any) -> Any:
        if isinstance(data, dict) and "p_y_given_xmu" in data:
            data = dict(data)
            n_x, n_m, n_u, n_y = np.shape(data["p_y_given_xmu"])
            for key, size in (
                ("u_labels", n_u),
                ("x_labels", n_x),
                ("m_labels", n_m),
                ("y_labels", n_y),
            ):
                _default_labels(data, key, size)
        return data

    @model_validator(mode="after")
    def validate_mechanisms(self):
        n_u, n_x, n_m, n_y = (
            len(self.u_labels),
            len(self.x_labels),
            len(self.m_labels),
            len(self.y_labels),
        )
        shapes = {
            "p_u": (self.p_u, (n_u,)),
            "p_x_given_u": (self.p_x_given_u, (n_u, n_x)),
            "p_m_given_x": (self.p_m_given_x, (n_x, n_m)),
            "p_y_given_xmu": (self.p_y_given_xmu, (n_x, n_m, n_u, n_y)),
        }
        for name, (array, shape) in shapes.items():
            if array.shape != shape:
                raise ValueError(f"{name} has shape {array.shape}, expected {shape}")
            _check_rows(name, array)
        return self

    @classmethod
    def from_json_file(cls, json_file: Path) -> "StructuralWorld":
        with open(json_file, "r") as f:
            return cls.model_validate_json(f.read())

    def to_json_file(self, json_file: Path) -> None:
        with open(json_file, "w") as f:
            f.write(self.model_dump_json(indent=2))

    def x_index(self, x: str | int) -> int:
        return _index_of(self.x_labels, x, "treatment")


@dataclass(frozen=True, kw_only=True)
class FrontDoorConditions:
    """Which front-door conditions a world satisfies by construction or inspection.

    Conditions 2 and 3 hold for every StructuralWorld: U never enters the M mechanism,
    and U reaches M only through X.
    """

    no_direct_effect: bool
    no_confounding_of_x_and_m: bool = True
    x_blocks_m_to_y_backdoor: bool = True

    @property
    def satisfied(self) -> bool:
        return (
            self.no_direct_effect
            and self.no_confounding_of_x_and_m
            and self.x_blocks_m_to_y_backdoor
        )


def front_door_conditions(world: StructuralWorld) -> FrontDoorConditions:
    spread = np.ptp(world.p_y_given_xmu, axis=0)
    return FrontDoorConditions(no_direct_effect=bool(spread.max() <= MECHANISM_TOLERANCE))


def world_to_joint(world: StructuralWorld) -> JointXMY:
    """Marginalize U out of P(u) P(x|u) P(m|x) P(y|x, m, u)."""
    table = np.einsum(
        "u,ux,xm,xmuy->xmy",
        world.p_u,
        world.p_x_given_u,
        world.p_m_given_x,
        world.p_y_given_xmu,
    )
    return JointXMY(
        x_labels=world.x_labels,
        m_labels=world.m_labels,
        y_labels=world.y_labels,
        table=table,
    )


def interventional_oracle(world: StructuralWorld, x: str | int) -> np.ndarray:
    """P(y | do(x)) by truncated factorization: sum_u sum_m P(u) P(m|x) P(y|x, m, u)."""
    ix = world.x_index(x)
    return np.einsum(
        "u,m,muy->y", world.p_u, world.p_m_given_x[ix], world.p_y_given_xmu[ix]
    )


def check_positivity(joint: JointXMY) -> bool:
    return bool(np.all(joint.table.sum(axis=2) > POSITIVITY_FLOOR))


def _require_positivity(joint: JointXMY) -> np.ndarray:
    p_xm = joint.table.sum(axis=2)
    empty = np.argwhere(p_xm <= POSITIVITY_FLOOR)
    if empty.size:
        ix, im = (int(i) for i in empty[0])
        cell = (joint.x_labels[ix], joint.m_labels[im])
        raise PositivityError(
            f"Positivity violated: P(x={cell[0]}, m={cell[1]}) = 0; "
            "the front-door formula needs every (x, m) cell observed",
            cell=cell,
        )
    return p_xm


def front_door_table(joint: JointXMY) -> np.ndarray:
    """P(y | do(x)) for every x, as an |X| x |Y| matrix."""
    p_xm = _require_positivity(joint)
    p_x = p_xm.sum(axis=1)
    p_m_given_x = p_xm / p_x[:, None]
    p_y_given_xm = joint.table / p_xm[:, :, None]
    # sum over x' of P(y | x', m) P(x')
    adjusted = np.einsum("amy,a->my", p_y_given_xm, p_x)
    return p_m_given_x @ adjusted


def front_door_adjust(joint: JointXMY, x: str | int) -> np.ndarray:
    """Front-door formula: sum_m P(m|x) sum_x' P(y|x', m) P(x')."""
    return front_door_table(joint)[joint.x_index(x)]


def average_causal_effect(
    dist_treated: np.ndarray, dist_control: np.ndarray, y_values: Labels
) -> float:
    """E[Y | do(treated)] - E[Y | do(control)] for numeric outcome labels."""
    values = np.array([float(v) for v in y_values])
    return float(values @ dist_treated - values @ dist_control)


def random_world(
    rng: np.random.Generator,
    sizes: tuple[int, int, int, int] = (2, 2, 2, 2),
    direct_effect: bool = False,
) -> StructuralWorld:
    """Draw every mechanism row from a flat Dirichlet.

    sizes is (|U|, |X|, |M|, |Y|). With direct_effect the Y mechanism gets its own
    row per x, which breaks Condition 1.
    """
    n_u, n_x, n_m, n_y = sizes
    if direct_effect:
        p_y = rng.dirichlet(np.ones(n_y), size=(n_x, n_m, n_u))
    else:
        p_y_shared = rng.dirichlet(np.ones(n_y), size=(n_m, n_u))
        p_y = np.broadcast_to(p_y_shared, (n_x, n_m, n_u, n_y))
    return StructuralWorld(
        p_u=rng.dirichlet(np.ones(n_u)),
        p_x_given_u=rng.dirichlet(np.ones(n_x), size=n_u),
        p_m_given_x=rng.dirichlet(np.ones(n_m), size=n_x),
        p_y_given_xmu=p_y,
    )


def _draw_rows(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    """One categorical draw per row of probs by inverse CDF."""
    cdf = np.cumsum(probs, axis=1)
    draws = (rng.random(probs.shape[0])[:, None] > cdf).sum(axis=1)
    return np.minimum(draws, probs.shape[1] - 1)


def sample_world(world: StructuralWorld, n: int, seed: int) -> pd.DataFrame:
    """Draw n observational units (X, M, Y labels); U stays hidden."""
    rng = np.random.Generator(np.random.PCG64(seed))
    u = rng.choice(len(world.u_labels), size=n, p=world.p_u)
    x = _draw_rows(rng, world.p_x_given_u[u])
    m = _draw_rows(rng, world.p_m_given_x[x])
    y = _draw_rows(rng, world.p_y_given_xmu[x, m, u])
    return pd.DataFrame(
        {
            "X": np.asarray(world.x_labels, dtype=object)[x],
            "M": np.asarray(world.m_labels, dtype=object)[m],
            "Y": np.asarray(world.y_labels, dtype=object)[y],
        }
    )


def _sorted_support(labels) -> list[str]:
    """Numeric order when every label parses as a number, text order otherwise."""
    try:
        return sorted(labels, key=float)
    except ValueError:
        return sorted(labels)


def joint_from_samples(
    frame: pd.DataFrame, treatment: str = "X", mediator: str = "M", outcome: str = "Y"
) -> JointXMY:
    """Empirical joint over the observed supports, zero cells kept."""
    columns = [treatment, mediator, outcome]
    observed = frame[columns].astype(str)
    supports = [_sorted_support(observed[c].unique()) for c in columns]
    counts = (
        observed.groupby(columns)
        .size()
        .reindex(pd.MultiIndex.from_product(supports, names=columns), fill_value=0)
    )
    table = counts.to_numpy(dtype=float).reshape([len(s) for s in supports])
    logger.debug(f"Empirical joint from {len(frame)} rows, supports {supports}")
    return JointXMY(
        x_labels=tuple(supports[0]),
        m_labels=tuple(supports[1]),
        y_labels=tuple(supports[2]),
        table=table / table.sum(),
    )
