import pytest

from frontdoor_lab.cli import program
from frontdoor_lab.config import LOG_LEVEL_ENV_VAR, SEED_ENV_VAR, WORKERS_ENV_VAR
from frontdoor_lab.discrete import StructuralWorld
from frontdoor_lab.population import (
    ComplianceGroup,
    ComplianceType,
    InstrumentPopulation,
)
from frontdoor_lab.scenarios import two_group_population


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for var in (SEED_ENV_VAR, LOG_LEVEL_ENV_VAR, WORKERS_ENV_VAR):
        monkeypatch.delenv(var, raising=False)


@pytest.fixture
def heterogeneous_population():
    """Positive responders with effect 1.0 at 0.6, negative responders 0.5 at 0.4."""
    return two_group_population(1.0, 0.6, 0.5, 0.4)


@pytest.fixture
def null_population():
    """tau = 1 for every responder; P(p) = 0.3, P(n) = 0.2, null 0.5."""
    return two_group_population(1.0, 0.3, 1.0, 0.2, null_frac=0.5)


def _y_rows(direct_shift: float = 0.0) -> list:
    """P(y | x, m, u) with P(y=1 | m, u) = 0.1 + 0.6 m + 0.2 u (+ shift when x = 1)."""
    rows = []
    for x in (0, 1):
        by_m = []
        for m in (0, 1):
            by_u = []
            for u in (0, 1):
                p1 = 0.1 + 0.6 * m + 0.2 * u + direct_shift * x
                by_u.append([1 - p1, p1])
            by_m.append(by_u)
        rows.append(by_m)
    return rows


def _bernoulli_world(direct_shift: float = 0.0) -> StructuralWorld:
    return StructuralWorld(
        p_u=[0.5, 0.5],
        p_x_given_u=[[0.8, 0.2], [0.2, 0.8]],
        p_m_given_x=[[0.9, 0.1], [0.1, 0.9]],
        p_y_given_xmu=_y_rows(direct_shift),
    )


@pytest.fixture
def bernoulli_world():
    """U ~ Bernoulli(0.5), P(x=1|u) = {0.2, 0.8}, P(m=1|x) = {0.1, 0.9}."""
    return _bernoulli_world()


@pytest.fixture
def direct_effect_world():
    """The same world with an extra 0.05 on P(y=1) when x = 1."""
    return _bernoulli_world(direct_shift=0.05)


@pytest.fixture
def complier_population():
    return InstrumentPopulation(
        groups=(
            ComplianceGroup(proportion=0.5, kind=ComplianceType.COMPLIER, y0=1.0, y1=3.0),
            ComplianceGroup(
                proportion=0.3, kind=ComplianceType.NEVER_TAKER, y0=0.5, y1=9.0
            ),
            ComplianceGroup(
                proportion=0.2, kind=ComplianceType.ALWAYS_TAKER, y0=7.0, y1=4.0
            ),
        )
    )


@pytest.fixture
def run_cli():
    """Run the command line in-process and return its exit status."""

    def run(*args: str) -> int:
        try:
            program.run(["frontdoor-lab", *args])
        except SystemExit as e:
            return e.code
        return 0

    return run
