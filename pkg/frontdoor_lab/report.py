"""
Table-style reports of regression fits and their ground truth.

Human output rounds to four decimals; csv, json and markdown carry every number at
full precision.
"""

import json
import math
from enum import StrEnum
from typing import Sequence

import pandas as pd
from pydantic import BaseModel, ConfigDict
from tabulate import tabulate

from frontdoor_lab.ols import (
    FitResult,
    IVResult,
    TwoStepResult,
    fdc_two_step,
    iv_2sls,
    naive_ols_effect,
)
from frontdoor_lab.scenarios import (
    ReplicationSummary,
    ScenarioConfig,
    replicate,
    scenario_truth,
    simulate,
)

HUMAN_FLOATFMT = ".4f"
SIGNIFICANCE_LEGEND = "Signif. codes: 0 '***' 0.001 '**' 0.01 '*' 0.05 '.' 0.1 ' ' 1"
ESTIMATE_HEADERS = ["Step", "Coefficient", "Estimate", "Std.Error", "t value", "Pr(>|t|)", ""]
ESTIMATE_ALIGN = ("left", "left", "right", "right", "right", "right", "left")


class OutputFormat(StrEnum):
    HUMAN = "human"
    CSV = "csv"
    JSON = "json"
    MARKDOWN = "markdown"


class EstimateRow(BaseModel):
    """One coefficient of one regression step."""

    model_config = ConfigDict(frozen=True)

    scenario: str
    step: str
    coefficient: str
    estimate: float
    std_error: float
    t_value: float
    p_value: float
    dropped: bool = False


class TruthBlock(BaseModel):
    """Estimate next to what the data-generating process says it should be.

    ate and pate are None when the truth is unknown (estimates from a file).
    """

    model_config = ConfigDict(frozen=True)

    scenario: str
    fdc_estimate: float
    sobel_std_error: float
    naive_ols: float | None = None
    iv_estimate: float | None = None
    ate: float | None = None
    pate: float | None = None
    estimate_limit: float | None = None
    limit_bias: float | None = None
    calculated_ate: float | None = None
    calculated_bias: float | None = None


class MonteCarloRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    scenario: str
    metric: str
    mean: float
    std: float
    q05: float
    q50: float
    q95: float


MONTE_CARLO_STATS = ("mean", "std", "q05", "q50", "q95")


class ReportTable(BaseModel):
    title: str
    rows: list[EstimateRow] = []
    truth: list[TruthBlock] = []
    monte_carlo: list[MonteCarloRow] = []

    @property
    def scenarios(self) -> list[str]:
        return list(dict.fromkeys(row.scenario for row in self.rows))

    def to_frame(self) -> pd.DataFrame:
        """Long-format frame: coefficient rows, then truth and Monte Carlo rows.

        Truth and Monte Carlo values go in the estimate column, with step "truth" or
        "monte-carlo" and the quantity's name as the coefficient.
        """
        records = [row.model_dump() for row in self.rows]
        for block in self.truth:
            for name, value in block.model_dump(exclude={"scenario"}).items():
                if value is not None:
                    records.append(
                        {
                            "scenario": block.scenario,
                            "step": "truth",
                            "coefficient": name,
                            "estimate": value,
                        }
                    )
        for mc in self.monte_carlo:
            for stat in MONTE_CARLO_STATS:
                records.append(
                    {
                        "scenario": mc.scenario,
                        "step": "monte-carlo",
                        "coefficient": f"{mc.metric}:{stat}",
                        "estimate": getattr(mc, stat),
                    }
                )
        return pd.DataFrame(records, columns=list(EstimateRow.model_fields))


def significance_code(p_value: float) -> str:
    if math.isnan(p_value):
        return ""
    for cutoff, code in ((0.001, "***"), (0.01, "**"), (0.05, "*"), (0.1, ".")):
        if p_value < cutoff:
            return code
    return ""


def fit_rows(scenario: str, step: str, fit: FitResult) -> list[EstimateRow]:
    return [
        EstimateRow(
            scenario=scenario,
            step=step,
            coefficient=row.name,
            estimate=row.estimate,
            std_error=row.std_error,
            t_value=row.t_value,
            p_value=row.p_value,
            dropped=row.dropped,
        )
        for row in fit.rows
    ]


def two_step_rows(scenario: str, result: TwoStepResult) -> list[EstimateRow]:
    return fit_rows(scenario, "step1", result.step1) + fit_rows(
        scenario, "step2", result.step2
    )


def iv_rows(scenario: str, result: IVResult) -> list[EstimateRow]:
    return fit_rows(scenario, "2sls-first", result.first_stage) + fit_rows(
        scenario, "2sls", result
    )


def truth_block(scenario: str, result: TwoStepResult, **known: float | None) -> TruthBlock:
    return TruthBlock(
        scenario=scenario,
        fdc_estimate=result.fdc_estimate,
        sobel_std_error=result.sobel_std_error,
        **known,
    )


def _number(value: float) -> str:
    return format(value, HUMAN_FLOATFMT)


def _human_rows(rows: Sequence[EstimateRow]) -> list[list[str]]:
    lines = []
    for row in rows:
        if row.dropped:
            lines.append(
                [row.step, row.coefficient, "NA", "NA", "NA", "NA", "(dropped: collinear)"]
            )
            continue
        lines.append(
            [
                row.step,
                row.coefficient,
                _number(row.estimate),
                _number(row.std_error),
                _number(row.t_value),
                _number(row.p_value),
                significance_code(row.p_value),
            ]
        )
    return lines


def _frame_table(records: Sequence[BaseModel], tablefmt: str, floatfmt: str) -> str:
    frame = pd.DataFrame([record.model_dump() for record in records])
    frame = frame.dropna(axis=1, how="all")
    return tabulate(
        frame,
        headers="keys",
        tablefmt=tablefmt,
        floatfmt=floatfmt,
        showindex=False,
        missingval="",
    )


def _render_human(table: ReportTable) -> str:
    parts = [table.title, "=" * len(table.title)]
    for scenario in table.scenarios:
        rows = [row for row in table.rows if row.scenario == scenario]
        parts += [
            "",
            scenario,
            tabulate(
                _human_rows(rows),
                headers=ESTIMATE_HEADERS,
                colalign=ESTIMATE_ALIGN,
                disable_numparse=True,
            ),
        ]
    if table.rows:
        parts += ["---", SIGNIFICANCE_LEGEND]
    if table.truth:
        parts += ["", "Truth and bias", _frame_table(table.truth, "simple", HUMAN_FLOATFMT)]
    if table.monte_carlo:
        parts += [
            "",
            "Monte Carlo",
            _frame_table(table.monte_carlo, "simple", HUMAN_FLOATFMT),
        ]
    return "\n".join(parts)


def _render_markdown(table: ReportTable) -> str:
    # empty floatfmt prints each float's shortest round-trip repr
    parts = [f"# {table.title}"]
    if table.rows:
        parts += ["", _frame_table(table.rows, "pipe", "")]
    if table.truth:
        parts += ["", "## Truth and bias", "", _frame_table(table.truth, "pipe", "")]
    if table.monte_carlo:
        parts += ["", "## Monte Carlo", "", _frame_table(table.monte_carlo, "pipe", "")]
    return "\n".join(parts)


def render(table: ReportTable, fmt: OutputFormat = OutputFormat.HUMAN) -> str:
    match fmt:
        case OutputFormat.HUMAN:
            return _render_human(table)
        case OutputFormat.CSV:
            return table.to_frame().to_csv(index=False, lineterminator="\n")
        case OutputFormat.JSON:
            return table.model_dump_json(indent=2)
        case OutputFormat.MARKDOWN:
            return _render_markdown(table)


def render_records(title: str, records: Sequence[BaseModel], fmt: OutputFormat) -> str:
    """Render a flat list of models (audit suites, bias quantities) as one table."""
    match fmt:
        case OutputFormat.HUMAN:
            body = _frame_table(records, "simple", ".4g")
            return f"{title}\n{'=' * len(title)}\n{body}"
        case OutputFormat.CSV:
            frame = pd.DataFrame([record.model_dump() for record in records])
            return frame.to_csv(index=False, lineterminator="\n")
        case OutputFormat.JSON:
            payload = [json.loads(record.model_dump_json()) for record in records]
            return json.dumps({"title": title, "records": payload}, indent=2)
        case OutputFormat.MARKDOWN:
            return f"# {title}\n\n{_frame_table(records, 'pipe', '')}"


class FrontDoorCell(BaseModel):
    """One entry of the nonparametric front-door distribution P(y | do(x))."""

    model_config = ConfigDict(frozen=True)

    x: str
    y: str
    probability: float


# Report builders.


def scenario_section(config: ScenarioConfig) -> tuple[list[EstimateRow], TruthBlock]:
    """Simulate one scenario and tabulate its two-step fit against the truth."""
    output = simulate(config)
    data = output.observed
    result = fdc_two_step(data)
    name = f"DAG {config.dag}"
    rows = two_step_rows(name, result)
    known: dict[str, float | None] = {"naive_ols": naive_ols_effect(data)}
    if config.with_instrument:
        iv = iv_2sls(data)
        rows += iv_rows(name, iv)
        known["iv_estimate"] = iv[data.treatment]
    truth = scenario_truth(config)
    known |= {
        "ate": truth.ate,
        "pate": truth.pate,
        "estimate_limit": truth.estimate_limit,
        "limit_bias": truth.limit_bias,
        "calculated_ate": truth.calculated_ate,
        "calculated_bias": truth.calculated_bias,
    }
    return rows, truth_block(name, result, **known)


def monte_carlo_rows(summary: ReplicationSummary) -> list[MonteCarloRow]:
    stats = summary.stats
    return [
        MonteCarloRow(
            scenario=f"DAG {summary.config.dag}",
            metric=str(metric),
            mean=stats.loc["mean", metric],
            std=stats.loc["std", metric],
            q05=stats.loc["q0.05", metric],
            q50=stats.loc["q0.5", metric],
            q95=stats.loc["q0.95", metric],
        )
        for metric in stats.columns
    ]


def table1_report(
    n: int,
    seed: int,
    with_instrument: bool = False,
    reps: int = 0,
    workers: int = 1,
) -> ReportTable:
    """All four DAG scenarios end to end, one block each, plus truth and bias."""
    table = ReportTable(title=f"Two-step front-door estimates for DAGs 1-4 (n={n})")
    for dag in (1, 2, 3, 4):
        config = ScenarioConfig.create(
            dag=dag, n=n, seed=seed, with_instrument=with_instrument
        )
        rows, truth = scenario_section(config)
        table.rows.extend(rows)
        table.truth.append(truth)
        if reps:
            table.monte_carlo.extend(monte_carlo_rows(replicate(config, reps, workers)))
    return table
