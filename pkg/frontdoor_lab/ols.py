"""
Least-squares estimators: OLS with classical inference, the two-step linear
front-door estimator, and a single-instrument 2SLS comparator.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import linalg, special

from frontdoor_lab.errors import EstimationError, MissingColumnError

logger = logging.getLogger(__name__)

INTERCEPT = "Intercept"
# Limit on the condition number of the column-equilibrated cross-product matrix.
CONDITION_LIMIT = 1e10
WEAK_INSTRUMENT_T = 3.0


@dataclass(frozen=True, kw_only=True)
class Dataset:
    """Named numeric columns plus the role each column plays."""

    frame: pd.DataFrame
    treatment: str = "X"
    mediator: str = "M"
    outcome: str = "Y"
    instrument: str | None = None

    @classmethod
    def from_csv(cls, csv_file: Path, **roles: str | None) -> "Dataset":
        frame = pd.read_csv(csv_file, sep=",", decimal=".")
        return cls(frame=frame, **{k: v for k, v in roles.items() if v is not None})

    def to_csv(self, csv_file: Path) -> None:
        self.frame.to_csv(csv_file, index=False, lineterminator="\n")

    @property
    def n(self) -> int:
        return len(self.frame)

    def column(self, name: str) -> np.ndarray:
        if name not in self.frame.columns:
            raise MissingColumnError(name, [str(c) for c in self.frame.columns])
        values = pd.to_numeric(self.frame[name], errors="coerce").to_numpy(dtype=float)
        if np.isnan(values).any():
            raise EstimationError(f"Column '{name}' has missing or non-numeric values")
        return values


@dataclass(frozen=True, kw_only=True)
class CoefficientRow:
    name: str
    estimate: float
    std_error: float
    t_value: float
    p_value: float
    dropped: bool = False


@dataclass(frozen=True, kw_only=True)
class FitResult:
    """Coefficient table of one regression, dropped regressors included as NaN rows."""

    rows: tuple[CoefficientRow, ...]
    residual_variance: float
    df: int
    n: int
    residuals: np.ndarray = field(repr=False)

    def coefficient(self, name: str) -> CoefficientRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(f"No coefficient named '{name}'")

    def __getitem__(self, name: str) -> float:
        return self.coefficient(name).estimate

    @property
    def dropped(self) -> tuple[str, ...]:
        return tuple(row.name for row in self.rows if row.dropped)

    @property
    def retained(self) -> tuple[str, ...]:
        return tuple(row.name for row in self.rows if not row.dropped)


@dataclass(frozen=True, kw_only=True)
class IVResult(FitResult):
    """Second-stage 2SLS table with its first stage and instrument-strength flag."""

    first_stage: FitResult
    weak_instrument: bool


@dataclass(frozen=True, kw_only=True)
class TwoStepResult:
    step1: FitResult
    step2: FitResult
    treatment: str
    mediator: str

    @property
    def fdc_estimate(self) -> float:
        return self.step1[self.treatment] * self.step2[self.mediator]

    @property
    def x_dropped(self) -> bool:
        return self.treatment in self.step2.dropped

    @property
    def x_coefficient(self) -> CoefficientRow:
        """Step-2 treatment row; near zero when M carries every X -> Y path."""
        return self.step2.coefficient(self.treatment)

    @property
    def sobel_std_error(self) -> float:
        beta = self.step1.coefficient(self.treatment)
        delta = self.step2.coefficient(self.mediator)
        return float(
            np.sqrt(
                beta.estimate**2 * delta.std_error**2
                + delta.estimate**2 * beta.std_error**2
            )
        )

    @property
    def sobel_p_value(self) -> float:
        z = self.fdc_estimate / self.sobel_std_error
        return float(special.erfc(abs(z) / np.sqrt(2)))


def t_pvalue(t: float, df: int) -> float:
    """Two-sided Student-t tail probability, P(|T_df| >= |t|).

    Uses the regularized incomplete beta identity I_{df/(df+t^2)}(df/2, 1/2).
    """
    if df < 1:
        raise ValueError(f"Degrees of freedom must be at least 1, got {df}")
    t = float(t)
    if np.isnan(t):
        return float("nan")
    if np.isinf(t):
        return 0.0
    return float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


@dataclass(frozen=True)
class _Solution:
    coefficients: np.ndarray
    cross_inverse: np.ndarray
    kept: list[int]


def _scaled_condition(design: np.ndarray) -> float:
    cross = design.T @ design
    norms = np.sqrt(np.diag(cross))
    if np.any(norms == 0):
        return float("inf")
    return float(np.linalg.cond(cross / np.outer(norms, norms)))


def _screen_columns(design: np.ndarray, names: list[str]) -> list[int]:
    """Admit columns in priority order, skipping any that push the condition too high."""
    kept: list[int] = []
    for j in range(design.shape[1]):
        if _scaled_condition(design[:, kept + [j]]) > CONDITION_LIMIT:
            logger.warning(f"Dropping '{names[j]}': collinear with {[names[i] for i in kept]}")
            continue
        kept.append(j)
    return kept


def _least_squares(design: np.ndarray, y: np.ndarray, names: list[str]) -> _Solution:
    kept = _screen_columns(design, names)
    X = design[:, kept]
    cross = X.T @ X
    scale = 1.0 / np.sqrt(np.diag(cross))
    factor = linalg.cho_factor(cross * np.outer(scale, scale))

    def solve(rhs: np.ndarray) -> np.ndarray:
        return scale * linalg.cho_solve(factor, scale * rhs)

    b = solve(X.T @ y)
    # one step of iterative refinement
    b = b + solve(X.T @ (y - X @ b))
    cross_inverse = scale[:, None] * linalg.cho_solve(factor, np.diag(scale))
    return _Solution(coefficients=b, cross_inverse=cross_inverse, kept=kept)


def _build_fit(
    names: list[str],
    solution: _Solution,
    residuals: np.ndarray,
    n: int,
) -> FitResult:
    df = n - len(solution.kept)
    s2 = float(residuals @ residuals) / df
    std_errors = np.sqrt(np.clip(np.diag(solution.cross_inverse) * s2, 0.0, None))
    rows = []
    for j, name in enumerate(names):
        if j not in solution.kept:
            rows.append(
                CoefficientRow(
                    name=name,
                    estimate=float("nan"),
                    std_error=float("nan"),
                    t_value=float("nan"),
                    p_value=float("nan"),
                    dropped=True,
                )
            )
            continue
        k = solution.kept.index(j)
        estimate = float(solution.coefficients[k])
        se = float(std_errors[k])
        with np.errstate(divide="ignore", invalid="ignore"):
            t_value = float(np.divide(estimate, se))
        rows.append(
            CoefficientRow(
                name=name,
                estimate=estimate,
                std_error=se,
                t_value=t_value,
                p_value=t_pvalue(t_value, df),
            )
        )
    return FitResult(
        rows=tuple(rows), residual_variance=s2, df=df, n=n, residuals=residuals
    )


def _design(n: int, regressors: dict[str, np.ndarray]) -> tuple[np.ndarray, list[str]]:
    names = [INTERCEPT] + list(regressors)
    columns = [np.ones(n)] + [np.asarray(v, dtype=float) for v in regressors.values()]
    if any(c.shape != (n,) for c in columns):
        raise EstimationError("All regressors must have the same length as the outcome")
    return np.column_stack(columns), names


def ols_fit(y: np.ndarray, regressors: dict[str, np.ndarray]) -> FitResult:
    """OLS of y on an intercept plus regressors, in the given priority order.

    A regressor that is (nearly) collinear with higher-priority ones is flagged as
    dropped and the fit proceeds on the rest.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    design, names = _design(n, regressors)
    if n <= len(names):
        raise EstimationError(
            f"Need more observations than coefficients: n={n}, coefficients={len(names)}"
        )
    solution = _least_squares(design, y, names)
    residuals = y - design[:, solution.kept] @ solution.coefficients
    fit = _build_fit(names, solution, residuals, n)
    logger.debug(f"OLS on n={n}: retained {fit.retained}, dropped {fit.dropped}")
    return fit


def _require_variation(values: np.ndarray, name: str, role: str) -> None:
    if np.ptp(values) == 0:
        raise EstimationError(
            f"{role} column '{name}' has zero variance; the effects of X on M and of M "
            "on Y must be nonzero (Assumption 1, identifiability)"
        )


def fdc_two_step(data: Dataset) -> TwoStepResult:
    """Front-door two-step regression: M ~ X, then Y ~ M + X; estimate is beta * delta."""
    x = data.column(data.treatment)
    m = data.column(data.mediator)
    y = data.column(data.outcome)
    _require_variation(x, data.treatment, "Treatment")
    _require_variation(m, data.mediator, "Mediator")

    step1 = ols_fit(m, {data.treatment: x})
    # mediator listed first so that under collinearity X is the one dropped
    step2 = ols_fit(y, {data.mediator: m, data.treatment: x})
    result = TwoStepResult(
        step1=step1, step2=step2, treatment=data.treatment, mediator=data.mediator
    )
    logger.info(
        f"Two-step FDC on n={data.n}: beta={step1[data.treatment]:.4f}, "
        f"delta={step2[data.mediator]:.4f}, estimate={result.fdc_estimate:.4f}"
    )
    return result


def naive_ols_effect(data: Dataset) -> float:
    """Slope of Y ~ X, confounded whenever a common cause of X and Y exists."""
    x = data.column(data.treatment)
    return ols_fit(data.column(data.outcome), {data.treatment: x})[data.treatment]


def iv_2sls(data: Dataset) -> IVResult:
    """Two-stage least squares of Y on X instrumented by Z.

    Standard errors use the structural residuals y - b0 - b1 * x, not the
    second-stage residuals on the fitted treatment.
    """
    if data.instrument is None:
        raise EstimationError("2SLS needs an instrument column")
    z = data.column(data.instrument)
    x = data.column(data.treatment)
    y = data.column(data.outcome)
    _require_variation(z, data.instrument, "Instrument")

    first_stage = ols_fit(x, {data.instrument: z})
    first_t = first_stage.coefficient(data.instrument).t_value
    weak = not abs(first_t) >= WEAK_INSTRUMENT_T
    if weak:
        logger.warning(
            f"Weak instrument '{data.instrument}': first-stage |t| = {abs(first_t):.3f}"
        )

    x_hat = x - first_stage.residuals
    design, names = _design(data.n, {data.treatment: x_hat})
    solution = _least_squares(design, y, names)
    if len(solution.kept) < 2:
        raise EstimationError("Fitted treatment is constant; 2SLS is not identified")
    structural = y - np.column_stack([np.ones(data.n), x]) @ solution.coefficients
    fit = _build_fit(names, solution, structural, data.n)
    return IVResult(
        rows=fit.rows,
        residual_variance=fit.residual_variance,
        df=fit.df,
        n=fit.n,
        residuals=fit.residuals,
        first_stage=first_stage,
        weak_instrument=weak,
    )
