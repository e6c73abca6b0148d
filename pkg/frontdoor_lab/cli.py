"""
Command-line front end: `frontdoor-lab <command> [flags]`.

Commands: simulate, estimate, table1, bias-audit, oracle-check.
Exit codes: 0 success, 1 usage error, 2 data error, 3 oracle-check failure.
"""

import logging
import sys
from contextlib import contextmanager
from pathlib import Path

from invoke import Collection, Context, Program, task
from invoke.exceptions import Exit
from pydantic import ValidationError

from frontdoor_lab import __version__, audit, report, scenarios
from frontdoor_lab.bias import MixedPathParams
from frontdoor_lab.config import default_seed, default_workers, log_level
from frontdoor_lab.discrete import (
    JointXMY,
    StructuralWorld,
    average_causal_effect,
    front_door_table,
    joint_from_samples,
)
from frontdoor_lab.errors import ConfigError, FrontDoorLabError, ScenarioError
from frontdoor_lab.ols import (
    WEAK_INSTRUMENT_T,
    Dataset,
    fdc_two_step,
    iv_2sls,
    naive_ols_effect,
)
from frontdoor_lab.population import BinaryPopulation
from frontdoor_lab.report import OutputFormat

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ORACLE = 3

FORMAT_HELP = "Output format: human, csv, json or markdown"
VERBOSE_HELP = "Log at DEBUG level to stderr"


def _configure_logging(verbose: bool) -> None:
    try:
        level = logging.DEBUG if verbose else log_level()
    except ConfigError as e:
        raise Exit(f"❌ {e.message}", code=EXIT_USAGE)
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
        force=True,
    )


@contextmanager
def _exit_codes():
    """Translate library errors into exit statuses."""
    try:
        yield
    except (ScenarioError, ConfigError) as e:
        raise Exit(f"❌ {e.message}", code=EXIT_USAGE)
    except FrontDoorLabError as e:
        raise Exit(f"❌ {e.message}", code=EXIT_DATA)
    except ValidationError as e:
        raise Exit(f"❌ Invalid input document: {e}", code=EXIT_DATA)
    except (OSError, ValueError) as e:
        raise Exit(f"❌ {e}", code=EXIT_DATA)


def _output_format(value: str) -> OutputFormat:
    try:
        return OutputFormat(value.lower())
    except ValueError:
        choices = ", ".join(f.value for f in OutputFormat)
        raise Exit(f"❌ Unknown format '{value}'. Available: {choices}", code=EXIT_USAGE)


def _seed(value: str | None) -> int:
    if value is None:
        return default_seed()
    try:
        return int(value)
    except ValueError:
        raise Exit(f"❌ --seed must be an integer, got '{value}'", code=EXIT_USAGE)


def _overrides(pairs: list[str] | None) -> dict[str, float]:
    """Parse repeated `--override name=value` flags."""
    parsed = {}
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        try:
            if not sep:
                raise ValueError
            parsed[name.strip()] = float(value)
        except ValueError:
            raise Exit(f"❌ Overrides look like name=value, got '{pair}'", code=EXIT_USAGE)
    return parsed


def _scenario_config(**fields) -> scenarios.ScenarioConfig:
    try:
        return scenarios.ScenarioConfig.create(**fields)
    except ScenarioError as e:
        raise Exit(f"❌ {e.message}", code=EXIT_USAGE)


@task(
    iterable=["override"],
    help={
        "dag": "Scenario 1-4",
        "n": "Number of units",
        "seed": "64-bit seed (default: FRONTDOOR_LAB_SEED)",
        "out": "CSV file for the observed columns",
        "truth-out": "CSV file for the truth sidecar (default: <out stem>.truth.csv)",
        "combined": "Write observed and truth columns to one CSV",
        "override": "Coefficient override name=value, repeatable",
        "confounder": "Confounder law: normal, uniform or skewed",
        "instrument": "Add an instrument column Z entering X",
        "format": FORMAT_HELP,
        "verbose": VERBOSE_HELP,
    },
)
def simulate(
    c: Context,
    dag: int = 1,
    n: int = 200,
    seed: str | None = None,
    out: str | None = None,
    truth_out: str | None = None,
    combined: bool = False,
    override: list[str] | None = None,
    confounder: str = "normal",
    instrument: bool = False,
    format: str = "human",
    verbose: bool = False,
) -> None:
    """Simulate one DAG scenario and write it as CSV."""
    _configure_logging(verbose)
    fmt = _output_format(format)
    if not out:
        raise Exit("❌ --out is required", code=EXIT_USAGE)
    with _exit_codes():
        config = _scenario_config(
            dag=dag,
            n=n,
            seed=_seed(seed),
            overrides=_overrides(override),
            confounder_dist=confounder,
            with_instrument=instrument,
        )
        output = scenarios.simulate(config)
        out_path = Path(out)
        if combined:
            output.combined().to_csv(out_path, index=False, lineterminator="\n")
            written = [out_path]
        else:
            truth_path = (
                Path(truth_out)
                if truth_out
                else out_path.with_name(f"{out_path.stem}.truth.csv")
            )
            output.observed.to_csv(out_path)
            output.truth.to_csv(truth_path, index=False, lineterminator="\n")
            written = [out_path, truth_path]
        quantities = audit.audit_scenario(config)

    if fmt is OutputFormat.HUMAN:
        print(f"✅ Simulated DAG {dag}: {config.n} units, seed {config.seed}")
        for path in written:
            print(f"📁 Wrote {path}")
        print()
    print(report.render_records(f"DAG {dag} truth", quantities, fmt))


@task(
    help={
        "data": "Input CSV with a header row",
        "treatment": "Treatment column",
        "mediator": "Mediator column",
        "outcome": "Outcome column",
        "instrument": "Instrument column; adds a 2SLS block",
        "discrete": "Treat columns as discrete labels and apply the front-door formula",
        "format": FORMAT_HELP,
        "verbose": VERBOSE_HELP,
    }
)
def estimate(
    c: Context,
    data: str,
    treatment: str = "X",
    mediator: str = "M",
    outcome: str = "Y",
    instrument: str | None = None,
    discrete: bool = False,
    format: str = "human",
    verbose: bool = False,
) -> None:
    """Two-step front-door regression (or the discrete front-door formula) on a CSV."""
    _configure_logging(verbose)
    fmt = _output_format(format)
    with _exit_codes():
        dataset = Dataset.from_csv(
            Path(data),
            treatment=treatment,
            mediator=mediator,
            outcome=outcome,
            instrument=instrument,
        )
        if discrete:
            joint = joint_from_samples(
                dataset.frame, dataset.treatment, dataset.mediator, dataset.outcome
            )
            _print_front_door(joint, fmt)
            return
        name = Path(data).stem
        result = fdc_two_step(dataset)
        rows = report.two_step_rows(name, result)
        known = {"naive_ols": naive_ols_effect(dataset)}
        weak = False
        if instrument:
            iv = iv_2sls(dataset)
            rows += report.iv_rows(name, iv)
            known["iv_estimate"] = iv[treatment]
            weak = iv.weak_instrument
        table = report.ReportTable(
            title=f"Two-step front-door estimate: {data}",
            rows=rows,
            truth=[report.truth_block(name, result, **known)],
        )

    print(report.render(table, fmt))
    if fmt is OutputFormat.HUMAN:
        print()
        print(f"📊 Front-door estimate: {result.fdc_estimate:.4f}")
        if result.x_dropped:
            print(f"⚠️  '{treatment}' dropped from step 2: collinear with '{mediator}'")
        if weak:
            print(f"⚠️  Weak instrument: first-stage |t| below {WEAK_INSTRUMENT_T:g}")


def _print_front_door(joint: JointXMY, fmt: OutputFormat) -> None:
    with _exit_codes():
        table = front_door_table(joint)
    cells = [
        report.FrontDoorCell(x=x, y=y, probability=float(table[i, j]))
        for i, x in enumerate(joint.x_labels)
        for j, y in enumerate(joint.y_labels)
    ]
    print(report.render_records("Front-door P(y | do(x))", cells, fmt))
    if fmt is OutputFormat.HUMAN and len(joint.x_labels) >= 2:
        try:
            ace = average_causal_effect(table[-1], table[0], joint.y_labels)
        except ValueError:
            logger.debug("Outcome labels are not numeric; skipping the average effect")
            return
        print()
        print(
            f"📊 E[Y | do({joint.x_labels[-1]})] - E[Y | do({joint.x_labels[0]})] = {ace:.4f}"
        )


@task(
    help={
        "n": "Units per scenario",
        "seed": "64-bit seed (default: FRONTDOOR_LAB_SEED)",
        "instrument": "Add Z to every scenario and append a 2SLS block",
        "reps": "Monte Carlo replications per scenario (0: none)",
        "workers": "Threads for replications (default: FRONTDOOR_LAB_WORKERS)",
        "format": FORMAT_HELP,
        "verbose": VERBOSE_HELP,
    }
)
def table1(
    c: Context,
    n: int = 200,
    seed: str | None = None,
    instrument: bool = False,
    reps: int = 0,
    workers: int = 0,
    format: str = "human",
    verbose: bool = False,
) -> None:
    """Run all four DAG scenarios and print one combined estimate table."""
    _configure_logging(verbose)
    fmt = _output_format(format)
    if reps < 0 or workers < 0:
        raise Exit("❌ --reps and --workers must be nonnegative", code=EXIT_USAGE)
    with _exit_codes():
        table = report.table1_report(
            n=n,
            seed=_seed(seed),
            with_instrument=instrument,
            reps=reps,
            workers=workers or default_workers(),
        )
    print(report.render(table, fmt))


@task(
    iterable=["override"],
    help={
        "population": "BinaryPopulation JSON file (list of subgroup records)",
        "params": "MixedPathParams JSON file",
        "dag": "Scenario 1-4",
        "override": "Coefficient override name=value for --dag, repeatable",
        "format": FORMAT_HELP,
        "verbose": VERBOSE_HELP,
    },
)
def bias_audit(
    c: Context,
    population: str | None = None,
    params: str | None = None,
    dag: int = 0,
    override: list[str] | None = None,
    format: str = "human",
    verbose: bool = False,
) -> None:
    """Compute every bias quantity for a population, parameter set or scenario."""
    _configure_logging(verbose)
    fmt = _output_format(format)
    sources = [bool(population), bool(params), bool(dag)]
    if sum(sources) != 1:
        raise Exit(
            "❌ Give exactly one of --population, --params or --dag", code=EXIT_USAGE
        )
    with _exit_codes():
        if population:
            title = f"Bias audit: {population}"
            quantities = audit.audit_population(
                BinaryPopulation.from_json_file(Path(population))
            )
        elif params:
            title = f"Bias audit: {params}"
            quantities = audit.audit_params(MixedPathParams.from_json_file(Path(params)))
        else:
            title = f"Bias audit: DAG {dag}"
            config = _scenario_config(
                dag=dag, seed=default_seed(), overrides=_overrides(override)
            )
            quantities = audit.audit_scenario(config)
    print(report.render_records(title, quantities, fmt))


@task(
    help={
        "sweeps": "Random worlds per suite (the algebraic suites run 10x as many)",
        "seed": "Seed of the random sweeps",
        "negate-condition1": "Give every world a direct X -> Y effect; the front-door "
        "suite must then fail",
        "world": "StructuralWorld JSON file: check the formula against this world only",
        "joint": "JointXMY JSON file: print its front-door P(y | do(x)) table",
        "format": FORMAT_HELP,
        "verbose": VERBOSE_HELP,
    }
)
def oracle_check(
    c: Context,
    sweeps: int = audit.DEFAULT_SWEEPS,
    seed: int = 0,
    negate_condition1: bool = False,
    world: str | None = None,
    joint: str | None = None,
    format: str = "human",
    verbose: bool = False,
) -> None:
    """Check the front-door formula and bias algebra against independent oracles."""
    _configure_logging(verbose)
    fmt = _output_format(format)
    if world and joint:
        raise Exit("❌ Give at most one of --world or --joint", code=EXIT_USAGE)
    if world:
        _check_world_file(world, fmt)
        return
    if joint:
        with _exit_codes():
            loaded = JointXMY.from_json_file(Path(joint))
        _print_front_door(loaded, fmt)
        return
    if sweeps < 1:
        raise Exit("❌ --sweeps must be at least 1", code=EXIT_USAGE)
    results = audit.run_oracle_suites(
        sweeps=sweeps, seed=seed, negate_condition1=negate_condition1
    )
    print(report.render_records("Oracle checks", results, fmt))
    failed = [result.suite for result in results if not result.ok]
    if fmt is OutputFormat.HUMAN:
        print()
        for result in results:
            if result.status is audit.SuiteStatus.EXPECTED_FAILURE:
                print(f"⚠️  Expected failure: {result.suite}")
        if failed:
            print(f"❌ Failed: {', '.join(failed)}")
        else:
            print("✅ All suites passed")
    if failed:
        raise Exit(code=EXIT_ORACLE)


def _check_world_file(path: str, fmt: OutputFormat) -> None:
    with _exit_codes():
        check = audit.check_world(StructuralWorld.from_json_file(Path(path)))
    print(report.render_records(f"Front-door vs oracle: {path}", check.cells, fmt))
    if fmt is OutputFormat.HUMAN:
        print()
        print(f"📊 Max deviation {check.max_deviation:.3e} (tolerance {check.tolerance:g})")
        if not check.condition1_holds:
            print("⚠️  Condition 1 violated: X affects Y directly, so a mismatch is expected")
        if check.ok:
            print(f"✅ {check.status}")
        else:
            print(f"❌ {check.status}")
    if not check.ok:
        raise Exit(code=EXIT_ORACLE)


class LabProgram(Program):
    """Also accepts `--n` for the one-letter `-n` flag."""

    def normalize_argv(self, argv) -> None:
        super().normalize_argv(argv)
        normalized = []
        for arg in self.argv:
            if arg == "--n":
                normalized.append("-n")
            elif arg.startswith("--n="):
                normalized += ["-n", arg.removeprefix("--n=")]
            else:
                normalized.append(arg)
        self.argv = normalized


program = LabProgram(
    namespace=Collection.from_module(sys.modules[__name__]),
    name="frontdoor-lab",
    binary="frontdoor-lab",
    version=__version__,
)
