#!/usr/bin/env python3
"""
Invoke tasks for the front-door lab.
Wraps the test suite and the full reproduction run behind `inv`.
"""

from pathlib import Path

from invoke import Context, task

DEFAULT_OUTPUT_DIR = "lab_outputs"
DAGS = (1, 2, 3, 4)


def ensure_output_dir(output_dir: str) -> Path:
    """Ensure the output directory exists."""
    path = Path(output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


@task
def test(ctx: Context, keyword: str = "", verbose: bool = False) -> None:
    """Run the test suite. Pass -k to select tests by keyword."""
    args = ["pytest"]
    if keyword:
        args += ["-k", f'"{keyword}"']
    if verbose:
        args.append("-v")
    print("🧪 Running tests...")
    ctx.run(" ".join(args), pty=True)
    print("✅ Tests passed!")


@task
def reproduce(
    ctx: Context,
    n: int = 200,
    seed: int = 20240601,
    reps: int = 500,
    workers: int = 4,
    output_dir: str = DEFAULT_OUTPUT_DIR,
) -> None:
    """Oracle checks, one dataset per DAG, and the four-scenario table with Monte Carlo."""
    out = ensure_output_dir(output_dir)

    print("🔎 Checking the front-door formula and bias algebra against their oracles...")
    ctx.run("frontdoor-lab oracle-check", pty=True)
    print()

    for dag in DAGS:
        data_file = out / f"dag{dag}.csv"
        print(f"🎲 Simulating DAG {dag} ({n} units, seed {seed})")
        ctx.run(
            f"frontdoor-lab simulate --dag {dag} -n {n} --seed {seed} "
            f"--out {data_file} --format csv",
            hide=True,
        )

    print(f"📊 Running all four scenarios with {reps} replications each")
    print("⏱️  This may take a minute")
    for fmt, suffix in (("human", "txt"), ("markdown", "md"), ("json", "json")):
        ctx.run(
            f"frontdoor-lab table1 -n {n} --seed {seed} --reps {reps} "
            f"--workers {workers} --format {fmt} > {out / f'table1.{suffix}'}",
        )

    print()
    print("✅ Reproduction completed!")
    print(f"📁 Results saved to {out}/:")
    for dag in DAGS:
        print(f"   - dag{dag}.csv, dag{dag}.truth.csv (simulated data and truth)")
    print("   - table1.txt, table1.md, table1.json (estimates, truth and Monte Carlo)")
