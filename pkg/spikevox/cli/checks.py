# -*- coding: utf-8 -*-
"""Command to run the built-in property checks."""
from typing import Annotated, List, Optional

import typer
from rich import print

from .main import SeedOption, app, echo_config


@app.command()
def selftest(
    check: Annotated[
        Optional[List[str]],
        typer.Option("--check", "-c", help="Only run this check. Can be used multiple times."),
    ] = None,
    seed: SeedOption = 0,
    table_format: Annotated[str, typer.Option("--table-format", help="Any `tabulate` table format.")] = "simple",
):
    """Verify the sparse kernels, neurons, network and energy model against their references.

    \bExits with code 0 if every check passes and with code 4 otherwise.
    """
    from tabulate import tabulate

    from ..exceptions import ConfigError, NumericError
    from ..selftest import CHECKS, run_check

    names = check or list(CHECKS)
    unknown = set(names) - set(CHECKS)

    if unknown:
        raise ConfigError(f"unknown checks {sorted(unknown)}, choose from {sorted(CHECKS)}")

    echo_config(checks=names, seed=seed)
    results = []

    for name in names:
        result = run_check(name, seed)
        results.append(result)
        status = "[bold green]PASS[/]" if result.passed else "[bold red]FAIL[/]"
        print(f"{status} {name} ({result.seconds:.2f} s)")

    rows = [(r.name, "pass" if r.passed else "FAIL", f"{r.seconds:.2f}", r.detail) for r in results]
    typer.echo(tabulate(rows, headers=("check", "result", "seconds", "detail"), tablefmt=table_format))

    failed = [result.name for result in results if not result.passed]

    if failed:
        print(f"[bold red]Error:[/] {len(failed)} of {len(results)} checks failed: {', '.join(failed)}")
        raise typer.Exit(NumericError.exit_code)

    print(f"[bold green]Success:[/] All {len(results)} checks passed.")
