# Copyright 2021 - 2025 Universität Tübingen, DKFZ, EMBL, and Universität zu Köln
# for the German Human Genome-Phenome Archive (GHGA)
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Entrypoint of the package"""

import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated

import typer
from pydantic import ValidationError

from spinport.core.dsl import ScriptParseError, UnknownBuiltinError
from spinport.core.feasibility import FeasibilityError
from spinport.core.spin_light import SpinLightError
from spinport.core.steps import ProtocolConfigError
from spinport.core.sweep import GridError, write_csv
from spinport.core.validation import format_discrepancies, format_points
from spinport.main import (
    VALIDATED_BUILTINS,
    dump_tables,
    load_config,
    run_feasibility,
    run_request,
    run_sweep,
    run_validation,
)
from spinport.models import AtomReadout, Engine, ProtocolConfig, RunRequest

EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3

cli = typer.Typer(no_args_is_help=True)

ConfigOption = Annotated[
    Path | None, typer.Option("--config", help="Path of a config YAML file.")
]
OutOption = Annotated[
    Path | None, typer.Option("--out", "-o", help="Output file; stdout if omitted.")
]
ROption = Annotated[float, typer.Option("--r", min=0, help="Parametric gain r.")]
KappaOption = Annotated[float, typer.Option("--kappa", help="QND gain kappa.")]
RatioOption = Annotated[
    float | None,
    typer.Option(
        "--readout-ratio", "--ratio", help="Photon ratio of readout probes to EPR."
    ),
]
EngineOption = Annotated[Engine, typer.Option("--engine", help="Engine to run.")]
ShotsOption = Annotated[
    int | None, typer.Option("--shots", min=1, help="Monte Carlo trajectories.")
]
SeedOption = Annotated[
    int | None, typer.Option("--seed", min=0, help="Monte Carlo seed.")
]
GainOption = Annotated[
    list[str] | None,
    typer.Option("--gain", help="Override a script variable, NAME=VALUE."),
]
ReadoutOption = Annotated[
    AtomReadout, typer.Option("--atom-readout", help="Atomic readout variant.")
]


def _error(code: str, message: str):
    typer.secho(f"{code}: {message}", fg=typer.colors.RED, err=True)


@contextmanager
def _exit_codes(source: str = "") -> Iterator[None]:
    """Map exceptions to exit codes and print diagnostics to stderr."""
    try:
        yield
    except typer.Exit:
        raise
    except ScriptParseError as error:
        for diagnostic in error.diagnostics:
            prefix = f"{source}:" if source else ""
            typer.secho(f"{prefix}{diagnostic}", fg=typer.colors.RED, err=True)
        raise typer.Exit(EXIT_USAGE) from error
    except (UnknownBuiltinError, GridError, ProtocolConfigError) as error:
        _error(getattr(error, "code", "INVALID_INPUT"), str(error))
        raise typer.Exit(EXIT_USAGE) from error
    except FeasibilityError as error:
        code = "MISSING_PARAMETER" if error.missing else "INVALID_PARAMETER"
        _error(code, str(error))
        raise typer.Exit(EXIT_USAGE) from error
    except (ValidationError, SpinLightError, OSError) as error:
        _error("INVALID_INPUT", str(error))
        raise typer.Exit(EXIT_USAGE) from error
    except Exception as error:
        _error("INTERNAL_ERROR", f"{type(error).__name__}: {error}")
        raise typer.Exit(EXIT_INTERNAL) from error


def _gains(pairs: list[str] | None) -> dict[str, float]:
    gains = {}
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        try:
            if not sep or not name:
                raise ValueError(pair)
            gains[name] = float(value)
        except ValueError as error:
            raise ProtocolConfigError(
                f"Gain override '{pair}' is not NAME=VALUE."
            ) from error
    return gains


def _write(text: str, out: Path | None):
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")


def _input_means(
    x: float | None, p: float | None, b_x: float | None, b_p: float | None
) -> dict[str, tuple[float, float]]:
    means = {}
    if x is not None or p is not None:
        means["a"] = (x or 0.0, p or 0.0)
    if b_x is not None or b_p is not None:
        means["b"] = (b_x or 0.0, b_p or 0.0)
    return means


@cli.command(name="run")
def cmd_run(  # noqa: PLR0913
    builtin: Annotated[
        str | None, typer.Option("--builtin", help="Name of a builtin protocol.")
    ] = None,
    script: Annotated[
        Path | None, typer.Option("--script", help="Path of a .qp protocol script.")
    ] = None,
    r: ROption = 0.0,
    kappa: KappaOption = 1.0,
    readout_ratio: RatioOption = None,
    engine: EngineOption = Engine.ANALYTIC,
    shots: ShotsOption = None,
    seed: SeedOption = None,
    gain: GainOption = None,
    atom_readout: ReadoutOption = AtomReadout.QND,
    input_x: Annotated[float | None, typer.Option("--input-x")] = None,
    input_p: Annotated[float | None, typer.Option("--input-p")] = None,
    input_b_x: Annotated[float | None, typer.Option("--input-b-x")] = None,
    input_b_p: Annotated[float | None, typer.Option("--input-b-p")] = None,
    out: OutOption = None,
    config_yaml: ConfigOption = None,
):
    """Run a protocol and write its report as JSON."""
    with _exit_codes(str(script or "")):
        config = load_config(config_yaml)
        cfg = ProtocolConfig(
            r=r,
            kappa=kappa,
            readout_ratio=readout_ratio or config.default_readout_ratio,
            gains=_gains(gain),
            engine=engine,
            shots=shots or config.default_shots,
            seed=seed,
            atom_readout=atom_readout,
        )
        request = RunRequest(
            script=None if script is None else str(script),
            builtin=builtin,
            config=cfg,
            output=None if out is None else str(out),
            input_means=_input_means(input_x, input_p, input_b_x, input_b_p),
        )
        report = run_request(request, config)
        _write(report.to_json() + "\n", out)


@cli.command(name="sweep")
def cmd_sweep(  # noqa: PLR0913
    builtin: Annotated[str, typer.Option("--builtin", help="Builtin protocol.")],
    grid: Annotated[
        str, typer.Option("--grid", help="Grid of r values, start:stop:step.")
    ],
    kappa: KappaOption = 1.0,
    readout_ratio: RatioOption = None,
    engine: EngineOption = Engine.ANALYTIC,
    shots: ShotsOption = None,
    seed: SeedOption = None,
    gain: GainOption = None,
    atom_readout: ReadoutOption = AtomReadout.QND,
    out: OutOption = None,
    config_yaml: ConfigOption = None,
):
    """Sweep the parametric gain and write one CSV row per grid point."""
    with _exit_codes():
        config = load_config(config_yaml)
        cfg = ProtocolConfig(
            kappa=kappa,
            readout_ratio=readout_ratio or config.default_readout_ratio,
            gains=_gains(gain),
            engine=engine,
            shots=shots or config.default_shots,
            seed=seed,
            atom_readout=atom_readout,
        )
        rows = run_sweep(builtin, grid, cfg, config)
        if out is None:
            write_csv(rows, sys.stdout)
        else:
            with out.open("w", encoding="utf-8", newline="") as stream:
                write_csv(rows, stream)


@cli.command(name="feasibility")
def cmd_feasibility(
    params: Annotated[Path, typer.Argument(help="TOML or JSON parameter file.")],
    out: OutOption = None,
    config_yaml: ConfigOption = None,
):
    """Evaluate an experimental design; warnings do not fail the command."""
    with _exit_codes():
        load_config(config_yaml)
        report = run_feasibility(params)
        for check in report.warnings:
            typer.secho(
                f"warning: {check.name} = {check.value:.6g} ({check.anchor})",
                fg=typer.colors.YELLOW,
                err=True,
            )
        _write(report.to_json() + "\n", out)


@cli.command(name="validate")
def cmd_validate(  # noqa: PLR0913
    builtin: Annotated[
        list[str] | None,
        typer.Option("--builtin", help="Builtin to validate; all if omitted."),
    ] = None,
    ratio: Annotated[
        list[float] | None,
        typer.Option("--ratio", "--readout-ratio", help="Readout ratios to use."),
    ] = None,
    shots: ShotsOption = None,
    seed: SeedOption = None,
    dump_table: Annotated[
        Path | None, typer.Option("--dump-table", help="Write oracle tables as JSON.")
    ] = None,
    perturb_gain: Annotated[float, typer.Option("--perturb-gain", hidden=True)] = 0.0,
    config_yaml: ConfigOption = None,
):
    """Check the analytic engine, Monte Carlo engine and oracle against each other."""
    with _exit_codes():
        config = load_config(config_yaml)
        result = run_validation(
            builtin or VALIDATED_BUILTINS,
            config,
            readout_ratios=ratio,
            shots=shots,
            seed=seed,
            perturbation=perturb_gain,
        )
        if dump_table is not None:
            dump_tables(result, dump_table)
        typer.echo(format_points(result.points))
        if not result.passed:
            typer.echo(format_discrepancies(result.discrepancies))
            raise typer.Exit(EXIT_MISMATCH)
