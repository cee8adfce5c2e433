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
"""Configuration and composition of the commands"""

import json
import logging
from collections.abc import Callable, Iterable
from pathlib import Path

from hexkit.log import configure_logging

from spinport.config import Config
from spinport.core import dsl
from spinport.core.feasibility import design_report, load_params
from spinport.core.gaussian import GaussianState, coherent
from spinport.core.protocols import run_protocol
from spinport.core.steps import CompiledProtocol, ProtocolConfigError
from spinport.core.sweep import parse_grid, sweep
from spinport.core.validation import ValidationResult, validate
from spinport.models import (
    AtomReadout,
    Engine,
    FeasibilityReport,
    ProtocolConfig,
    ProtocolReport,
    RunRequest,
    SweepRow,
)

log = logging.getLogger(__name__)

VALIDATED_BUILTINS = ("atom_to_light", "atom_to_atom", "swap")


class SeedRequiredError(ProtocolConfigError):
    """Raised for Monte Carlo runs without a seed from the command line or config."""

    code = "SEED_REQUIRED"


def load_config(config_yaml: Path | None = None) -> Config:
    """Load the config and set up logging."""
    if config_yaml is None:
        config = Config()  # type: ignore
    else:
        config = Config(config_yaml=config_yaml)  # type: ignore
    configure_logging(config=config)
    return config


def resolve_seed(cfg: ProtocolConfig, config: Config) -> ProtocolConfig:
    """Fill in the configured default seed; Monte Carlo runs must end up with one."""
    if cfg.seed is None and config.seed is not None:
        cfg = cfg.model_copy(update={"seed": config.seed})
    if cfg.engine == Engine.MONTE_CARLO and cfg.seed is None:
        raise SeedRequiredError(
            "Monte Carlo runs need --seed or the SPINPORT_SEED setting."
        )
    return cfg


def load_script(script: str | None, builtin: str | None) -> dsl.ProtocolAST:
    """Parse a script file or a builtin script; exactly one must be given."""
    if (script is None) == (builtin is None):
        raise ProtocolConfigError("Give exactly one of a script path or a builtin.")
    if script is not None:
        return dsl.parse(Path(script).read_bytes())
    return dsl.builtin(builtin)  # type: ignore[arg-type]


def protocol_factory(
    script: str | None, builtin: str | None, config: Config
) -> Callable[[ProtocolConfig], CompiledProtocol]:
    """Compiler of the chosen script for any configuration.

    The builtin `atom_to_light` follows the configured atom readout.
    """
    ast = load_script(script, builtin)
    destructive = (
        dsl.builtin("atom_to_light_destructive") if builtin == "atom_to_light" else ast
    )

    def build(cfg: ProtocolConfig) -> CompiledProtocol:
        chosen = destructive if cfg.atom_readout == AtomReadout.DESTRUCTIVE else ast
        return dsl.compile_protocol(chosen, cfg, config.stokes_norm)

    return build


def coherent_inputs(
    protocol: CompiledProtocol, means: dict[str, tuple[float, float]]
) -> dict[str, GaussianState]:
    """Coherent input states; `a` and `b` address the first and second input."""
    states = {}
    for slot, (x, p) in means.items():
        position = "ab".index(slot)
        if position >= len(protocol.inputs):
            raise ProtocolConfigError(
                f"Protocol '{protocol.name}' has {len(protocol.inputs)} input(s);"
                + f" no input '{slot}'."
            )
        label = protocol.inputs[position]
        states[label] = coherent(x, p, label)
    return states


def run_request(request: RunRequest, config: Config) -> ProtocolReport:
    """Run one protocol as requested."""
    cfg = resolve_seed(request.config, config)
    build = protocol_factory(request.script, request.builtin, config)
    protocol = build(cfg)
    inputs = coherent_inputs(protocol, request.input_means)
    log.info(
        "Running protocol.",
        extra={"protocol": protocol.name, "engine": cfg.engine, "r": cfg.r},
    )
    return run_protocol(
        protocol,
        cfg,
        inputs,
        block_size=config.shot_block_size,
        workers=config.workers,
    )


def run_sweep(
    builtin: str, grid_spec: str, cfg: ProtocolConfig, config: Config
) -> list[SweepRow]:
    """Sweep a builtin over a grid of r values."""
    grid = parse_grid(grid_spec)
    cfg = resolve_seed(cfg, config)
    build = protocol_factory(None, builtin, config)
    log.info("Sweeping protocol.", extra={"protocol": builtin, "points": len(grid)})
    return sweep(
        build,
        cfg,
        grid,
        workers=config.workers,
        block_size=config.shot_block_size,
    )


def run_feasibility(path: Path) -> FeasibilityReport:
    """Feasibility report of a parameter file."""
    return design_report(load_params(path))


def run_validation(  # noqa: PLR0913
    builtins: Iterable[str],
    config: Config,
    *,
    readout_ratios: Iterable[float] | None = None,
    shots: int | None = None,
    seed: int | None = None,
    perturbation: float = 0.0,
) -> ValidationResult:
    """Validate builtins with both engines and the oracle over the config grid."""
    seed = seed if seed is not None else (config.seed or 0)
    options = {
        "shots": shots or config.validation_shots,
        "seed": seed,
        "sigma": config.validation_sigma,
        "oracle_tolerance": config.oracle_tolerance,
        "perturbation": perturbation,
        "block_size": config.shot_block_size,
        "workers": config.workers,
    }
    if readout_ratios:
        options["readout_ratios"] = tuple(readout_ratios)
    points = []
    for name in builtins:
        build = protocol_factory(None, name, config)
        log.info("Validating protocol.", extra={"protocol": name})
        points += validate(build, ProtocolConfig(), **options).points
    return ValidationResult(points=points)


def dump_tables(result: ValidationResult, path: Path):
    """Write the oracle tables of all validation points as JSON."""
    tables = [
        {
            "r": point.r,
            "readout_ratio": point.readout_ratio,
            "table": point.table.to_dict(),
        }
        for point in result.points
        if point.table is not None
    ]
    path.write_text(json.dumps(tables, indent=2, default=str) + "\n", encoding="utf-8")
