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

"""Parameter sweeps over the parametric gain r, written as CSV."""

import csv
import logging
import math
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from typing import TextIO

from spinport.core.gaussian import GaussianState
from spinport.core.protocols import run_protocol
from spinport.core.steps import CompiledProtocol
from spinport.models import MAX_SQUEEZING, ProtocolConfig, ProtocolReport, SweepRow

log = logging.getLogger(__name__)

GRID_TOL = 1e-12
MAX_GRID_POINTS = 100_000
CSV_HEADER = (
    "r",
    "added_noise_x",
    "added_noise_p",
    "fidelity_coherent",
    "engine",
    "shots",
    "seed",
)


class GridError(ValueError):
    """Raised for malformed `start:stop:step` grid specifications."""

    code = "BAD_GRID"


def parse_grid(spec: str) -> list[float]:
    """Expand `start:stop:step` into an increasing grid including both endpoints.

    The stop value is included when it is reached within 1e-12. Every point must be a
    valid squeezing parameter.
    """
    parts = spec.split(":")
    if len(parts) != 3:
        raise GridError(f"Grid '{spec}' is not of the form start:stop:step.")
    try:
        start, stop, step = (float(part) for part in parts)
    except ValueError as error:
        raise GridError(f"Grid '{spec}' contains a non-number.") from error
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise GridError(f"Grid '{spec}' contains a non-finite value.")
    if step <= 0:
        raise GridError(f"Grid step must be positive, got {step}.")
    if start < 0 or stop > MAX_SQUEEZING:
        raise GridError(
            f"Grid '{spec}' leaves the squeezing range [0, {MAX_SQUEEZING:g}]."
        )
    if stop < start:
        raise GridError(f"Grid '{spec}' is empty: stop is below start.")
    count = math.floor((stop - start + GRID_TOL) / step) + 1
    if count > MAX_GRID_POINTS:
        raise GridError(f"Grid '{spec}' has {count} points; at most {MAX_GRID_POINTS}.")
    return [min(start + k * step, stop) for k in range(count)]


def _worst(values: list[float]) -> float | None:
    return max(values) if values else None


def sweep_row(r: float, report: ProtocolReport) -> SweepRow:
    """The CSV row of one report; multi-output protocols give their worst output."""
    return SweepRow(
        r=r,
        added_noise_x=_worst([entry.x for entry in report.added_noise]),
        added_noise_p=_worst([entry.p for entry in report.added_noise]),
        fidelity_coherent=report.fidelity_coherent,
        engine=report.engine,
        shots=report.shots,
        seed=report.seed,
    )


def sweep(
    build: Callable[[ProtocolConfig], CompiledProtocol],
    cfg: ProtocolConfig,
    grid: list[float],
    inputs: Mapping[str, GaussianState] | None = None,
    *,
    workers: int = 1,
    **engine_options,
) -> list[SweepRow]:
    """Run a protocol at every r of the grid; rows keep the grid order."""

    def run(r: float) -> SweepRow:
        point = cfg.model_copy(update={"r": r})
        report = run_protocol(build(point), point, inputs, **engine_options)
        log.debug("Sweep point done.", extra={"r": r, "engine": point.engine})
        return sweep_row(r, report)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(run, grid))


def _cell(value: object) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: list[SweepRow], stream: TextIO):
    """Write rows with the fixed column order."""
    writer = csv.DictWriter(stream, fieldnames=CSV_HEADER, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({key: _cell(getattr(row, key)) for key in CSV_HEADER})
