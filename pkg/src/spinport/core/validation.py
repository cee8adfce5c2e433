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

"""Cross-validation of the analytic engine, the Monte Carlo engine and the oracle.

At every point of the configuration grid the analytic output moments are compared with
the oracle to an absolute tolerance scaled by max(1, |value|), and the Monte Carlo
estimates with the analytic values to `sigma` standard errors plus 1e-9. Commutator
defects of the oracle table count as discrepancies too.
"""

import logging
import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field, replace

from spinport.core.engines import unit_factor
from spinport.core.oracle import QUADRATURES, OracleTable, propagate
from spinport.core.protocols import run_protocol
from spinport.core.steps import CompiledProtocol, Displace
from spinport.models import Engine, ProtocolConfig, ProtocolReport

log = logging.getLogger(__name__)

GRID_R = (0.0, 0.5, 1.0, 2.0)
GRID_READOUT_RATIOS = (1e2, 1e4, 1e6)
MC_SLACK = 1e-9


@dataclass(frozen=True)
class Discrepancy:
    """A compared quantity that disagrees beyond its tolerance."""

    protocol: str
    r: float
    readout_ratio: float
    check: str
    quantity: str
    expected: float
    actual: float
    tolerance: float


@dataclass
class ValidationPoint:
    """Result at one grid point."""

    protocol: str
    r: float
    readout_ratio: float
    residual_noise: float | None
    discrepancies: list[Discrepancy] = field(default_factory=list)
    table: OracleTable | None = None


@dataclass
class ValidationResult:
    """All grid points of a validation run."""

    points: list[ValidationPoint]

    @property
    def discrepancies(self) -> list[Discrepancy]:
        """Discrepancies of all points, in grid order."""
        return [d for point in self.points for d in point.discrepancies]

    @property
    def passed(self) -> bool:
        """Whether the engines and the oracle agree everywhere."""
        return not self.discrepancies


def perturb_gain(protocol: CompiledProtocol, delta: float) -> CompiledProtocol:
    """Shift the first feedforward gain of a protocol by `delta`."""
    steps = list(protocol.steps)
    for k, step in enumerate(steps):
        if isinstance(step, Displace) and step.terms:
            (outcome, gain), *rest = step.terms
            steps[k] = replace(step, terms=((outcome, gain + delta), *rest))
            return replace(protocol, steps=tuple(steps))
    return protocol


def residual_noise(report: ProtocolReport) -> float | None:
    """Largest added noise beyond the squeezing term e^{-2r}."""
    if not report.added_noise:
        return None
    floor = math.exp(-2 * report.config.r)
    return max(max(n.x, n.p) for n in report.added_noise) - floor


def _oracle_discrepancies(
    report: ProtocolReport,
    table: OracleTable,
    reference: CompiledProtocol,
    tol: float,
) -> Iterable[tuple[str, float, float, float]]:
    initial = reference.initial_state()
    for moments in report.output_moments:
        mean, cov = table.moments(moments.label, initial)
        unit = unit_factor(reference, moments.label)
        mean, cov = unit * mean, unit**2 * cov
        for k, q in enumerate(QUADRATURES):
            expected, actual = float(mean[k]), moments.mean[k]
            bound = tol * max(1.0, abs(expected))
            if abs(actual - expected) > bound:
                yield f"{moments.label}.mean.{q}", expected, actual, bound
            for m, q2 in enumerate(QUADRATURES):
                expected = float(cov[k, m])
                actual = moments.cov[k][m]  # type: ignore[index]
                bound = tol * max(1.0, abs(expected))
                if abs(actual - expected) > bound:
                    yield f"{moments.label}.cov.{q}{q2}", expected, actual, bound
    for a, b, defect in table.commutator_defect():
        yield f"[{a}, {b}]", 0.0, defect, 0.0


def _mc_discrepancies(
    analytic: ProtocolReport, mc: ProtocolReport, sigma: float
) -> Iterable[tuple[str, float, float, float]]:
    for exact, sampled in zip(analytic.output_moments, mc.output_moments, strict=True):
        if sampled.cov is None or sampled.cov_stderr is None:
            continue
        for k, q in enumerate(QUADRATURES):
            bound = sigma * sampled.mean_stderr[k] + MC_SLACK  # type: ignore[index]
            if abs(sampled.mean[k] - exact.mean[k]) > bound:
                yield f"{exact.label}.mean.{q}", exact.mean[k], sampled.mean[k], bound
            for m, q2 in enumerate(QUADRATURES):
                expected = exact.cov[k][m]  # type: ignore[index]
                actual = sampled.cov[k][m]
                bound = sigma * sampled.cov_stderr[k][m] + MC_SLACK
                if abs(actual - expected) > bound:
                    yield f"{exact.label}.cov.{q}{q2}", expected, actual, bound


def validate_point(  # noqa: PLR0913
    build: Callable[[ProtocolConfig], CompiledProtocol],
    cfg: ProtocolConfig,
    *,
    shots: int,
    seed: int,
    sigma: float,
    oracle_tolerance: float,
    perturbation: float = 0.0,
    **engine_options,
) -> ValidationPoint:
    """Compare the three engines for one configuration.

    A nonzero `perturbation` shifts the first feedforward gain seen by the two engines
    but not by the oracle.
    """
    reference = build(cfg)
    protocol = perturb_gain(reference, perturbation) if perturbation else reference
    analytic_cfg = cfg.model_copy(update={"engine": Engine.ANALYTIC})
    mc_cfg = cfg.model_copy(
        update={"engine": Engine.MONTE_CARLO, "shots": shots, "seed": seed}
    )
    analytic = run_protocol(protocol, analytic_cfg)
    mc = run_protocol(protocol, mc_cfg, **engine_options)
    table = propagate(reference)

    point = ValidationPoint(
        protocol=reference.name,
        r=cfg.r,
        readout_ratio=cfg.readout_ratio,
        residual_noise=residual_noise(analytic),
        table=table,
    )
    found = [
        ("oracle", *item)
        for item in _oracle_discrepancies(analytic, table, reference, oracle_tolerance)
    ]
    found += [("monte_carlo", *item) for item in _mc_discrepancies(analytic, mc, sigma)]
    for check, quantity, expected, actual, tolerance in found:
        point.discrepancies.append(
            Discrepancy(
                protocol=point.protocol,
                r=point.r,
                readout_ratio=point.readout_ratio,
                check=check,
                quantity=quantity,
                expected=expected,
                actual=actual,
                tolerance=tolerance,
            )
        )
        log.warning(
            "Validation mismatch.",
            extra={"protocol": point.protocol, "check": check, "quantity": quantity},
        )
    return point


def validate(
    build: Callable[[ProtocolConfig], CompiledProtocol],
    cfg: ProtocolConfig,
    *,
    r_values: Iterable[float] = GRID_R,
    readout_ratios: Iterable[float] = GRID_READOUT_RATIOS,
    **options,
) -> ValidationResult:
    """Validate a protocol over the product grid of r and readout ratio."""
    ratios = tuple(readout_ratios)
    points = [
        validate_point(
            build,
            cfg.model_copy(update={"r": r, "readout_ratio": ratio}),
            **options,
        )
        for r in r_values
        for ratio in ratios
    ]
    return ValidationResult(points=points)


def format_points(points: list[ValidationPoint]) -> str:
    """Summary table with the residual noise of every grid point."""
    lines = [f"{'protocol':<16} {'r':>5} {'ratio':>8} {'residual_noise':>15} status"]
    for point in points:
        residual = (
            "-" if point.residual_noise is None else f"{point.residual_noise:.6e}"
        )
        status = "ok" if not point.discrepancies else "MISMATCH"
        lines.append(
            f"{point.protocol:<16} {point.r:>5.2f} {point.readout_ratio:>8.0e}"
            + f" {residual:>15} {status}"
        )
    lines.append(
        "residual_noise: largest added noise minus e^{-2r}; protocols that read"
        + " through coherent probes include 1/(2 readout_ratio) per probed quadrature."
    )
    return "\n".join(lines)


def format_discrepancies(discrepancies: list[Discrepancy]) -> str:
    """Table of all discrepancies."""
    lines = [
        f"{'protocol':<16} {'r':>5} {'ratio':>8} {'check':<12} {'quantity':<24}"
        + f" {'expected':>14} {'actual':>14} {'tolerance':>10}"
    ]
    lines += [
        f"{d.protocol:<16} {d.r:>5.2f} {d.readout_ratio:>8.0e} {d.check:<12}"
        + f" {d.quantity:<24} {d.expected:>14.6e} {d.actual:>14.6e}"
        + f" {d.tolerance:>10.1e}"
        for d in discrepancies
    ]
    return "\n".join(lines)
