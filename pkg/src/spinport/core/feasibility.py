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

"""Experimental design calculator for dispersive spin-light coupling in a vapor cell.

Unity coupling requires n = 2 F N photons per pulse and |a| = 2 / n. The off-resonant
optical depth alpha_Delta = sigma N gamma / (A |Delta|) must stay small, the optimal
beam area is A = sigma n |alpha_v| alpha_Delta / (2 F), taking alpha_Delta =
gamma / |Delta|, and weak focusing needs A >> sigma ~ lambda^2. Inequalities of the
form "<< 1" are checked at 0.1 and ">>" at a factor of 10; failed checks are warnings.
"""

import json
import logging
import math
import tomllib
from enum import StrEnum
from pathlib import Path

from pydantic import ValidationError

from spinport.core.spin_light import (
    VALIDITY_THRESHOLD,
    coupling_constant,
    coupling_kappa,
    spin_equal_ratio,
)
from spinport.models import (
    CheckStatus,
    FeasibilityCheck,
    FeasibilityReport,
    PhysicalParams,
)

log = logging.getLogger(__name__)

SMALL = 0.1
LARGE = 10.0
RELATIVE_MATCH = 0.1
SATURATION_PULSE = 100e-9


class FeasibilityError(ValueError):
    """Raised when parameters are missing or unusable."""

    def __init__(self, message: str, missing: list[str] | None = None):
        super().__init__(message)
        self.missing = missing or []


class Transition(StrEnum):
    """Alkali D line of the probe light."""

    D1 = "D1"
    D2 = "D2"


class Branch(StrEnum):
    """Hyperfine level of the ground state being probed."""

    UPPER = "F=I+1/2"
    LOWER = "F=I-1/2"


_POLARIZABILITY = {
    (Transition.D1, Branch.UPPER): 1.0,
    (Transition.D1, Branch.LOWER): -1.0,
    (Transition.D2, Branch.UPPER): -0.5,
    (Transition.D2, Branch.LOWER): 0.5,
}


def vector_polarizability(transition: Transition | str, branch: Branch | str) -> float:
    """Dynamic vector polarizability: +-1 on D1 and -+1/2 on D2 (upper/lower)."""
    return _POLARIZABILITY[(Transition(transition), Branch(branch))]


def branch_of(F: float, I: float) -> Branch:  # noqa: N803
    """The hyperfine branch of F for nuclear spin I."""
    if F == I + 0.5:
        return Branch.UPPER
    if F == I - 0.5:
        return Branch.LOWER
    raise FeasibilityError(f"F={F} is not a ground hyperfine level of I={I}.")


def cross_section(p: PhysicalParams) -> float:
    """Resonant cross section: given sigma, or s * lambda^2."""
    if p.sigma is not None:
        return p.sigma
    if p.wavelength is not None:
        return p.sigma_factor * p.wavelength**2
    raise FeasibilityError("Need sigma or wavelength.", missing=["sigma"])


def polarizability(p: PhysicalParams) -> float:
    """alpha_v: given, or looked up from the transition and hyperfine branch."""
    if p.alpha_v is not None:
        return p.alpha_v
    if p.transition is not None and p.I is not None:
        return vector_polarizability(p.transition, branch_of(p.F, p.I))
    raise FeasibilityError("Need alpha_v, or transition and I.", missing=["alpha_v"])


def cell_volume(p: PhysicalParams) -> float | None:
    """Cell volume in cm^3 if all dimensions are given."""
    if None in (p.cell_x, p.cell_y, p.cell_z):
        return None
    return p.cell_x * p.cell_y * p.cell_z  # type: ignore[operator]


def atom_number(p: PhysicalParams) -> float:
    """N: given, or density times cell volume."""
    if p.N is not None:
        return p.N
    volume = cell_volume(p)
    if volume is not None and p.density is not None:
        return p.density * volume
    raise FeasibilityError("Need N, or density and cell dimensions.", missing=["N"])


def coupling_a(p: PhysicalParams) -> float:
    """Coupling constant a = (sigma / (A F)) (gamma / Delta) alpha_v."""
    if p.delta == 0:
        raise FeasibilityError("Detuning must be nonzero.")
    return coupling_constant(
        cross_section(p), p.A, p.F, p.gamma, p.delta, polarizability(p)
    )


def _at_most(
    name: str, value: float, threshold: float, anchor: str
) -> FeasibilityCheck:
    status = CheckStatus.PASS if value <= threshold else CheckStatus.WARN
    return FeasibilityCheck(
        name=name, status=status, value=value, threshold=threshold, anchor=anchor
    )


def _at_least(
    name: str, value: float, threshold: float, anchor: str
) -> FeasibilityCheck:
    status = CheckStatus.PASS if value >= threshold else CheckStatus.WARN
    return FeasibilityCheck(
        name=name, status=status, value=value, threshold=threshold, anchor=anchor
    )


def _near_one(name: str, value: float, anchor: str) -> FeasibilityCheck:
    ok = abs(value - 1.0) <= RELATIVE_MATCH
    return FeasibilityCheck(
        name=name,
        status=CheckStatus.PASS if ok else CheckStatus.WARN,
        value=value,
        threshold=RELATIVE_MATCH,
        anchor=anchor,
    )


def _within_factor(name: str, value: float, anchor: str) -> FeasibilityCheck:
    ok = 1 / LARGE <= value <= LARGE
    return FeasibilityCheck(
        name=name,
        status=CheckStatus.PASS if ok else CheckStatus.WARN,
        value=value,
        threshold=LARGE,
        anchor=anchor,
    )


def design_report(p: PhysicalParams) -> FeasibilityReport:
    """Derived design quantities and pass/warn checks for a parameter set."""
    sigma = cross_section(p)
    alpha_v = polarizability(p)
    atoms = atom_number(p)
    n_required = round(2 * p.F * atoms)
    n = p.n if p.n is not None else float(n_required)
    a = coupling_a(p)
    kappa = coupling_kappa(a, n, atoms, p.F)
    gamma_over_delta = p.gamma / abs(p.delta)
    alpha_delta = sigma * atoms * gamma_over_delta / p.A
    area_optimal = sigma * n * abs(alpha_v) * gamma_over_delta / (2 * p.F)

    checks = [
        _at_most(
            "gamma_over_delta",
            gamma_over_delta,
            SMALL,
            "alpha_Delta = gamma / |Delta| << 1",
        ),
        _at_most(
            "optical_depth",
            alpha_delta,
            SMALL,
            "alpha_Delta = sigma N gamma / (A |Delta|) << 1",
        ),
        _near_one(
            "optical_depth_ratio",
            alpha_delta / gamma_over_delta,
            "sigma N gamma / (A |Delta|) = gamma / |Delta|",
        ),
        _near_one("unity_coupling", abs(a) * n / 2, "|a| n / 2 = 1"),
        _near_one("spin_equal", spin_equal_ratio(n, atoms, p.F), "n = 2 F N"),
        _at_least("weak_focusing", p.A / sigma, LARGE, "A >> sigma ~ lambda^2"),
        _at_least("many_photons", n, VALIDITY_THRESHOLD, "n >> 1"),
        _at_least("many_atoms", atoms * p.F, VALIDITY_THRESHOLD, "N F >> 1"),
        _within_factor(
            "beam_area", p.A / area_optimal, "A = sigma n |alpha_v| alpha_Delta / (2F)"
        ),
    ]
    volume = cell_volume(p)
    if p.N is not None and volume is not None and p.density is not None:
        checks.append(
            _near_one("atom_number", p.density * volume / p.N, "N = n_A V")
        )
    if p.alpha_v is not None and p.transition is not None and p.I is not None:
        table = vector_polarizability(p.transition, branch_of(p.F, p.I))
        checks.append(
            _near_one(
                "alpha_v_table", p.alpha_v / table, "alpha_v = +-1 (D1), -+1/2 (D2)"
            )
        )
    if p.pulse_duration is not None:
        checks.append(
            _at_least(
                "pulse_saturation", p.pulse_duration, SATURATION_PULSE, "tau > 100 ns"
            )
        )
        checks.append(
            _at_least(
                "pulse_opo", p.pulse_duration, 1 / p.opo_bandwidth, "tau > 1/Gamma_OPO"
            )
        )

    report = FeasibilityReport(
        sigma=sigma,
        N=atoms,
        alpha_v=alpha_v,
        a=a,
        kappa=kappa,
        n_required=n_required,
        A_optimal=area_optimal,
        beam_width_optimal=math.sqrt(area_optimal),
        alpha_delta=alpha_delta,
        gamma_over_delta=gamma_over_delta,
        checks=checks,
    )
    for check in report.warnings:
        log.warning(
            "Feasibility check not met.",
            extra={"check": check.name, "value": check.value, "anchor": check.anchor},
        )
    return report


def load_params(path: Path) -> PhysicalParams:
    """Read a flat TOML or JSON parameter file."""
    try:
        raw = path.read_bytes()
    except OSError as error:
        raise FeasibilityError(f"Cannot read {path}: {error}") from error
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as error:
        raise FeasibilityError(f"Cannot parse {path}: {error}") from error
    if not isinstance(data, dict):
        raise FeasibilityError(f"{path} must hold a flat key-value table.")
    try:
        return PhysicalParams.model_validate(data)
    except ValidationError as error:
        missing = [
            ".".join(str(part) for part in item["loc"])
            for item in error.errors()
            if item["type"] == "missing"
        ]
        if missing:
            message = f"Missing required parameter(s): {', '.join(missing)}."
        else:
            message = f"Invalid parameters in {path}: {error}"
        raise FeasibilityError(message, missing=missing) from error
