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

"""Mapping of collective atomic spins and bright Stokes fields onto canonical modes.

A strongly polarized ensemble is linearized around its mean polarization: the two
transverse spin components become a canonical (x, p) pair scaled by sqrt(N F). A bright
beam polarized along x is linearized the same way with Stokes components S_z, S_y.
"""

import logging
import math
from enum import StrEnum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

log = logging.getLogger(__name__)

VALIDITY_THRESHOLD = 100.0

_CYCLIC = {"x": ("y", "z"), "y": ("z", "x"), "z": ("x", "y")}


class SpinLightError(ValueError):
    """Raised for invalid spin/light descriptions or unsupported frame rotations."""


class StokesNorm(StrEnum):
    """Normalization of Stokes components onto quadratures.

    `canonical` uses sqrt(n/2) and yields vacuum variance 1/2; `sqrt_n` uses sqrt(n)
    and yields quadratures with vacuum variance 1/4, related by x = sqrt(2) X.
    """

    CANONICAL = "canonical"
    SQRT_N = "sqrt_n"


class SpinEnsemble(BaseModel):
    """A collective spin of N atoms with spin F, polarized along an axis."""

    model_config = ConfigDict(frozen=True)

    F: float = Field(..., description="Total spin per atom, a positive half-integer.")
    N: float = Field(..., ge=1, description="Number of atoms.")
    polarization_axis: Literal["+x", "-x", "+y", "-y", "+z", "-z"] = Field(
        default="+x", description="Axis and sign of the macroscopic polarization."
    )
    mode_label: str = Field(default="atoms", description="Label of the mapped mode.")

    @field_validator("F")
    @classmethod
    def _half_integer(cls, value: float) -> float:
        if value <= 0 or not float(2 * value).is_integer():
            raise ValueError(f"F must be a positive half-integer, got {value}.")
        return value

    @property
    def polarization(self) -> float:
        """Mean polarization N F along the polarization axis."""
        return self.N * self.F


class StokesField(BaseModel):
    """A bright pulse with n photons in its strong x-polarized component."""

    model_config = ConfigDict(frozen=True)

    n_photons: float = Field(..., ge=1, description="Photon number of the pulse.")
    polarization_axis: Literal["x"] = Field(
        default="x", description="Polarization of the strong component."
    )
    mode_label: str = Field(default="light", description="Label of the mapped mode.")


class ModeMapping(BaseModel):
    """How a physical system sits on a canonical mode: x = X_phys / scale etc."""

    model_config = ConfigDict(frozen=True)

    mode_label: str
    scale: float = Field(..., description="Physical units per canonical unit.")
    x_component: str = Field(..., description="Physical component read as x.")
    p_component: str = Field(..., description="Physical component read as p.")
    vacuum_variance: float = Field(
        default=0.5, description="Variance of a coherent state in these units."
    )
    valid: bool = Field(
        default=True, description="Whether the linearization threshold is met."
    )

    def to_physical(self, x: float, p: float) -> tuple[float, float]:
        """Physical component values of canonical quadrature values."""
        sx = -1.0 if self.x_component.startswith("-") else 1.0
        sp = -1.0 if self.p_component.startswith("-") else 1.0
        return sx * self.scale * x, sp * self.scale * p

    def from_physical(self, fx: float, fp: float) -> tuple[float, float]:
        """Canonical quadrature values of physical component values."""
        sx = -1.0 if self.x_component.startswith("-") else 1.0
        sp = -1.0 if self.p_component.startswith("-") else 1.0
        return sx * fx / self.scale, sp * fp / self.scale


class FrameRotation(BaseModel):
    """Canonical effect of rotating an ensemble about its polarization axis."""

    model_config = ConfigDict(frozen=True)

    theta: float = Field(..., description="Phase-shift angle on the mapped mode.")
    x_component: str
    p_component: str


def spin_to_mode(ens: SpinEnsemble) -> ModeMapping:
    """Linearize a polarized ensemble onto a canonical mode.

    For +x polarization x = F_z / sqrt(N F) and p = F_y / sqrt(N F); other axes follow
    by cyclic permutation, and negative polarization flips the sign of p.
    """
    sign, axis = ens.polarization_axis[0], ens.polarization_axis[1]
    first, second = _CYCLIC[axis]
    valid = ens.polarization >= VALIDITY_THRESHOLD
    if not valid:
        log.warning(
            "Spin ensemble below linearization threshold.",
            extra={"mode": ens.mode_label, "NF": ens.polarization},
        )
    return ModeMapping(
        mode_label=ens.mode_label,
        scale=math.sqrt(ens.polarization),
        x_component=f"+F_{second}",
        p_component=f"{'+' if sign == '+' else '-'}F_{first}",
        valid=valid,
    )


def stokes_to_mode(
    fld: StokesField, norm: StokesNorm = StokesNorm.CANONICAL
) -> ModeMapping:
    """Linearize a bright x-polarized pulse: x = S_z / scale, p = S_y / scale."""
    valid = fld.n_photons >= VALIDITY_THRESHOLD
    if not valid:
        log.warning(
            "Stokes field below linearization threshold.",
            extra={"mode": fld.mode_label, "n": fld.n_photons},
        )
    if norm == StokesNorm.SQRT_N:
        scale, vacuum_variance = math.sqrt(fld.n_photons), 0.25
    else:
        scale, vacuum_variance = math.sqrt(fld.n_photons / 2), 0.5
    return ModeMapping(
        mode_label=fld.mode_label,
        scale=scale,
        x_component="+S_z",
        p_component="+S_y",
        vacuum_variance=vacuum_variance,
        valid=valid,
    )


def sqrt_n_to_canonical(value: float) -> float:
    """Convert a quadrature with vacuum variance 1/4 to canonical units."""
    return math.sqrt(2) * value


def coupling_constant(  # noqa: PLR0913
    sigma: float,
    area: float,
    F: float,  # noqa: N803
    gamma: float,
    delta: float,
    alpha_v: float,
) -> float:
    """Coupling constant a = (sigma / (A F)) (gamma / Delta) alpha_v."""
    if area == 0 or F == 0 or delta == 0:
        raise SpinLightError("Coupling constant needs nonzero A, F and Delta.")
    return (sigma / (area * F)) * (gamma / delta) * alpha_v


def coupling_kappa(a: float, n: float, N: float, F: float) -> float:  # noqa: N803
    """QND gain kappa = |a| sqrt(F N n / 2); kappa = 1 is the unity-gain condition."""
    if n <= 0 or N <= 0 or F <= 0:
        raise SpinLightError(
            f"Photon number, atom number and spin must be positive: {n=}, {N=}, {F=}."
        )
    if not math.isfinite(a):
        raise SpinLightError(f"Coupling constant must be finite, got {a}.")
    return abs(a) * math.sqrt(F * N * n / 2)


def spin_equal_ratio(n: float, N: float, F: float) -> float:  # noqa: N803
    """The ratio n / (2 F N); one when a light mode matches the spin scale."""
    if N <= 0 or F <= 0:
        raise SpinLightError("Atom number and spin must be positive.")
    return n / (2 * F * N)


class CouplingSpec(BaseModel):
    """Physical parameters backing a QND gain; kappa is always derived from them."""

    model_config = ConfigDict(frozen=True)

    sigma: float = Field(..., gt=0, description="Resonant cross section, cm^2.")
    area: float = Field(..., gt=0, description="Beam area A, cm^2.")
    gamma: float = Field(..., gt=0, description="Natural linewidth.")
    delta: float = Field(..., description="Detuning, same units as gamma.")
    alpha_v: float = Field(..., description="Vector polarizability factor.")
    F: float = Field(..., gt=0)
    N: float = Field(..., gt=0)
    n: float = Field(..., gt=0, description="Photon number of the coupled pulse.")

    @property
    def a(self) -> float:
        """Coupling constant a."""
        return coupling_constant(
            self.sigma, self.area, self.F, self.gamma, self.delta, self.alpha_v
        )

    @property
    def kappa(self) -> float:
        """QND gain derived from the backing parameters."""
        return coupling_kappa(self.a, self.n, self.N, self.F)


def _term(sign: str, func: str, comp: str, angle: float) -> str:
    flip = (sign == "-") != comp.startswith("-")
    return f"{'-' if flip else '+'}{func}({angle:.6g})*{comp[1:]}"


def _rotated_components(x_comp: str, p_comp: str, angle: float) -> tuple[str, str]:
    quarter_turns = angle / (math.pi / 2)
    if not math.isclose(quarter_turns, round(quarter_turns), abs_tol=1e-12):
        x_new = _term("+", "cos", x_comp, angle) + _term("+", "sin", p_comp, angle)
        p_new = _term("-", "sin", x_comp, angle) + _term("+", "cos", p_comp, angle)
        return x_new, p_new

    def neg(comp: str) -> str:
        return ("-" if comp.startswith("+") else "+") + comp[1:]

    x_new, p_new = x_comp, p_comp
    for _ in range(round(quarter_turns) % 4):
        x_new, p_new = p_new, neg(x_new)
    return x_new, p_new


def frame_rotation(
    ens: SpinEnsemble | StokesField, axis: str, angle: float
) -> FrameRotation:
    """Rotate an ensemble (or pulse) about its polarization axis by `angle`.

    Only rotations about the polarization axis keep the linearization valid; they act
    on the mapped mode as phase_shift(theta).
    """
    pol_axis = ens.polarization_axis[-1]
    if axis != pol_axis:
        raise SpinLightError(
            f"Rotation about '{axis}' would tilt the polarization along '{pol_axis}'."
        )
    mapping = (
        spin_to_mode(ens) if isinstance(ens, SpinEnsemble) else stokes_to_mode(ens)
    )
    negative = ens.polarization_axis.startswith("-")
    theta = -angle if negative else angle
    x_comp, p_comp = _rotated_components(
        mapping.x_component, mapping.p_component, theta
    )
    return FrameRotation(theta=theta, x_component=x_comp, p_component=p_comp)
