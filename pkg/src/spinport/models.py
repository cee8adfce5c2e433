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

"""Validated data models shared by the core and the command-line interface."""

import math
from enum import StrEnum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

REPORT_SCHEMA = "spinport-report/1"
FEASIBILITY_SCHEMA = "spinport-feasibility/1"

# numeric range of protocol parameters
MAX_SQUEEZING = 20.0
MAX_KAPPA = 100.0
MIN_READOUT_RATIO = 1e-12
MAX_READOUT_RATIO = 1e12
MAX_COUPLING = 1e8
MAX_GAIN = 1e8


class Engine(StrEnum):
    """How protocol moments are obtained."""

    ANALYTIC = "analytic"
    MONTE_CARLO = "monte_carlo"


class AtomReadout(StrEnum):
    """How Alice reads the second atomic quadrature in atom-to-light teleportation."""

    QND = "qnd"
    DESTRUCTIVE = "destructive"


class ProtocolConfig(BaseModel):
    """Parameters of a protocol run."""

    model_config = ConfigDict(frozen=True)

    r: float = Field(
        default=0.0,
        ge=0,
        le=MAX_SQUEEZING,
        description="Parametric gain of the source.",
    )
    kappa: float = Field(
        default=1.0,
        ge=-MAX_KAPPA,
        le=MAX_KAPPA,
        description="QND gain of the EPR passes.",
    )
    readout_ratio: float = Field(
        default=1e6,
        ge=MIN_READOUT_RATIO,
        le=MAX_READOUT_RATIO,
        description="Photon-number ratio of coherent readout probes to EPR pulses.",
    )
    gains: dict[str, float] = Field(
        default_factory=dict,
        description="Overrides of script variables such as feedforward gains.",
    )
    engine: Engine = Field(default=Engine.ANALYTIC)
    shots: int = Field(default=10_000, ge=1, description="Monte Carlo trajectories.")
    seed: int | None = Field(
        default=None, ge=0, lt=2**64, description="Seed of the Monte Carlo streams."
    )
    atom_readout: AtomReadout = Field(default=AtomReadout.QND)

    @field_validator("gains")
    @classmethod
    def _finite_gains(cls, value: dict[str, float]) -> dict[str, float]:
        bad = sorted(name for name, gain in value.items() if not math.isfinite(gain))
        if bad:
            raise ValueError(f"Gains must be finite: {bad}.")
        return value


class MeasurementRecord(BaseModel):
    """A homodyne detector reading."""

    step_id: str
    mode_label: str
    quadrature_angle: float = Field(..., description="Measured quadrature angle, rad.")
    outcome: float

    @field_validator("outcome")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("Outcome must be finite.")
        return value


class SystemMoments(BaseModel):
    """First and second moments of one logical system (a single mode)."""

    label: str
    mean: list[float]
    cov: list[list[float]] | None = None
    mean_stderr: list[float] | None = None
    cov_stderr: list[list[float]] | None = None


class AddedNoise(BaseModel):
    """Variance excess of an output over the unity-gain image of the input."""

    label: str
    x: float
    p: float
    stderr_x: float | None = None
    stderr_p: float | None = None


class ProtocolReport(BaseModel):
    """Outcome of running a protocol with one engine."""

    model_config = ConfigDict(populate_by_name=True)

    schema_version: str = Field(default=REPORT_SCHEMA, alias="schema")
    protocol: str
    engine: Engine
    shots: int | None = None
    seed: int | None = None
    config: ProtocolConfig
    input_moments: list[SystemMoments]
    output_moments: list[SystemMoments]
    gain_matrix: list[list[float]]
    expected_gain_matrix: list[list[float]] | None = None
    added_noise: list[AddedNoise]
    fidelity_coherent: float | None = None
    measurement_records: list[MeasurementRecord]
    conventions: list[str] = Field(default_factory=list)

    def to_json(self) -> str:
        """Serialize with the schema field name."""
        return self.model_dump_json(by_alias=True, indent=2)


class PhysicalParams(BaseModel):
    """Experimental parameters of an atomic ensemble probed off resonance.

    Lengths are in cm and frequencies in Hz. Only ratios of gamma and delta enter, so
    ordinary and angular frequency units give the same results if used consistently.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    gamma: float = Field(..., gt=0, description="Natural linewidth.")
    delta: float = Field(..., description="Probe detuning.")
    F: float = Field(..., gt=0, description="Hyperfine spin of the probed level.")
    A: float = Field(..., gt=0, description="Beam cross-section area, cm^2.")
    sigma: float | None = Field(
        default=None, gt=0, description="Resonant absorption cross section, cm^2."
    )
    wavelength: float | None = Field(
        default=None, gt=0, description="Probe wavelength, cm; used for sigma."
    )
    sigma_factor: float = Field(
        default=1.0, gt=0, description="Factor s in sigma = s lambda^2."
    )
    alpha_v: float | None = Field(default=None, description="Vector polarizability.")
    transition: Literal["D1", "D2"] | None = None
    I: float | None = Field(default=None, gt=0, description="Nuclear spin.")
    N: float | None = Field(default=None, gt=0, description="Number of atoms.")
    n: float | None = Field(default=None, gt=0, description="Photons per pulse.")
    cell_x: float | None = Field(default=None, gt=0)
    cell_y: float | None = Field(default=None, gt=0)
    cell_z: float | None = Field(default=None, gt=0)
    density: float | None = Field(default=None, gt=0, description="Atoms per cm^3.")
    pulse_duration: float | None = Field(default=None, gt=0, description="Seconds.")
    opo_bandwidth: float = Field(
        default=1e8, gt=0, description="OPO bandwidth; its inverse bounds the pulse."
    )

    @field_validator("F", "I")
    @classmethod
    def _half_integer(cls, value: float | None) -> float | None:
        if value is not None and not float(2 * value).is_integer():
            raise ValueError(f"Spin must be a half-integer, got {value}.")
        return value


class CheckStatus(StrEnum):
    """Outcome of a feasibility check."""

    PASS = "pass"
    WARN = "warn"


class FeasibilityCheck(BaseModel):
    """A single inequality of the design, evaluated."""

    name: str
    status: CheckStatus
    value: float
    threshold: float
    anchor: str = Field(..., description="The relation the check evaluates.")


class FeasibilityReport(BaseModel):
    """Derived design quantities and checks for a parameter set."""

    model_config = ConfigDict(populate_by_name=True)

    schema_version: str = Field(default=FEASIBILITY_SCHEMA, alias="schema")
    sigma: float
    N: float
    alpha_v: float
    a: float
    kappa: float
    n_required: int
    A_optimal: float = Field(
        description="Optimal beam area sigma n |alpha_v| (gamma/delta) / 2F. With the"
        + " photon number at its required n = 2FN it is linear in N."
    )
    beam_width_optimal: float = Field(
        description="Square root of A_optimal, so it scales as sqrt(N)."
    )
    alpha_delta: float
    gamma_over_delta: float
    checks: list[FeasibilityCheck]

    @property
    def warnings(self) -> list[FeasibilityCheck]:
        """Checks that did not pass."""
        return [check for check in self.checks if check.status == CheckStatus.WARN]

    def to_json(self) -> str:
        """Serialize with the schema field name."""
        return self.model_dump_json(by_alias=True, indent=2)


class SweepRow(BaseModel):
    """One grid point of a parameter sweep."""

    r: float
    added_noise_x: float | None = None
    added_noise_p: float | None = None
    fidelity_coherent: float | None = None
    engine: Engine
    shots: int | None = None
    seed: int | None = None


class RunRequest(BaseModel):
    """What the `run` command was asked to do."""

    script: str | None = None
    builtin: str | None = None
    config: ProtocolConfig
    output: str | None = None
    input_means: dict[str, tuple[float, float]] = Field(default_factory=dict)
