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

"""Compiled protocol step lists shared by the engines, the oracle and the DSL."""

import math
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from typing import Literal

from spinport.core.gaussian import (
    GaussianState,
    P,
    X,
    coherent,
    tensor,
    vacuum,
)
from spinport.core.spin_light import (
    ModeMapping,
    SpinEnsemble,
    StokesField,
    StokesNorm,
    frame_rotation,
    spin_to_mode,
    stokes_to_mode,
)
from spinport.models import MAX_COUPLING, MAX_GAIN, MAX_SQUEEZING, ProtocolConfig

ModeKind = Literal["vacuum", "spin", "light", "coherent"]

SCRIPT_VARIABLES = ("r", "kappa", "readout_ratio", "kappa_probe", "inv_sqrt_ratio")


class ProtocolConfigError(ValueError):
    """Raised when a protocol cannot be built or run with the given configuration."""


class ParameterRangeError(ProtocolConfigError):
    """Raised for step parameters outside the numerically supported range."""

    code = "OUT_OF_RANGE"


def check_range(what: str, value: float, limit: float):
    """Require a finite value with magnitude at most `limit`."""
    if not math.isfinite(value) or abs(value) > limit:
        raise ParameterRangeError(
            f"{what} {value!r} is outside [-{limit:g}, {limit:g}]."
        )


def script_variables(cfg: ProtocolConfig) -> dict[str, float]:
    """Values of the script variables for a configuration, gain overrides applied."""
    unknown = sorted(set(cfg.gains) - set(SCRIPT_VARIABLES))
    if unknown:
        raise ProtocolConfigError(
            f"Unknown gain override(s) {unknown}; known: {list(SCRIPT_VARIABLES)}."
        )
    root = math.sqrt(cfg.readout_ratio)
    values = {
        "r": cfg.r,
        "kappa": cfg.kappa,
        "readout_ratio": cfg.readout_ratio,
        "kappa_probe": cfg.kappa * root,
        "inv_sqrt_ratio": 1.0 / root,
    }
    values.update(cfg.gains)
    return values


@dataclass(frozen=True)
class ModeDecl:
    """A declared mode and the physical system behind it."""

    label: str
    kind: ModeKind
    F: float | None = None
    N: float | None = None
    n: float | None = None
    x: float = 0.0
    p: float = 0.0
    mapping: ModeMapping | None = None

    def system(self) -> SpinEnsemble | StokesField | None:
        """The spin ensemble or Stokes field of a spin/light mode."""
        if self.kind == "spin":
            return SpinEnsemble(F=self.F, N=self.N, mode_label=self.label)
        if self.kind == "light":
            return StokesField(n_photons=self.n, mode_label=self.label)
        return None

    def initial_state(self) -> GaussianState:
        """Coherent state for coherent modes, vacuum otherwise."""
        if self.kind == "coherent":
            return coherent(self.x, self.p, self.label)
        return vacuum(1, (self.label,))


@dataclass(frozen=True)
class Squeeze:
    """Two-mode squeezing with parameter r."""

    step_id: str
    first: str
    second: str
    r: float


@dataclass(frozen=True)
class Qnd:
    """QND interaction of strength kappa."""

    step_id: str
    first: str
    second: str
    kappa: float


@dataclass(frozen=True)
class Phase:
    """Phase shift of one mode."""

    step_id: str
    mode: str
    theta: float


@dataclass(frozen=True)
class Rotate:
    """Frame rotation of a spin or light system; acts as a phase shift by theta."""

    step_id: str
    mode: str
    axis: str
    angle: float
    theta: float


@dataclass(frozen=True)
class Measure:
    """Homodyne measurement of the quadrature at `angle`."""

    step_id: str
    mode: str
    angle: float
    outcome_id: str


@dataclass(frozen=True)
class Displace:
    """Shift one quadrature by sum(gain * outcome) + const."""

    step_id: str
    mode: str
    quadrature: int
    terms: tuple[tuple[str, float], ...] = ()
    const: float = 0.0


Step = Squeeze | Qnd | Phase | Rotate | Measure | Displace


@dataclass(frozen=True)
class CompiledProtocol:
    """An executable protocol: declared modes, ordered steps and logical systems."""

    name: str
    modes: tuple[ModeDecl, ...]
    steps: tuple[Step, ...]
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    description: str = field(default="", compare=False)
    stokes_norm: StokesNorm = field(default=StokesNorm.CANONICAL)

    @property
    def labels(self) -> tuple[str, ...]:
        """Mode labels in declaration order."""
        return tuple(decl.label for decl in self.modes)

    def decl(self, label: str) -> ModeDecl:
        """The declaration of a mode."""
        for decl in self.modes:
            if decl.label == label:
                return decl
        raise ProtocolConfigError(f"Protocol '{self.name}' has no mode '{label}'.")

    def measured_modes(self) -> set[str]:
        """Labels of all modes that are measured somewhere in the protocol."""
        return {step.mode for step in self.steps if isinstance(step, Measure)}

    def initial_state(
        self, inputs: Mapping[str, GaussianState] | None = None
    ) -> GaussianState:
        """Product of the declared initial states, with single-mode overrides."""
        inputs = inputs or {}
        unknown = set(inputs) - set(self.labels)
        if unknown:
            raise ProtocolConfigError(f"Inputs for undeclared modes {sorted(unknown)}.")
        parts = []
        for decl in self.modes:
            state = inputs.get(decl.label)
            if state is None:
                parts.append(decl.initial_state())
                continue
            if state.num_modes != 1:
                raise ProtocolConfigError(
                    f"Input for mode '{decl.label}' must be a single mode."
                )
            parts.append(GaussianState(state.mean, state.cov, (decl.label,)))
        return tensor(parts)


class ProtocolBuilder:
    """Accumulates declarations and steps into a CompiledProtocol.

    Step ids are assigned in order as `<index>-<kind>`, so two builders fed the same
    sequence of calls produce equal protocols. Squeezing accumulates per mode: a
    squeezer adds |r| to the larger level of its two modes, and QND gates, outcomes
    and feedforward carry levels along. No mode may exceed MAX_SQUEEZING.
    """

    def __init__(
        self,
        name: str,
        description: str = "",
        stokes_norm: StokesNorm = StokesNorm.CANONICAL,
    ):
        self._name = name
        self._description = description
        self._stokes_norm = stokes_norm
        self._modes: dict[str, ModeDecl] = {}
        self._steps: list[Step] = []
        self._inputs: list[str] = []
        self._outputs: list[str] = []
        self._levels: dict[str, float] = {}
        self._outcome_levels: dict[str, float] = {}

    def _next_id(self, kind: str) -> str:
        return f"{len(self._steps) + 1}-{kind}"

    def _require(self, *labels: str):
        for label in labels:
            if label not in self._modes:
                raise ProtocolConfigError(f"Mode '{label}' is not declared.")

    def mode(self, label: str, kind: ModeKind, **params: float) -> "ProtocolBuilder":
        """Declare a mode; spin and light modes get their canonical mapping."""
        if label in self._modes:
            raise ProtocolConfigError(f"Mode '{label}' declared twice.")
        decl = ModeDecl(label=label, kind=kind, **params)
        system = decl.system()
        if isinstance(system, SpinEnsemble):
            decl = replace(decl, mapping=spin_to_mode(system))
        elif isinstance(system, StokesField):
            decl = replace(decl, mapping=stokes_to_mode(system, self._stokes_norm))
        self._modes[label] = decl
        self._levels[label] = 0.0
        return self

    def input(self, label: str) -> "ProtocolBuilder":
        """Mark a mode as a logical input."""
        self._require(label)
        self._inputs.append(label)
        return self

    def output(self, label: str) -> "ProtocolBuilder":
        """Mark a mode as a logical output."""
        self._require(label)
        self._outputs.append(label)
        return self

    def squeeze(self, first: str, second: str, r: float) -> "ProtocolBuilder":
        """Append a two-mode squeezer."""
        self._require(first, second)
        check_range("Squeezing r", r, MAX_SQUEEZING)
        level = max(self._levels[first], self._levels[second]) + abs(r)
        if level > MAX_SQUEEZING:
            raise ParameterRangeError(
                f"Accumulated squeezing {level:g} of modes '{first}' and '{second}'"
                + f" exceeds {MAX_SQUEEZING:g}."
            )
        self._levels[first] = self._levels[second] = level
        self._steps.append(Squeeze(self._next_id("squeeze"), first, second, r))
        return self

    def qnd(self, first: str, second: str, kappa: float) -> "ProtocolBuilder":
        """Append a QND gate."""
        self._require(first, second)
        check_range("QND gain", kappa, MAX_COUPLING)
        level = max(self._levels[first], self._levels[second])
        self._levels[first] = self._levels[second] = level
        self._steps.append(Qnd(self._next_id("qnd"), first, second, kappa))
        return self

    def phase(self, mode: str, theta: float) -> "ProtocolBuilder":
        """Append a phase shift."""
        self._require(mode)
        self._steps.append(Phase(self._next_id("phase"), mode, theta))
        return self

    def rotate(self, mode: str, axis: str, angle: float) -> "ProtocolBuilder":
        """Rotate a spin or light system about its polarization axis."""
        self._require(mode)
        system = self._modes[mode].system()
        if system is None:
            raise ProtocolConfigError(
                f"Mode '{mode}' is not a spin or light system and cannot be rotated."
            )
        rotation = frame_rotation(system, axis, angle)
        self._steps.append(
            Rotate(self._next_id("rotate"), mode, axis, angle, rotation.theta)
        )
        return self

    def measure(
        self,
        mode: str,
        outcome_id: str,
        *,
        quadrature: str | None = None,
        angle: float | None = None,
    ) -> "ProtocolBuilder":
        """Homodyne-measure a quadrature ("x", "p") or an angle of a mode."""
        self._require(mode)
        if quadrature is not None and angle is None:
            resolved = 0.0 if quadrature == "x" else math.pi / 2
        elif angle is not None and quadrature is None:
            resolved = angle
        else:
            raise ProtocolConfigError("Give exactly one of quadrature or angle.")
        self._outcome_levels[outcome_id] = self._levels[mode]
        self._steps.append(
            Measure(self._next_id("measure"), mode, resolved, outcome_id)
        )
        return self

    def displace(
        self,
        mode: str,
        quadrature: str,
        terms: tuple[tuple[str, float], ...] = (),
        const: float = 0.0,
    ) -> "ProtocolBuilder":
        """Feed measurement outcomes forward into one quadrature of a mode."""
        self._require(mode)
        for outcome_id, gain in terms:
            check_range(f"Gain on '{outcome_id}'", gain, MAX_GAIN)
            self._levels[mode] = max(
                self._levels[mode], self._outcome_levels.get(outcome_id, 0.0)
            )
        check_range("Displacement", const, MAX_GAIN)
        index = X if quadrature == "x" else P
        self._steps.append(
            Displace(self._next_id("displace"), mode, index, tuple(terms), const)
        )
        return self

    def build(self) -> CompiledProtocol:
        """Freeze the accumulated protocol."""
        return CompiledProtocol(
            name=self._name,
            modes=tuple(self._modes.values()),
            steps=tuple(self._steps),
            inputs=tuple(self._inputs),
            outputs=tuple(self._outputs),
            description=self._description,
            stokes_norm=self._stokes_norm,
        )
