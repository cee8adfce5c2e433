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

"""Analytic and Monte Carlo engines that run compiled protocols.

The analytic engine defers every measurement: an outcome-linear feedforward is the
symplectic shear "target += gain * measured quadrature" applied before the measured
modes are traced out, so the whole protocol composes into one affine symplectic map T of
the initial product state. The output covariance T S0 T^T is formed once at the end,
which keeps the e^{+-2r} terms of strongly squeezed sources from cancelling numerically.

The Monte Carlo engine samples measurement outcomes shot by shot in vectorized blocks.
Each block draws from its own counter-based stream derived from (seed, block index), so
results do not depend on how blocks are scheduled over threads. The block size is part
of the sample schedule: the same seed with another block size draws other samples.
"""

import functools
import logging
import math
from collections.abc import Callable, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from spinport.core.gaussian import (
    DEGENERATE_VARIANCE,
    VACUUM_VARIANCE,
    DegenerateMeasurementError,
    GaussianState,
    InvalidStateError,
    SymplecticTransform,
    condition_on_quadrature,
    gaussian_fidelity,
    qnd_map,
    quadrature_vector,
    rotation_map,
    shear_map,
    squeezer_map,
    vacuum,
)
from spinport.core.spin_light import StokesNorm
from spinport.core.steps import (
    CompiledProtocol,
    Displace,
    Measure,
    ParameterRangeError,
    Phase,
    ProtocolConfigError,
    Qnd,
    Rotate,
    Squeeze,
    Step,
)
from spinport.models import (
    AddedNoise,
    Engine,
    MeasurementRecord,
    ProtocolConfig,
    ProtocolReport,
    SystemMoments,
)

log = logging.getLogger(__name__)

DEFAULT_BLOCK_SIZE = 4096


def _within_range[**Params](
    run: Callable[Params, ProtocolReport],
) -> Callable[Params, ProtocolReport]:
    """Report numeric overflow of a run as a parameter range error."""

    @functools.wraps(run)
    def guarded(*args: Params.args, **kwargs: Params.kwargs) -> ProtocolReport:
        try:
            return run(*args, **kwargs)
        except (OverflowError, np.linalg.LinAlgError, InvalidStateError) as error:
            raise ParameterRangeError(
                f"The protocol leaves the numerically supported range: {error}"
            ) from error

    return guarded


def _check_variance(step: Measure, variance: float):
    if not math.isfinite(variance):
        raise ParameterRangeError(
            f"Step {step.step_id}: marginal variance of mode '{step.mode}' overflows."
        )
    if variance < DEGENERATE_VARIANCE:
        raise DegenerateMeasurementError(
            f"Step {step.step_id}: marginal variance {variance!r} of mode"
            + f" '{step.mode}' cannot be conditioned on."
        )


def gate_map(step: Step, index: Mapping[str, int], num_modes: int):
    """The symplectic map of a gate step on modes indexed by `index`."""
    match step:
        case Squeeze():
            first, second = index[step.first], index[step.second]
            return squeezer_map(num_modes, first, second, step.r)
        case Qnd():
            return qnd_map(num_modes, index[step.first], index[step.second], step.kappa)
        case Phase() | Rotate():
            return rotation_map(num_modes, index[step.mode], step.theta)
    raise ProtocolConfigError(f"Step {step.step_id} is not a gate.")


def _step_modes(step: Step) -> tuple[str, ...]:
    if isinstance(step, Squeeze | Qnd):
        return (step.first, step.second)
    return (step.mode,)


def _block(mode: int) -> list[int]:
    return [2 * mode, 2 * mode + 1]


@dataclass
class Composition:
    """A protocol composed into one map of its initial product state."""

    protocol: CompiledProtocol
    initial: GaussianState
    transform: SymplecticTransform
    measured: list[str] = field(default_factory=list)
    records: list[MeasurementRecord] = field(default_factory=list)

    def indices(self, labels: tuple[str, ...]) -> list[int]:
        """Phase-space indices of the given modes."""
        index = {label: k for k, label in enumerate(self.protocol.labels)}
        return [k for label in labels for k in _block(index[label])]

    def final_state(self) -> GaussianState:
        """Unconditional state of all modes, measured ones included."""
        return self.transform.apply(self.initial)


def _check_step(step: Step, measured: list[str], outcomes: Mapping[str, np.ndarray]):
    if isinstance(step, Squeeze | Qnd) and step.first == step.second:
        raise ProtocolConfigError(
            f"Step {step.step_id} couples mode '{step.first}' to itself."
        )
    for label in _step_modes(step):
        if label in measured:
            raise ProtocolConfigError(
                f"Step {step.step_id} uses mode '{label}' after it was measured."
            )
    if isinstance(step, Displace):
        for outcome_id, _ in step.terms:
            if outcome_id not in outcomes:
                raise ProtocolConfigError(
                    f"Step {step.step_id} references undefined outcome '{outcome_id}'."
                )
    if isinstance(step, Measure) and step.outcome_id in outcomes:
        raise ProtocolConfigError(f"Outcome '{step.outcome_id}' is defined twice.")


def compose(
    protocol: CompiledProtocol, inputs: Mapping[str, GaussianState] | None = None
) -> Composition:
    """Compose a protocol into one affine symplectic map, deferring measurements."""
    initial = protocol.initial_state(inputs)
    num_modes = initial.num_modes
    index = {label: k for k, label in enumerate(protocol.labels)}
    transform = SymplecticTransform.identity(num_modes)
    outcomes: dict[str, np.ndarray] = {}
    composition = Composition(protocol=protocol, initial=initial, transform=transform)

    for step in protocol.steps:
        _check_step(step, composition.measured, outcomes)
        if isinstance(step, Measure):
            functional = quadrature_vector(num_modes, index[step.mode], step.angle)
            row = functional @ transform.matrix
            _check_variance(step, float(row @ initial.cov @ row))
            outcome = float(row @ initial.mean + functional @ transform.displacement)
            outcomes[step.outcome_id] = functional
            composition.measured.append(step.mode)
            composition.records.append(
                MeasurementRecord(
                    step_id=step.step_id,
                    mode_label=step.mode,
                    quadrature_angle=step.angle,
                    outcome=outcome * unit_factor(protocol, step.mode),
                )
            )
            continue
        if isinstance(step, Displace):
            source = np.zeros(2 * num_modes)
            for outcome_id, gain in step.terms:
                source = source + gain * outcomes[outcome_id]
            stage = shear_map(
                num_modes, index[step.mode], step.quadrature, source, 1.0, step.const
            )
        else:
            stage = gate_map(step, index, num_modes)
        transform = transform.then(stage)

    composition.transform = transform
    return composition


def _logical_systems(
    protocol: CompiledProtocol,
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    measured = protocol.measured_modes()
    outputs = protocol.outputs or tuple(
        label for label in protocol.labels if label not in measured
    )
    bad = [label for label in outputs if label in measured]
    if bad:
        raise ProtocolConfigError(f"Outputs {bad} are measured during the protocol.")
    return protocol.inputs, outputs


def unit_factor(protocol: CompiledProtocol, label: str) -> float:
    """Reported quadrature per canonical quadrature of a mode.

    Light modes under the `sqrt_n` normalization are reported with vacuum variance
    1/4, that is X = x / sqrt(2); every other mode is reported canonically.
    """
    mapping = protocol.decl(label).mapping
    if mapping is None:
        return 1.0
    return math.sqrt(mapping.vacuum_variance / VACUUM_VARIANCE)


def unit_note(protocol: CompiledProtocol) -> str:
    """The unit convention of the reported moments."""
    if protocol.stokes_norm == StokesNorm.SQRT_N:
        return (
            "Light-mode moments and records are in sqrt(n) units with vacuum variance"
            + " 1/4 (x = sqrt(2) X); gains, added noise and fidelity stay canonical."
        )
    return "Moments are in canonical units with vacuum variance 1/2."


def _moments(  # noqa: PLR0913
    label: str,
    mean: np.ndarray,
    cov: np.ndarray | None,
    mean_stderr: np.ndarray | None = None,
    cov_stderr: np.ndarray | None = None,
    unit: float = 1.0,
) -> SystemMoments:
    return SystemMoments(
        label=label,
        mean=[float(unit * v) for v in mean],
        cov=None if cov is None else (unit**2 * cov).tolist(),
        mean_stderr=(
            None if mean_stderr is None else [float(unit * v) for v in mean_stderr]
        ),
        cov_stderr=None if cov_stderr is None else (unit**2 * cov_stderr).tolist(),
    )


def coherent_fidelity(gain: np.ndarray, noise: np.ndarray) -> float:
    """Fidelity of one output with its target when a vacuum is teleported.

    The output for vacuum inputs has covariance G G^T / 2 + noise; the target is the
    vacuum. Under unit gain this is the fidelity for every coherent input.
    """
    cov = 0.5 * gain @ gain.T + noise
    output = GaussianState(mean=np.zeros(2), cov=0.5 * (cov + cov.T))
    return gaussian_fidelity(vacuum(1), output)


@dataclass
class _Structure:
    """Gain and noise structure of a composed protocol."""

    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    in_idx: list[int]
    out_idx: list[int]
    gain: np.ndarray
    input_cov: np.ndarray


def _structure(composition: Composition) -> _Structure:
    inputs, outputs = _logical_systems(composition.protocol)
    in_idx = composition.indices(inputs)
    out_idx = composition.indices(outputs)
    matrix = composition.transform.matrix
    return _Structure(
        inputs=inputs,
        outputs=outputs,
        in_idx=in_idx,
        out_idx=out_idx,
        gain=matrix[np.ix_(out_idx, in_idx)],
        input_cov=composition.initial.cov[np.ix_(in_idx, in_idx)],
    )


def _min_fidelity(structure: _Structure, noise: np.ndarray) -> float | None:
    if not structure.inputs or not structure.outputs:
        return None
    values = []
    for k in range(len(structure.outputs)):
        rows = slice(2 * k, 2 * k + 2)
        values.append(coherent_fidelity(structure.gain[rows], noise[rows, rows]))
    return min(values)


def _noise_entries(
    outputs: tuple[str, ...], noise: np.ndarray, stderr: np.ndarray | None = None
) -> list[AddedNoise]:
    entries = []
    for k, label in enumerate(outputs):
        x, p = 2 * k, 2 * k + 1
        entries.append(
            AddedNoise(
                label=label,
                x=float(noise[x, x]),
                p=float(noise[p, p]),
                stderr_x=None if stderr is None else float(stderr[x, x]),
                stderr_p=None if stderr is None else float(stderr[p, p]),
            )
        )
    return entries


def _input_moments(composition: Composition, inputs: tuple[str, ...]):
    initial = composition.initial
    moments = []
    for label in inputs:
        mean, cov = initial.moments(initial.mode_index(label))
        unit = unit_factor(composition.protocol, label)
        moments.append(_moments(label, mean, cov, unit=unit))
    return moments


@_within_range
def analytic_report(
    protocol: CompiledProtocol,
    cfg: ProtocolConfig,
    inputs: Mapping[str, GaussianState] | None = None,
    *,
    expected_gain: np.ndarray | None = None,
    conventions: tuple[str, ...] = (),
) -> ProtocolReport:
    """Exact unconditional moments of a protocol."""
    composition = compose(protocol, inputs)
    structure = _structure(composition)
    final = composition.final_state()
    matrix = composition.transform.matrix
    rest = [k for k in range(matrix.shape[0]) if k not in set(structure.in_idx)]
    spread = matrix[np.ix_(structure.out_idx, rest)]
    noise = spread @ composition.initial.cov[np.ix_(rest, rest)] @ spread.T

    outputs = []
    for label in structure.outputs:
        mean, cov = final.moments(final.mode_index(label))
        outputs.append(_moments(label, mean, cov, unit=unit_factor(protocol, label)))

    log.debug(
        "Analytic run finished.",
        extra={"protocol": protocol.name, "r": cfg.r, "outputs": structure.outputs},
    )
    return ProtocolReport(
        protocol=protocol.name,
        engine=Engine.ANALYTIC,
        config=cfg,
        input_moments=_input_moments(composition, structure.inputs),
        output_moments=outputs,
        gain_matrix=structure.gain.tolist(),
        expected_gain_matrix=None if expected_gain is None else expected_gain.tolist(),
        added_noise=_noise_entries(structure.outputs, noise),
        fidelity_coherent=_min_fidelity(structure, noise),
        measurement_records=composition.records,
        conventions=[*conventions, unit_note(protocol)],
    )


@dataclass
class _Block:
    finals: np.ndarray
    cov: np.ndarray
    records: list[MeasurementRecord]


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Counter-based random stream of one block of shots.

    Streams are keyed per block, not per shot, so shot k draws from block
    k // block_size and reproducing a run needs the same seed and block size.
    """
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,)))
    )


def _run_block(  # noqa: PLR0913
    protocol: CompiledProtocol,
    initial: GaussianState,
    outputs: tuple[str, ...],
    seed: int,
    block: int,
    shots: int,
) -> _Block:
    rng = block_generator(seed, block)
    num_measurements = sum(isinstance(step, Measure) for step in protocol.steps)
    draws = rng.standard_normal((shots, num_measurements))
    means = np.tile(initial.mean, (shots, 1))
    cov = np.array(initial.cov)
    labels = list(initial.labels)
    outcomes: dict[str, np.ndarray] = {}
    records: list[MeasurementRecord] = []
    drawn = 0

    for step in protocol.steps:
        index = {label: k for k, label in enumerate(labels)}
        num_modes = len(labels)
        if isinstance(step, Measure):
            mode = index[step.mode]
            functional = quadrature_vector(num_modes, mode, step.angle)
            variance = float(functional @ cov @ functional)
            _check_variance(step, variance)
            values = means @ functional + math.sqrt(variance) * draws[:, drawn]
            drawn += 1
            keep = np.array(
                [k for m in range(num_modes) if m != mode for k in _block(m)], dtype=int
            )
            means, cov = condition_on_quadrature(means, cov, functional, keep, values)
            labels.remove(step.mode)
            outcomes[step.outcome_id] = values
            if block == 0:
                records.append(
                    MeasurementRecord(
                        step_id=step.step_id,
                        mode_label=step.mode,
                        quadrature_angle=step.angle,
                        outcome=float(values[0]) * unit_factor(protocol, step.mode),
                    )
                )
        elif isinstance(step, Displace):
            shift = np.full(shots, step.const)
            for outcome_id, gain in step.terms:
                shift = shift + gain * outcomes[outcome_id]
            means[:, 2 * index[step.mode] + step.quadrature] += shift
        else:
            stage = gate_map(step, index, num_modes)
            means = means @ stage.matrix.T + stage.displacement
            cov = stage.matrix @ cov @ stage.matrix.T

    index = {label: k for k, label in enumerate(labels)}
    out_idx = [k for label in outputs for k in _block(index[label])]
    log.debug("Monte Carlo block done.", extra={"block": block, "shots": shots})
    return _Block(
        finals=means[:, out_idx], cov=cov[np.ix_(out_idx, out_idx)], records=records
    )


@_within_range
def monte_carlo_report(
    protocol: CompiledProtocol,
    cfg: ProtocolConfig,
    inputs: Mapping[str, GaussianState] | None = None,
    *,
    expected_gain: np.ndarray | None = None,
    conventions: tuple[str, ...] = (),
    block_size: int = DEFAULT_BLOCK_SIZE,
    workers: int = 1,
) -> ProtocolReport:
    """Empirical unconditional moments from sampled trajectories.

    The unconditional covariance is the shared conditional covariance plus the sample
    covariance of the per-shot conditional means. The gain matrix is the structural one
    of the composed protocol. With a single shot no variances are estimated.
    """
    if cfg.seed is None:
        raise ProtocolConfigError("Monte Carlo runs need a seed.")
    if block_size < 1:
        raise ProtocolConfigError(f"Block size must be positive, got {block_size}.")
    composition = compose(protocol, inputs)
    structure = _structure(composition)
    sizes = [
        min(block_size, cfg.shots - start) for start in range(0, cfg.shots, block_size)
    ]
    seed = cfg.seed

    def run(block: int) -> _Block:
        return _run_block(
            protocol, composition.initial, structure.outputs, seed, block, sizes[block]
        )

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        blocks = list(pool.map(run, range(len(sizes))))

    finals = np.concatenate([block.finals for block in blocks], axis=0)
    conditional = blocks[0].cov
    shots = finals.shape[0]
    center = finals.mean(axis=0)

    if shots > 1:
        spread = np.atleast_2d(np.cov(finals, rowvar=False, ddof=1))
        cov = conditional + spread
        variances = np.diag(spread)
        mean_stderr = np.sqrt(variances / shots)
        cov_stderr = np.sqrt((np.outer(variances, variances) + spread**2) / (shots - 1))
        noise = cov - structure.gain @ structure.input_cov @ structure.gain.T
        added = _noise_entries(structure.outputs, noise, cov_stderr)
        fidelity = _min_fidelity(structure, noise)
    else:
        cov = mean_stderr = cov_stderr = None
        added, fidelity = [], None

    outputs = []
    for k, label in enumerate(structure.outputs):
        rows = slice(2 * k, 2 * k + 2)
        outputs.append(
            _moments(
                label,
                center[rows],
                None if cov is None else cov[rows, rows],
                None if mean_stderr is None else mean_stderr[rows],
                None if cov_stderr is None else cov_stderr[rows, rows],
                unit=unit_factor(protocol, label),
            )
        )

    log.info(
        "Monte Carlo run finished.",
        extra={"protocol": protocol.name, "shots": shots, "blocks": len(sizes)},
    )
    return ProtocolReport(
        protocol=protocol.name,
        engine=Engine.MONTE_CARLO,
        shots=shots,
        seed=seed,
        config=cfg,
        input_moments=_input_moments(composition, structure.inputs),
        output_moments=outputs,
        gain_matrix=structure.gain.tolist(),
        expected_gain_matrix=None if expected_gain is None else expected_gain.tolist(),
        added_noise=added,
        fidelity_coherent=fidelity,
        measurement_records=blocks[0].records,
        conventions=[*conventions, unit_note(protocol)],
    )
