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

"""Exact Gaussian states over bosonic modes and their phase-space operations.

Quadratures are ordered interleaved, (x_1, p_1, ..., x_M, p_M), and the vacuum has
variance 1/2 in every quadrature. All operations return new states.
"""

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

SYMMETRY_TOL = 1e-10
SYMPLECTIC_TOL = 1e-10
EIGENVALUE_SLACK = 1e-9
DEGENERATE_VARIANCE = 1e-12
VACUUM_VARIANCE = 0.5

# roundoff allowance relative to the covariance norm, for strongly squeezed states
_ROUNDOFF_FACTOR = 100 * np.finfo(float).eps

X, P = 0, 1


class InvalidStateError(ValueError):
    """Raised when a mean/covariance pair does not describe a valid Gaussian state."""


class ModeIndexError(IndexError):
    """Raised when an operation addresses a mode that does not exist."""


class DegenerateMeasurementError(ValueError):
    """Raised when a homodyne marginal is degenerate or not finite."""


class InvalidTransformError(ValueError):
    """Raised when a phase-space map is not symplectic or mis-shaped."""


def symplectic_form(num_modes: int) -> np.ndarray:
    """Return the block-diagonal form with 2x2 blocks [[0, 1], [-1, 0]]."""
    return np.kron(np.eye(num_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def quadrature_vector(num_modes: int, mode: int, angle: float) -> np.ndarray:
    """Coefficients of the rotated quadrature x cos(angle) + p sin(angle) of a mode."""
    vec = np.zeros(2 * num_modes)
    vec[2 * mode + X] = math.cos(angle)
    vec[2 * mode + P] = math.sin(angle)
    return vec


def _eigenvalue_floor(cov: np.ndarray) -> float:
    scale = float(np.max(np.abs(cov))) if cov.size else 0.0
    return VACUUM_VARIANCE - max(EIGENVALUE_SLACK, _ROUNDOFF_FACTOR * scale)


def _symplectic_spectrum(cov: np.ndarray) -> list[float]:
    num_modes = cov.shape[0] // 2
    if num_modes == 0:
        return []
    eigs = np.abs(np.linalg.eigvals(1j * symplectic_form(num_modes) @ cov))
    # eigenvalues come in +/- pairs
    return [float(v) for v in np.sort(eigs)[::2]]


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Mean vector and covariance matrix of an M-mode Gaussian state.

    Instances are immutable: the arrays are copied and marked read-only.
    """

    mean: np.ndarray
    cov: np.ndarray
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(-1)
        cov = np.array(self.cov, dtype=float).reshape(mean.size, mean.size)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "labels", tuple(self.labels))
        self._validate()

    def _validate(self):
        if self.mean.size % 2:
            raise InvalidStateError("Mean vector must have even length 2M.")
        if self.labels and len(self.labels) != self.num_modes:
            raise InvalidStateError(
                f"Got {len(self.labels)} labels for {self.num_modes} modes."
            )
        if len(set(self.labels)) != len(self.labels):
            raise InvalidStateError(f"Mode labels must be unique: {self.labels}.")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.cov))):
            raise InvalidStateError("State contains non-finite entries.")
        scale = max(1.0, float(np.max(np.abs(self.cov)))) if self.cov.size else 1.0
        if np.max(np.abs(self.cov - self.cov.T), initial=0.0) > SYMMETRY_TOL * scale:
            raise InvalidStateError("The covariance matrix is not symmetric.")
        floor = _eigenvalue_floor(self.cov)
        spectrum = _symplectic_spectrum(self.cov)
        if spectrum and min(spectrum) < floor:
            raise InvalidStateError(
                "The covariance matrix violates the uncertainty principle;"
                + f" smallest symplectic eigenvalue is {min(spectrum):.3e}."
            )

    @property
    def num_modes(self) -> int:
        """Number of modes M."""
        return self.mean.size // 2

    def label_of(self, mode: int) -> str:
        """Label of a mode, falling back to its index."""
        return self.labels[mode] if self.labels else str(mode)

    def mode_index(self, label: str) -> int:
        """Index of the mode carrying the given label."""
        try:
            return self.labels.index(label)
        except ValueError as error:
            raise ModeIndexError(f"No mode labelled '{label}'.") from error

    def check_mode(self, mode: int) -> int:
        """Return the mode index if it exists, raise ModeIndexError otherwise."""
        if not 0 <= mode < self.num_modes:
            raise ModeIndexError(
                f"Mode {mode} out of range for a {self.num_modes}-mode state."
            )
        return mode

    def moments(self, mode: int) -> tuple[np.ndarray, np.ndarray]:
        """Mean (2,) and covariance (2, 2) of a single mode."""
        self.check_mode(mode)
        block = slice(2 * mode, 2 * mode + 2)
        return self.mean[block].copy(), self.cov[block, block].copy()


@dataclass(frozen=True, eq=False)
class SymplecticTransform:
    """Affine phase-space map r -> S r + d with S symplectic."""

    matrix: np.ndarray
    displacement: np.ndarray

    def __post_init__(self):
        matrix = np.array(self.matrix, dtype=float)
        displacement = np.array(self.displacement, dtype=float).reshape(-1)
        size = displacement.size
        if matrix.shape != (size, size) or size % 2:
            raise InvalidTransformError(
                f"Matrix shape {matrix.shape} does not match displacement"
                + f" length {displacement.size}."
            )
        matrix.setflags(write=False)
        displacement.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "displacement", displacement)

    @classmethod
    def identity(cls, num_modes: int) -> "SymplecticTransform":
        """The identity map on M modes."""
        return cls(np.eye(2 * num_modes), np.zeros(2 * num_modes))

    @property
    def num_modes(self) -> int:
        """Number of modes the map acts on."""
        return self.displacement.size // 2

    def symplectic_defect(self) -> float:
        """Largest entry of |S Omega S^T - Omega|."""
        omega = symplectic_form(self.num_modes)
        residual = self.matrix @ omega @ self.matrix.T - omega
        return float(np.max(np.abs(residual), initial=0.0))

    def is_symplectic(self, tol: float = SYMPLECTIC_TOL) -> bool:
        """Whether S Omega S^T = Omega holds within tolerance."""
        scale = max(1.0, float(np.max(np.abs(self.matrix), initial=0.0)) ** 2)
        return self.symplectic_defect() <= tol * scale

    def then(self, other: "SymplecticTransform") -> "SymplecticTransform":
        """The map that applies self first and other second."""
        return SymplecticTransform(
            other.matrix @ self.matrix,
            other.matrix @ self.displacement + other.displacement,
        )

    def apply(self, state: GaussianState) -> GaussianState:
        """Push a state through the map."""
        if state.num_modes != self.num_modes:
            raise InvalidTransformError(
                f"Transform on {self.num_modes} modes applied to a"
                + f" {state.num_modes}-mode state."
            )
        return GaussianState(
            mean=self.matrix @ state.mean + self.displacement,
            cov=self.matrix @ state.cov @ self.matrix.T,
            labels=state.labels,
        )


def displacement_map(num_modes: int, mode: int, dx: float, dp: float):
    """Translation of one mode by (dx, dp)."""
    shift = np.zeros(2 * num_modes)
    shift[2 * mode + X] = dx
    shift[2 * mode + P] = dp
    return SymplecticTransform(np.eye(2 * num_modes), shift)


def rotation_map(num_modes: int, mode: int, theta: float) -> SymplecticTransform:
    """Phase rotation (x, p) -> (x cos + p sin, -x sin + p cos) of one mode."""
    matrix = np.eye(2 * num_modes)
    c, s = math.cos(theta), math.sin(theta)
    block = slice(2 * mode, 2 * mode + 2)
    matrix[block, block] = [[c, s], [-s, c]]
    return SymplecticTransform(matrix, np.zeros(2 * num_modes))


def squeezer_map(num_modes: int, i: int, j: int, r: float) -> SymplecticTransform:
    """Two-mode squeezer that squeezes x_i + x_j and p_i - p_j by e^-r."""
    matrix = np.eye(2 * num_modes)
    c, s = math.cosh(r), math.sinh(r)
    xi, pi, xj, pj = 2 * i, 2 * i + 1, 2 * j, 2 * j + 1
    matrix[xi, xi] = matrix[xj, xj] = c
    matrix[xi, xj] = matrix[xj, xi] = -s
    matrix[pi, pi] = matrix[pj, pj] = c
    matrix[pi, pj] = matrix[pj, pi] = s
    return SymplecticTransform(matrix, np.zeros(2 * num_modes))


def qnd_map(num_modes: int, i: int, j: int, kappa: float) -> SymplecticTransform:
    """QND coupling p_i += kappa x_j, p_j += kappa x_i with both x unchanged."""
    matrix = np.eye(2 * num_modes)
    matrix[2 * i + P, 2 * j + X] = kappa
    matrix[2 * j + P, 2 * i + X] = kappa
    return SymplecticTransform(matrix, np.zeros(2 * num_modes))


def shear_map(  # noqa: PLR0913
    num_modes: int,
    target: int,
    quadrature: int,
    source: np.ndarray,
    gain: float,
    offset: float = 0.0,
) -> SymplecticTransform:
    """Add gain * (source . r) + offset to one quadrature of the target mode.

    The source functional must not involve the target mode. The conjugate back-action
    on the source modes is included so that the map stays symplectic; it only touches
    quadratures that are discarded when the shear stands in for a measurement
    feedforward.
    """
    omega = symplectic_form(num_modes)
    if np.any(source[2 * target : 2 * target + 2]):
        raise InvalidTransformError("Shear source must not involve the target mode.")
    # generator g (alpha . r)(source . r), with Omega alpha = e_target
    alpha = np.zeros(2 * num_modes)
    if quadrature == X:
        alpha[2 * target + P] = 1.0
    else:
        alpha[2 * target + X] = -1.0
    matrix = np.eye(2 * num_modes) + gain * (
        np.outer(omega @ alpha, source) + np.outer(omega @ source, alpha)
    )
    shift = np.zeros(2 * num_modes)
    shift[2 * target + quadrature] = offset
    return SymplecticTransform(matrix, shift)


def vacuum(num_modes: int, labels: Sequence[str] = ()) -> GaussianState:
    """The M-mode vacuum."""
    if num_modes < 0:
        raise ValueError("Number of modes must be nonnegative.")
    return GaussianState(
        mean=np.zeros(2 * num_modes),
        cov=VACUUM_VARIANCE * np.eye(2 * num_modes),
        labels=tuple(labels),
    )


def coherent(x: float, p: float, label: str = "") -> GaussianState:
    """Single-mode coherent state with quadrature means (x, p)."""
    return GaussianState(
        mean=np.array([x, p]),
        cov=VACUUM_VARIANCE * np.eye(2),
        labels=(label,) if label else (),
    )


def tensor(states: Iterable[GaussianState]) -> GaussianState:
    """Product state of independent Gaussian states, modes in the given order."""
    states = list(states)
    if not states:
        return vacuum(0)
    labelled = all(state.labels for state in states)
    mean = np.concatenate([state.mean for state in states])
    cov = linalg.block_diag(*[state.cov for state in states])
    labels = tuple(lbl for state in states for lbl in state.labels) if labelled else ()
    return GaussianState(mean=mean, cov=cov, labels=labels)


def displace(state: GaussianState, mode: int, dx: float, dp: float) -> GaussianState:
    """Shift the quadrature means of a mode by (dx, dp)."""
    state.check_mode(mode)
    return displacement_map(state.num_modes, mode, dx, dp).apply(state)


def phase_shift(state: GaussianState, mode: int, theta: float) -> GaussianState:
    """Rotate a mode in phase space by theta."""
    state.check_mode(mode)
    return rotation_map(state.num_modes, mode, theta).apply(state)


def _check_pair(state: GaussianState, i: int, j: int):
    state.check_mode(i)
    state.check_mode(j)
    if i == j:
        raise ModeIndexError(f"Two-mode operation needs distinct modes, got {i} twice.")


def two_mode_squeeze(state: GaussianState, i: int, j: int, r: float) -> GaussianState:
    """Apply EPR-type two-mode squeezing with parametric gain r to modes i and j."""
    _check_pair(state, i, j)
    return squeezer_map(state.num_modes, i, j, r).apply(state)


def qnd_gate(state: GaussianState, i: int, j: int, kappa: float) -> GaussianState:
    """Apply the QND coupling with gain kappa between modes i and j."""
    _check_pair(state, i, j)
    return qnd_map(state.num_modes, i, j, kappa).apply(state)


def condition_on_quadrature(
    mean: np.ndarray,
    cov: np.ndarray,
    functional: np.ndarray,
    keep: np.ndarray,
    outcome: np.ndarray | float,
) -> tuple[np.ndarray, np.ndarray]:
    """Condition on the scalar functional . r taking the value outcome.

    The mean may carry leading batch dimensions, with one outcome per batch entry.
    Returns the conditional mean and covariance restricted to the `keep` indices.
    """
    variance = float(functional @ cov @ functional)
    if not math.isfinite(variance) or variance < DEGENERATE_VARIANCE:
        raise DegenerateMeasurementError(
            f"Marginal variance {variance!r} cannot be conditioned on."
        )
    cross = cov[keep] @ functional
    gain = cross / variance
    innovation = np.asarray(outcome) - mean @ functional
    post_mean = mean[..., keep] + np.multiply.outer(innovation, gain)
    post_cov = cov[np.ix_(keep, keep)] - np.outer(gain, cross)
    return post_mean, 0.5 * (post_cov + post_cov.T)


def homodyne_measure(
    state: GaussianState,
    mode: int,
    angle: float,
    *,
    rng: np.random.Generator | None = None,
    outcome: float | None = None,
) -> tuple[float, GaussianState]:
    """Destructively measure x cos(angle) + p sin(angle) of one mode.

    The outcome is sampled from the normal marginal with the given generator, or taken
    as given. The posterior is the conditional Gaussian of the remaining modes.
    """
    state.check_mode(mode)
    if (rng is None) == (outcome is None):
        raise ValueError("Provide exactly one of rng or outcome.")
    functional = quadrature_vector(state.num_modes, mode, angle)
    variance = float(functional @ state.cov @ functional)
    if not math.isfinite(variance) or variance < DEGENERATE_VARIANCE:
        raise DegenerateMeasurementError(
            f"Marginal variance {variance!r} of mode {mode} cannot be conditioned on."
        )
    if rng is not None:
        outcome = float(
            functional @ state.mean + math.sqrt(variance) * rng.standard_normal()
        )
    if outcome is None or not math.isfinite(outcome):
        raise DegenerateMeasurementError(f"Outcome {outcome!r} is not finite.")
    keep = np.array(
        [k for m in range(state.num_modes) if m != mode for k in (2 * m, 2 * m + 1)],
        dtype=int,
    )
    post_mean, post_cov = condition_on_quadrature(
        state.mean, state.cov, functional, keep, outcome
    )
    labels = tuple(lbl for m, lbl in enumerate(state.labels) if m != mode)
    return outcome, GaussianState(mean=post_mean, cov=post_cov, labels=labels)


def partial_trace(state: GaussianState, keep: Iterable[int]) -> GaussianState:
    """Restrict a state to the kept modes, in the given order."""
    modes = [state.check_mode(m) for m in keep]
    idx = np.array([k for m in modes for k in (2 * m, 2 * m + 1)], dtype=int)
    return GaussianState(
        mean=state.mean[idx],
        cov=state.cov[np.ix_(idx, idx)],
        labels=tuple(state.labels[m] for m in modes) if state.labels else (),
    )


def symplectic_eigenvalues(state: GaussianState) -> list[float]:
    """Symplectic spectrum (ascending) of the state's covariance matrix."""
    return _symplectic_spectrum(state.cov)


def gaussian_fidelity(a: GaussianState, b: GaussianState) -> float:
    """Uhlmann fidelity between two single-mode Gaussian states."""
    if a.num_modes != 1 or b.num_modes != 1:
        raise InvalidStateError("Gaussian fidelity is implemented for single modes.")
    total = a.cov + b.cov
    delta = float(np.linalg.det(total))
    purity_term = max(
        0.0,
        4.0
        * (float(np.linalg.det(a.cov)) - VACUUM_VARIANCE**2)
        * (float(np.linalg.det(b.cov)) - VACUUM_VARIANCE**2),
    )
    diff = a.mean - b.mean
    overlap = math.exp(-0.5 * float(diff @ linalg.solve(total, diff, assume_a="pos")))
    value = overlap / (math.sqrt(delta + purity_term) - math.sqrt(purity_term))
    return min(1.0, max(0.0, value))
