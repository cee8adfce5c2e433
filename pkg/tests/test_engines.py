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

"""Tests for the composed analytic engine and the Monte Carlo engine."""

import math
from dataclasses import replace

import numpy as np
import pytest
from pydantic import ValidationError

from spinport.core.engines import (
    analytic_report,
    block_generator,
    compose,
    monte_carlo_report,
)
from spinport.core.gaussian import coherent
from spinport.core.protocols import (
    atom_to_atom_protocol,
    atom_to_light_protocol,
    run_monte_carlo,
    swap_protocol,
)
from spinport.core.steps import (
    ParameterRangeError,
    ProtocolBuilder,
    ProtocolConfigError,
    Squeeze,
)
from spinport.models import MAX_KAPPA, MAX_SQUEEZING, Engine, ProtocolConfig

SIGMA = 5.0


def _epr_protocol(r: float):
    return (
        ProtocolBuilder("epr")
        .mode("a", "vacuum")
        .mode("b", "vacuum")
        .squeeze("a", "b", r)
        .build()
    )


def _within_errors(analytic, sampled):
    for exact, estimate in zip(
        analytic.output_moments, sampled.output_moments, strict=True
    ):
        for k in range(2):
            bound = SIGMA * estimate.mean_stderr[k] + 1e-9
            assert abs(estimate.mean[k] - exact.mean[k]) <= bound
            for m in range(2):
                bound = SIGMA * estimate.cov_stderr[k][m] + 1e-9
                assert abs(estimate.cov[k][m] - exact.cov[k][m]) <= bound


@pytest.mark.parametrize("r", [0.0, 0.5, 1.0, 2.0])
def test_composed_epr_state(r: float):
    """The composed map of a squeezer yields the EPR covariances."""
    final = compose(_epr_protocol(r)).final_state()
    plus = np.array([1.0, 0.0, 1.0, 0.0])
    minus = np.array([0.0, 1.0, 0.0, -1.0])
    assert plus @ final.cov @ plus == pytest.approx(math.exp(-2 * r), abs=1e-12)
    assert minus @ final.cov @ minus == pytest.approx(math.exp(-2 * r), abs=1e-12)


def test_composed_map_is_symplectic():
    """Deferred measurements keep the composed map symplectic."""
    for build in (atom_to_light_protocol, atom_to_atom_protocol, swap_protocol):
        composition = compose(build(ProtocolConfig(r=1.0, readout_ratio=1e2)))
        assert composition.transform.is_symplectic()
        assert len(composition.records) == len(composition.measured)


def test_records_hold_expected_outcomes():
    """Analytic records are the mean outcomes at measurement time."""
    protocol = atom_to_light_protocol(ProtocolConfig(r=1.0))
    report = analytic_report(protocol, ProtocolConfig(r=1.0), {"A": coherent(2.0, 0.5)})
    s1, s2 = report.measurement_records
    assert (s1.mode_label, s2.mode_label) == ("L1", "C")
    assert s1.quadrature_angle == pytest.approx(math.pi / 2)
    # s1 reads p_L1 + x_A and s2 reads kappa_probe times the rotated p_A
    assert s1.outcome == pytest.approx(2.0)
    assert s2.outcome == pytest.approx(0.5 * math.sqrt(1e6))


def test_measured_output_is_rejected():
    """A measured mode cannot be an output."""
    protocol = (
        ProtocolBuilder("bad")
        .mode("a", "vacuum")
        .output("a")
        .measure("a", "m", quadrature="x")
        .build()
    )
    with pytest.raises(ProtocolConfigError):
        analytic_report(protocol, ProtocolConfig())


def test_default_outputs_are_unmeasured_modes():
    """Without declared outputs every unmeasured mode is reported."""
    protocol = (
        ProtocolBuilder("pair")
        .mode("a", "vacuum")
        .mode("b", "vacuum")
        .squeeze("a", "b", 0.5)
        .measure("a", "m", quadrature="x")
        .build()
    )
    report = analytic_report(protocol, ProtocolConfig())
    assert [m.label for m in report.output_moments] == ["b"]
    assert report.fidelity_coherent is None


@pytest.mark.parametrize(
    "build, inputs",
    [
        (atom_to_light_protocol, {"A": coherent(1.0, -0.5)}),
        (atom_to_atom_protocol, {"A": coherent(0.5, 1.0)}),
        (swap_protocol, {"A": coherent(1.0, 0.0), "B": coherent(0.0, -1.0)}),
    ],
)
def test_monte_carlo_matches_analytic(build, inputs):
    """Sampled moments agree with the exact ones within five standard errors."""
    cfg = ProtocolConfig(r=1.0, readout_ratio=1e2, shots=100_000, seed=2024)
    protocol = build(cfg)
    analytic = analytic_report(protocol, cfg, inputs)
    sampled = monte_carlo_report(protocol, cfg, inputs)
    assert sampled.engine == Engine.MONTE_CARLO
    assert sampled.shots == 100_000
    assert sampled.gain_matrix == analytic.gain_matrix
    _within_errors(analytic, sampled)
    for exact, estimate in zip(analytic.added_noise, sampled.added_noise, strict=True):
        assert abs(estimate.x - exact.x) <= SIGMA * estimate.stderr_x + 1e-9
        assert abs(estimate.p - exact.p) <= SIGMA * estimate.stderr_p + 1e-9


def test_monte_carlo_epr_without_measurements():
    """Without measurements the sampled covariance is exact."""
    cfg = ProtocolConfig(shots=1000, seed=1)
    report = monte_carlo_report(_epr_protocol(1.0), cfg)
    exact = analytic_report(_epr_protocol(1.0), cfg)
    pairs = zip(report.output_moments, exact.output_moments, strict=True)
    for estimate, truth in pairs:
        assert np.allclose(estimate.cov, truth.cov, atol=1e-12)


def test_monte_carlo_is_deterministic():
    """Equal seeds give byte-identical reports whatever the block schedule."""
    cfg = ProtocolConfig(r=0.5, shots=5000, seed=99)
    protocol = atom_to_atom_protocol(cfg)
    serial = monte_carlo_report(protocol, cfg, block_size=1000, workers=1)
    threaded = monte_carlo_report(protocol, cfg, block_size=1000, workers=4)
    again = monte_carlo_report(protocol, cfg, block_size=1000, workers=1)
    assert serial.to_json() == threaded.to_json() == again.to_json()


def test_different_seeds_differ():
    """A different seed gives different samples."""
    protocol = atom_to_light_protocol(ProtocolConfig())
    first = monte_carlo_report(protocol, ProtocolConfig(shots=100, seed=1))
    second = monte_carlo_report(protocol, ProtocolConfig(shots=100, seed=2))
    assert first.output_moments[0].mean != second.output_moments[0].mean


def test_block_streams_are_counter_based():
    """Block streams depend only on seed and block index."""
    first = block_generator(5, 3).standard_normal(4)
    second = block_generator(5, 3).standard_normal(4)
    other = block_generator(5, 4).standard_normal(4)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, other)


def test_single_shot_reports_no_variances():
    """One trajectory yields means but no covariance, noise or fidelity."""
    cfg = ProtocolConfig(shots=1, seed=0)
    report = run_monte_carlo(atom_to_light_protocol(cfg), cfg)
    assert report.output_moments[0].cov is None
    assert report.added_noise == []
    assert report.fidelity_coherent is None
    assert len(report.measurement_records) == 2


def test_monte_carlo_needs_seed():
    """Monte Carlo runs without a seed are refused."""
    with pytest.raises(ProtocolConfigError):
        monte_carlo_report(_epr_protocol(0.5), ProtocolConfig(shots=10))


def test_block_size_is_part_of_the_sample_schedule():
    """Samples for a seed depend on the block size, not on the workers."""
    cfg = ProtocolConfig(r=0.5, shots=3000, seed=7)
    protocol = atom_to_light_protocol(cfg)
    small = monte_carlo_report(protocol, cfg, block_size=1000, workers=1)
    large = monte_carlo_report(protocol, cfg, block_size=3000, workers=1)
    threaded = monte_carlo_report(protocol, cfg, block_size=1000, workers=3)
    assert small.output_moments[0].mean != large.output_moments[0].mean
    assert small.to_json() == threaded.to_json()


def test_squeezing_at_the_limit_runs():
    """The largest accepted squeezing still composes to finite moments."""
    cfg = ProtocolConfig(r=MAX_SQUEEZING)
    report = analytic_report(swap_protocol(cfg), cfg)
    assert all(math.isfinite(noise.x) for noise in report.added_noise)
    final = compose(_epr_protocol(MAX_SQUEEZING)).final_state()
    assert np.isfinite(final.cov).all()


@pytest.mark.parametrize(
    "update",
    [
        {"r": MAX_SQUEEZING + 0.01},
        {"r": -0.01},
        {"kappa": MAX_KAPPA * 1.01},
        {"kappa": -MAX_KAPPA * 1.01},
        {"readout_ratio": 1e13},
        {"readout_ratio": 0.0},
    ],
)
def test_config_rejects_parameters_past_the_limits(update: dict):
    """Parameters just past their limits fail validation."""
    with pytest.raises(ValidationError):
        ProtocolConfig(**update)


def test_kappa_at_the_limit_runs():
    """The largest accepted QND gain builds and runs."""
    cfg = ProtocolConfig(r=1.0, kappa=MAX_KAPPA, readout_ratio=1e2)
    report = analytic_report(swap_protocol(cfg), cfg)
    assert np.isfinite(report.gain_matrix).all()
    with pytest.raises(ParameterRangeError):
        atom_to_atom_protocol(cfg.model_copy(update={"readout_ratio": 1e13}))


def test_accumulated_squeezing_is_bounded():
    """Chained squeezers may not push a mode past the squeezing limit."""
    builder = (
        ProtocolBuilder("chain")
        .mode("a", "vacuum")
        .mode("b", "vacuum")
        .mode("c", "vacuum")
        .squeeze("a", "b", 15.0)
    )
    builder.squeeze("a", "c", MAX_SQUEEZING - 15.0)
    with pytest.raises(ParameterRangeError) as error:
        builder.squeeze("b", "c", 15.0)
    assert error.value.code == "OUT_OF_RANGE"


@pytest.mark.parametrize(
    "gains",
    [{"r": MAX_SQUEEZING + 5.0}, {"kappa_probe": 1e200}, {"inv_sqrt_ratio": 1e9}],
)
def test_gain_overrides_are_range_checked(gains: dict):
    """Overridden step parameters are checked when the protocol is built."""
    with pytest.raises(ParameterRangeError):
        atom_to_atom_protocol(ProtocolConfig(gains=gains))


def test_numeric_overflow_is_a_range_error():
    """Runs that overflow report a range error instead of crashing."""
    protocol = _epr_protocol(1.0)
    huge = replace(protocol, steps=(Squeeze("1-squeeze", "a", "b", 1000.0),))
    with pytest.raises(ParameterRangeError):
        analytic_report(huge, ProtocolConfig())
    with pytest.raises(ParameterRangeError):
        monte_carlo_report(huge, ProtocolConfig(shots=10, seed=0))
