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

"""Tests for the experimental design calculator."""

import json
import logging
import math
from pathlib import Path

import pytest
from pydantic import ValidationError

from spinport.core.feasibility import (
    Branch,
    FeasibilityError,
    branch_of,
    design_report,
    load_params,
    vector_polarizability,
)
from spinport.models import CheckStatus, PhysicalParams
from tests.fixtures.utils import CESIUM_PARAMS

CESIUM = {
    "gamma": 5.0e6,
    "delta": 8.0e8,
    "F": 4,
    "I": 3.5,
    "transition": "D2",
    "wavelength": 8.52e-5,
    "A": 1.0e-6,
    "N": 1.0e5,
}


def _status(report, name: str) -> CheckStatus:
    return next(check.status for check in report.checks if check.name == name)


def test_cesium_design_point():
    """The cesium example reproduces the worked design numbers."""
    report = design_report(load_params(CESIUM_PARAMS))
    sigma = 8.52e-5**2
    assert report.n_required == 800_000
    assert report.sigma == pytest.approx(sigma)
    assert report.alpha_v == -0.5
    assert report.gamma_over_delta == pytest.approx(0.00625)
    assert report.a == pytest.approx(-sigma / 4e-6 * 0.00625 * 0.5)
    assert report.a == pytest.approx(-5.671e-6, rel=1e-3)
    assert report.A_optimal == pytest.approx(2.268e-6, rel=1e-3)
    assert report.beam_width_optimal == pytest.approx(math.sqrt(report.A_optimal))
    assert report.alpha_delta == pytest.approx(4.537, rel=1e-3)
    assert report.kappa == pytest.approx(abs(report.a) * 800_000 / 2)


def test_cesium_checks():
    """The cesium point passes the detuning checks but not unity coupling."""
    report = design_report(load_params(CESIUM_PARAMS))
    assert _status(report, "gamma_over_delta") == CheckStatus.PASS
    assert _status(report, "optical_depth") == CheckStatus.WARN
    assert _status(report, "unity_coupling") == CheckStatus.WARN
    assert _status(report, "spin_equal") == CheckStatus.PASS
    assert _status(report, "weak_focusing") == CheckStatus.PASS
    assert _status(report, "atom_number") == CheckStatus.PASS
    assert _status(report, "beam_area") == CheckStatus.PASS
    assert _status(report, "pulse_saturation") == CheckStatus.PASS
    assert _status(report, "pulse_opo") == CheckStatus.PASS
    weak = next(check for check in report.checks if check.name == "weak_focusing")
    assert weak.value == pytest.approx(1e-6 / 8.52e-5**2)


def test_warnings_are_logged(caplog):
    """Every failed check is logged."""
    logger = logging.getLogger("spinport.core.feasibility")
    logger.addHandler(caplog.handler)
    try:
        with caplog.at_level(logging.WARNING, logger=logger.name):
            report = design_report(PhysicalParams(**CESIUM))
    finally:
        logger.removeHandler(caplog.handler)
    message = "Feasibility check not met."
    logged = [r for r in caplog.records if r.getMessage() == message]
    assert report.warnings
    assert {r.check for r in logged} == {c.name for c in report.warnings}


def test_beam_width_scales_with_square_root_of_atoms():
    """The optimal beam width grows as the square root of the atom number."""
    ratios = []
    areas = []
    for atoms in (1e4, 1e5, 1e6):
        report = design_report(PhysicalParams(**{**CESIUM, "N": atoms}))
        areas.append(report.A_optimal / atoms)
        ratios.append(report.beam_width_optimal / math.sqrt(atoms))
    assert ratios[1] == pytest.approx(ratios[0], rel=1e-12)
    assert ratios[2] == pytest.approx(ratios[0], rel=1e-12)
    assert areas[2] == pytest.approx(areas[0], rel=1e-12)


def test_given_sigma_and_polarizability_take_precedence():
    """Explicit sigma and alpha_v override the derived values."""
    params = PhysicalParams(**{**CESIUM, "sigma": 1e-8, "alpha_v": -0.45})
    report = design_report(params)
    assert report.sigma == 1e-8
    assert report.alpha_v == -0.45
    assert _status(report, "alpha_v_table") == CheckStatus.PASS


def test_atom_number_from_density():
    """Without N the atom number is density times cell volume."""
    params = {key: value for key, value in CESIUM.items() if key != "N"}
    params.update(density=5e12, cell_x=1e-3, cell_y=1e-3, cell_z=2e-2)
    report = design_report(PhysicalParams(**params))
    assert report.N == pytest.approx(1e5)
    assert report.n_required == 800_000


def test_given_photon_number():
    """A given photon number replaces 2 F N in the coupling."""
    report = design_report(PhysicalParams(**{**CESIUM, "n": 2 / 5.671e-6}))
    assert _status(report, "unity_coupling") == CheckStatus.PASS
    assert _status(report, "spin_equal") == CheckStatus.WARN
    assert report.n_required == 800_000


@pytest.mark.parametrize(
    "drop, missing",
    [
        (("wavelength",), ["sigma"]),
        (("transition",), ["alpha_v"]),
        (("N",), ["N"]),
    ],
)
def test_underdetermined_parameters(drop: tuple[str, ...], missing: list[str]):
    """Quantities that cannot be derived are reported as missing."""
    params = {key: value for key, value in CESIUM.items() if key not in drop}
    with pytest.raises(FeasibilityError) as error:
        design_report(PhysicalParams(**params))
    assert error.value.missing == missing


def test_zero_detuning():
    """The design needs an off-resonant probe."""
    with pytest.raises(FeasibilityError):
        design_report(PhysicalParams(**{**CESIUM, "delta": 0.0}))


def test_missing_required_parameter(tmp_path: Path):
    """A file without gamma names the missing key."""
    path = tmp_path / "params.toml"
    path.write_text("delta = 8e8\nF = 4\nA = 1e-6\n", encoding="utf-8")
    with pytest.raises(FeasibilityError) as error:
        load_params(path)
    assert error.value.missing == ["gamma"]


def test_json_parameters(tmp_path: Path):
    """JSON files load like TOML files."""
    path = tmp_path / "params.json"
    path.write_text(json.dumps(CESIUM), encoding="utf-8")
    report = design_report(load_params(path))
    assert report.n_required == 800_000


@pytest.mark.parametrize(
    "content",
    ["gamma = ", "[1, 2]", '{"gamma": 5e6, "extra": 1}'],
    ids=["bad_toml", "not_a_table", "unknown_key"],
)
def test_unusable_files(tmp_path: Path, content: str):
    """Unparsable or malformed files raise FeasibilityError."""
    suffix = ".toml" if content.startswith("gamma") else ".json"
    path = tmp_path / f"params{suffix}"
    path.write_text(content, encoding="utf-8")
    with pytest.raises(FeasibilityError):
        load_params(path)


def test_unreadable_file(tmp_path: Path):
    """A missing file is reported as a FeasibilityError."""
    with pytest.raises(FeasibilityError):
        load_params(tmp_path / "absent.toml")


def test_polarizability_table():
    """Vector polarizabilities of the alkali D lines."""
    assert vector_polarizability("D1", Branch.UPPER) == 1.0
    assert vector_polarizability("D1", Branch.LOWER) == -1.0
    assert vector_polarizability("D2", Branch.UPPER) == -0.5
    assert vector_polarizability("D2", Branch.LOWER) == 0.5


def test_branch_of():
    """Ground hyperfine levels sit at I +- 1/2."""
    assert branch_of(4, 3.5) == Branch.UPPER
    assert branch_of(3, 3.5) == Branch.LOWER
    with pytest.raises(FeasibilityError):
        branch_of(2, 3.5)


def test_half_integer_spins():
    """Spins must be half-integers."""
    with pytest.raises(ValidationError):
        PhysicalParams(**{**CESIUM, "F": 4.3})
