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

"""Config Parameter Modeling and Parsing."""

from hexkit.config import config_from_yaml
from hexkit.log import LoggingConfig
from pydantic import Field

from spinport.core.spin_light import StokesNorm

SERVICE_NAME: str = "spinport"


@config_from_yaml(prefix=SERVICE_NAME)
class Config(LoggingConfig):
    """Config parameters and their defaults."""

    service_name: str = Field(
        default=SERVICE_NAME, description="Short name of this service"
    )
    service_instance_id: str = Field(
        default="local", description="Identifier of this running instance"
    )
    seed: int | None = Field(
        default=None,
        ge=0,
        lt=2**64,
        description="Default seed of Monte Carlo runs when none is given explicitly",
        examples=[0, 20240517],
    )
    stokes_norm: StokesNorm = Field(
        default=StokesNorm.CANONICAL,
        description="Normalization of Stokes components onto light quadratures",
    )
    default_shots: int = Field(
        default=10_000, ge=1, description="Monte Carlo trajectories per run"
    )
    default_readout_ratio: float = Field(
        default=1e6,
        gt=0,
        description="Photon-number ratio of coherent readout probes to EPR pulses",
    )
    shot_block_size: int = Field(
        default=4096,
        ge=1,
        description="Shots per counter-based random block of the Monte Carlo engine."
        + " Samples for a seed depend on this size but not on the workers",
    )
    workers: int = Field(
        default=1,
        ge=1,
        description="Threads used for Monte Carlo blocks and sweep rows",
    )
    validation_shots: int = Field(
        default=100_000, ge=2, description="Monte Carlo shots per validation point"
    )
    validation_sigma: float = Field(
        default=5.0,
        gt=0,
        description="Standard errors allowed between Monte Carlo and analytic moments",
    )
    oracle_tolerance: float = Field(
        default=1e-10,
        gt=0,
        description="Tolerance between analytic moments and the operator oracle",
    )
