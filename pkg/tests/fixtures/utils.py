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

"""Utils for Fixture handling."""

from pathlib import Path

import numpy as np

from spinport.core.gaussian import (
    GaussianState,
    phase_shift,
    qnd_gate,
    two_mode_squeeze,
)

BASE_DIR = Path(__file__).parent.resolve()
EXAMPLE_DATA = BASE_DIR.parent.parent / "example_data"
CESIUM_PARAMS = EXAMPLE_DATA / "cesium.toml"


def random_two_mode_state(rng: np.random.Generator) -> GaussianState:
    """A random valid two-mode state: thermal, squeezed, coupled, rotated, displaced."""
    occupation = rng.uniform(0.0, 0.5, size=2)
    cov = np.diag(np.repeat(0.5 + occupation, 2))
    state = GaussianState(mean=rng.normal(size=4), cov=cov, labels=("a", "b"))
    state = two_mode_squeeze(state, 0, 1, rng.uniform(0.0, 1.0))
    state = qnd_gate(state, 0, 1, rng.uniform(-1.0, 1.0))
    state = phase_shift(state, 0, rng.uniform(0.0, 2 * np.pi))
    return phase_shift(state, 1, rng.uniform(0.0, 2 * np.pi))
