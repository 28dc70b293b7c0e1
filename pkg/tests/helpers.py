#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from __future__ import annotations

import numpy as np

from DeReverb.core import FeatureNormalizer, HddaeSpec


def random_pairs(spec: HddaeSpec, n_rows: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Spliced-like inputs with targets that depend smoothly on the centre block."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_rows, spec.input_dim))
    centre = (spec.input_dim - spec.output_dim) // 2
    y = 0.5 * x[:, centre : centre + spec.output_dim] + 1.0
    return x, y


def fitted(model, x: np.ndarray, y: np.ndarray):
    model.normalizer = FeatureNormalizer.fit(x, y)
    return model


def distorted_pairs(
    spec: HddaeSpec, n_rows: int, gain: float, offset: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """A toy room: inputs are ``gain * rows + offset``, targets the undistorted centre block."""
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((n_rows, spec.input_dim))
    centre = (spec.input_dim - spec.output_dim) // 2
    return gain * rows + offset, rows[:, centre : centre + spec.output_dim].copy()
