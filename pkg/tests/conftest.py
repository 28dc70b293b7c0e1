#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from __future__ import annotations

import numpy as np
import pytest

from DeReverb.core import (
    AnalysisConfig,
    CnnSpec,
    HddaeSpec,
    TrainConfig,
    Waveform,
    pseudo_speech,
)


@pytest.fixture
def tiny_analysis() -> AnalysisConfig:
    # 17 bins, 51 spliced dims
    return AnalysisConfig(frame_len=32, hop=16, fft_size=32, context_radius=1)


@pytest.fixture
def tiny_hddae_spec(tiny_analysis: AnalysisConfig) -> HddaeSpec:
    return HddaeSpec(
        input_dim=tiny_analysis.spliced_dim,
        hidden=8,
        output_dim=tiny_analysis.n_bins,
        n_layers=3,
        highway_from=1,
    )


@pytest.fixture
def tiny_cnn_spec(tiny_analysis: AnalysisConfig) -> CnnSpec:
    return CnnSpec(in_channels=2, n_bins=tiny_analysis.n_bins, conv_channels=3, kernel=3, n_conv=2, fc_hidden=6)


@pytest.fixture
def quick_train() -> TrainConfig:
    return TrainConfig(epochs=3, minibatch_size=16, learning_rate=1e-3, validation_fraction=0.0, seed=5)


@pytest.fixture
def speech() -> Waveform:
    return pseudo_speech(3.0, seed=7)


@pytest.fixture
def noise_second() -> Waveform:
    rng = np.random.default_rng(11)
    return Waveform(samples=rng.standard_normal(16000), sample_rate=16000)
