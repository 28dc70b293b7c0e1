#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.


from ._cacher import FeatureCache, feature_cache
from ._checkpoint import load_checkpoint, save_checkpoint
from ._config import config, config_hash, load_experiment_config
from ._dataclass import (
    AnalysisConfig,
    CnnSpec,
    DatasetManifest,
    ExperimentConfig,
    HddaeSpec,
    ManifestRecord,
    MetricRecord,
    RirConfig,
    RirRecord,
    RoomSpec,
    TrainConfig,
)
from ._ensemble import (
    ConditionPartition,
    IdeaModel,
    ensemble_infer,
    ensemble_prepare,
    idea_dereverb,
    load_idea,
    save_idea,
    single_dereverb,
    train_fusion,
)
from ._errors import (
    CheckpointError,
    DataError,
    DereverbError,
    EmptyDatasetError,
    MetricError,
    NumericError,
    UnknownModelError,
    UsageError,
    WavFormatError,
)
from ._manifest import ManifestStore
from ._mapper import MapperWrapper, SpectralMapper
from ._metrics import MetricReport, align_trim, lsd, measure, sdi, stoi
from ._nn import FeatureNormalizer, FusionCnnModel, HddaeModel, build_cnn, build_hddae
from ._optim import TrainHistory, TrainResult, train
from ._rir import ImpulseResponse, convolve, generate_rir, measure_t60, place_randomly
from ._signal import Waveform, dereverb_pipeline, lps, splice, stft
from ._synth import pseudo_speech
from ._wavio import read_wav, write_wav
from .utils import ModelId, parse_model_id

__all__ = [
    "config",
    "config_hash",
    "load_experiment_config",
    "feature_cache",
    "FeatureCache",
    "AnalysisConfig",
    "CnnSpec",
    "DatasetManifest",
    "ExperimentConfig",
    "HddaeSpec",
    "ManifestRecord",
    "MetricRecord",
    "RirConfig",
    "RirRecord",
    "RoomSpec",
    "TrainConfig",
    "ConditionPartition",
    "IdeaModel",
    "ensemble_infer",
    "ensemble_prepare",
    "idea_dereverb",
    "load_idea",
    "save_idea",
    "single_dereverb",
    "train_fusion",
    "CheckpointError",
    "DataError",
    "DereverbError",
    "EmptyDatasetError",
    "MetricError",
    "NumericError",
    "UnknownModelError",
    "UsageError",
    "WavFormatError",
    "ManifestStore",
    "MapperWrapper",
    "SpectralMapper",
    "MetricReport",
    "align_trim",
    "lsd",
    "measure",
    "sdi",
    "stoi",
    "FeatureNormalizer",
    "FusionCnnModel",
    "HddaeModel",
    "build_cnn",
    "build_hddae",
    "TrainHistory",
    "TrainResult",
    "train",
    "ImpulseResponse",
    "convolve",
    "generate_rir",
    "measure_t60",
    "place_randomly",
    "Waveform",
    "dereverb_pipeline",
    "lps",
    "splice",
    "stft",
    "pseudo_speech",
    "read_wav",
    "write_wav",
    "load_checkpoint",
    "save_checkpoint",
    "ModelId",
    "parse_model_id",
]
