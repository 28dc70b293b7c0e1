#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Vec3 = tuple[float, float, float]


class AnalysisConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    frame_len: int = 512
    hop: int = 256
    fft_size: int = 512
    context_radius: int = 5
    log_floor: float = 1e-12
    sample_rate: int = 16000

    @model_validator(mode="after")
    def _check(self) -> "AnalysisConfig":
        if not 0 < self.hop <= self.frame_len:
            raise ValueError("hop must satisfy 0 < hop <= frame_len")
        if self.fft_size < self.frame_len:
            raise ValueError("fft_size must be >= frame_len")
        if self.context_radius < 0:
            raise ValueError("context_radius must be >= 0")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be > 0")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        return self

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def spliced_dim(self) -> int:
        return self.n_bins * (2 * self.context_radius + 1)


class RoomSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    dims: Vec3
    source: Optional[Vec3] = None
    receiver: Optional[Vec3] = None

    @model_validator(mode="after")
    def _check(self) -> "RoomSpec":
        if any(d <= 0 for d in self.dims):
            raise ValueError("room dimensions must be positive")
        for name in ("source", "receiver"):
            pos = getattr(self, name)
            if pos is not None and not all(0 < p < d for p, d in zip(pos, self.dims)):
                raise ValueError(f"{name} {pos} lies outside room {self.dims}")
        if self.source is not None and self.source == self.receiver:
            raise ValueError("source and receiver must differ")
        return self

    @property
    def is_placed(self) -> bool:
        return self.source is not None and self.receiver is not None

    @property
    def volume(self) -> float:
        lx, ly, lz = self.dims
        return lx * ly * lz

    @property
    def surface(self) -> float:
        lx, ly, lz = self.dims
        return 2.0 * (lx * ly + lx * lz + ly * lz)


class RirConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    t60: float = Field(gt=0)
    sample_rate: int = Field(default=16000, gt=0)
    rir_len: Optional[int] = Field(default=None, gt=0)
    sound_speed: float = Field(default=343.0, gt=0)
    max_image_order: Union[int, Literal["auto"]] = "auto"
    decay_model: Literal["sabine", "eyring"] = "sabine"
    calibrate: bool = True
    beta: Optional[float] = Field(default=None, ge=0.0, lt=1.0)
    sinc_taps: int = 81

    @field_validator("sinc_taps")
    @classmethod
    def _odd_taps(cls, value: int) -> int:
        if value < 1 or value % 2 == 0:
            raise ValueError("sinc_taps must be a positive odd number")
        return value

    @property
    def n_taps(self) -> int:
        # 1.2 x T60 unless rir_len is set
        return self.rir_len or int(round(1.2 * self.t60 * self.sample_rate))


class HddaeSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    input_dim: int = Field(default=2827, gt=0)
    hidden: int = Field(default=2048, gt=0)
    output_dim: int = Field(default=257, gt=0)
    n_layers: int = Field(default=3, ge=2)
    highway_from: int = Field(default=1, ge=1)
    activation: Literal["relu", "linear"] = "relu"

    @model_validator(mode="after")
    def _check(self) -> "HddaeSpec":
        if self.highway_from > self.n_layers - 1:
            raise ValueError("highway_from must lie in 1..n_layers-1")
        return self


class CnnSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    in_channels: int = Field(default=3, gt=0)
    n_bins: int = Field(default=257, gt=0)
    conv_channels: int = Field(default=32, gt=0)
    kernel: int = 11
    n_conv: int = Field(default=2, ge=1)
    fc_hidden: int = Field(default=2048, gt=0)
    activation: Literal["relu", "linear"] = "relu"

    @field_validator("kernel")
    @classmethod
    def _odd_kernel(cls, value: int) -> int:
        if value < 1 or value % 2 == 0:
            raise ValueError("kernel width must be a positive odd number")
        return value


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epochs: int = Field(default=100, ge=1)
    minibatch_size: int = Field(default=128, ge=1)
    learning_rate: float = Field(default=1e-4, ge=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    epsilon: float = Field(default=1e-8, gt=0.0)
    seed: int = 0
    shuffle: bool = True
    validation_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    patience: int = Field(default=10, ge=1)


class CorpusConfig(BaseModel):
    train_dir: Path = Path("corpus/train")
    test_dir: Path = Path("corpus/test")

    @model_validator(mode="after")
    def _distinct(self) -> "CorpusConfig":
        if self.train_dir.resolve() == self.test_dir.resolve():
            raise ValueError("train_dir and test_dir must be distinct")
        return self


class RirPlan(BaseModel):
    train_t60: list[float] = [0.3, 0.6, 0.9]
    test_t60: list[float] = [0.3, 0.4, 0.6, 0.7, 0.9, 1.0]
    per_train_t60: int = Field(default=3, ge=1)
    per_test_t60: int = Field(default=1, ge=1)
    sound_speed: float = 343.0
    decay_model: Literal["sabine", "eyring"] = "sabine"
    calibrate: bool = True

    @field_validator("train_t60", "test_t60")
    @classmethod
    def _positive(cls, value: list[float]) -> list[float]:
        if not value or any(t <= 0 for t in value):
            raise ValueError("T60 sets must be non-empty and positive")
        return value


class TrainSection(BaseModel):
    hddae: TrainConfig = TrainConfig()
    cnn: TrainConfig = TrainConfig()


def _default_rooms() -> list[RoomSpec]:
    return [
        RoomSpec(dims=(4.0, 4.0, 4.0)),
        RoomSpec(dims=(6.0, 6.0, 4.0)),
        RoomSpec(dims=(10.0, 10.0, 8.0)),
    ]


class ExperimentConfig(BaseModel):
    corpus: CorpusConfig = CorpusConfig()
    rooms: list[RoomSpec] = Field(default_factory=_default_rooms)
    rirs: RirPlan = RirPlan()
    analysis: AnalysisConfig = AnalysisConfig()
    hddae: HddaeSpec = HddaeSpec()
    cnn: CnnSpec = CnnSpec()
    train: TrainSection = TrainSection()
    roster: list[str] = ["HDDAE_A(3)", "HDDAE_0.3(3)", "HDDAE_0.6(3)", "HDDAE_0.9(3)", "HDDAE_A(6)", "IDEA_A(6)"]
    seed: int = 1234
    output_dir: Path = Path("runs/full")

    @field_validator("rooms")
    @classmethod
    def _rooms(cls, value: list[RoomSpec]) -> list[RoomSpec]:
        if not value:
            raise ValueError("at least one room is required")
        return value


class RirRecord(BaseModel):
    rir_id: str
    room_id: int
    t60: float
    path: str
    source: Vec3
    receiver: Vec3
    measured_t60: Optional[float] = None
    beta: Optional[float] = None


class ManifestRecord(BaseModel):
    utterance_id: str
    clean_path: str
    reverb_path: str
    feature_path: str
    room_id: int
    rir_id: str
    t60: float
    split: Literal["train", "test"]
    n_frames: int = 0


class DatasetManifest(BaseModel):
    config_hash: str
    analysis: AnalysisConfig
    train_t60: list[float]
    test_t60: list[float]
    rirs: list[RirRecord] = []
    records: list[ManifestRecord] = []
    moments_path: str = "features/lps_moments.npy"
    content_hash: str = ""

    def split(self, name: str) -> list[ManifestRecord]:
        return [r for r in self.records if r.split == name]

    def by_t60(self, name: str, t60: float) -> list[ManifestRecord]:
        return [r for r in self.split(name) if abs(r.t60 - t60) < 1e-9]


class MetricRecord(BaseModel):
    utterance_id: str
    condition: float
    model: str
    stoi: float
    sdi: float
    lsd: float
