# Copyright (c) 2025 DeReverb contributors
# Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
# Part of the DeReverb project. All rights reserved where applicable.

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ._checkpoint import MAGIC, load_checkpoint
from ._config import config
from ._dataclass import AnalysisConfig
from ._ensemble import IDEA_FORMAT, IdeaModel, load_idea
from ._errors import CheckpointError
from ._nn import HddaeModel
from ._signal import Waveform, dereverb_pipeline


class SpectralMapper(ABC):
    """A trained artifact that maps spliced reverberant LPS rows to clean LPS rows."""

    @abstractmethod
    def is_valid(self) -> bool: ...

    @abstractmethod
    def load(self) -> "SpectralMapper": ...

    @abstractmethod
    def map_frames(self, y_spliced: np.ndarray) -> np.ndarray: ...

    @property
    @abstractmethod
    def analysis(self) -> AnalysisConfig: ...

    def dereverb(self, y: Waveform) -> Waveform:
        return dereverb_pipeline(y, self.map_frames, self.analysis)


class HddaeMapper(SpectralMapper):
    def __init__(self, path: Path, analysis: Optional[AnalysisConfig] = None, float32: bool = False) -> None:
        self.path = path
        self.float32 = float32
        self._analysis = analysis or AnalysisConfig()
        self.model: Optional[HddaeModel] = None

    def is_valid(self) -> bool:
        if not self.path.is_file():
            return False
        with self.path.open("rb") as fh:
            return fh.read(4) == MAGIC

    def load(self) -> "HddaeMapper":
        model = load_checkpoint(self.path)
        if not isinstance(model, HddaeModel):
            raise CheckpointError(f"{self.path} holds a {model.kind} model, not an HDDAE")
        if "analysis" in model.meta:
            self._analysis = AnalysisConfig.model_validate(model.meta["analysis"])
        self.model = model.astype(np.float32) if self.float32 else model
        return self

    @property
    def analysis(self) -> AnalysisConfig:
        return self._analysis

    def map_frames(self, y_spliced: np.ndarray) -> np.ndarray:
        return self.model.forward(y_spliced)


class IdeaMapper(SpectralMapper):
    def __init__(self, path: Path, float32: bool = False) -> None:
        self.path = path
        self.float32 = float32
        self.model: Optional[IdeaModel] = None

    def is_valid(self) -> bool:
        if self.path.is_dir():
            self.path = self.path / "idea.json"
        if not self.path.is_file() or self.path.suffix != ".json":
            return False
        return IDEA_FORMAT in self.path.read_text(encoding="utf-8", errors="replace")[:4096]

    def load(self) -> "IdeaMapper":
        model = load_idea(self.path)
        self.model = model.astype(np.float32) if self.float32 else model
        return self

    @property
    def analysis(self) -> AnalysisConfig:
        return self.model.analysis

    def map_frames(self, y_spliced: np.ndarray) -> np.ndarray:
        return self.model.map_frames(y_spliced)


class MapperWrapper(SpectralMapper):
    """Picks the mapper that understands the artifact at ``path``."""

    def __init__(self, path: Union[str, Path], analysis: Optional[AnalysisConfig] = None) -> None:
        self.path = Path(path)
        self.service = self._get_service(analysis)

    def _get_service(self, analysis: Optional[AnalysisConfig]) -> SpectralMapper:
        float32 = config.FLOAT32_INFERENCE
        candidates = [IdeaMapper(self.path, float32), HddaeMapper(self.path, analysis, float32)]
        service = next((s for s in candidates if s.is_valid()), None)
        if service is None:
            raise CheckpointError(f"{self.path} is neither a DRVK checkpoint nor an IDEA manifest")
        return service.load()

    def is_valid(self) -> bool:
        return self.service.is_valid()

    def load(self) -> "MapperWrapper":
        return self

    @property
    def analysis(self) -> AnalysisConfig:
        return self.service.analysis

    def map_frames(self, y_spliced: np.ndarray) -> np.ndarray:
        return self.service.map_frames(y_spliced)
