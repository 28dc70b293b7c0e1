#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

"""Integrated deep ensemble: condition specialists (preparation) fused by a CNN (integration)."""

from collections.abc import Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import ujson

from DeReverb.logger import LOGGER
from ._checkpoint import load_checkpoint, save_checkpoint
from ._dataclass import AnalysisConfig, CnnSpec, HddaeSpec, ManifestRecord, TrainConfig
from ._errors import CheckpointError, EmptyDatasetError, ShapeMismatchError
from ._nn import FeatureNormalizer, FusionCnnModel, HddaeModel, build_cnn, build_hddae
from ._optim import TrainResult, train
from ._signal import Waveform, dereverb_pipeline

IDEA_FORMAT = "idea-manifest"
IDEA_VERSION = 1
Pairs = tuple[np.ndarray, np.ndarray]


@dataclass
class ConditionPartition:
    """Training utterances grouped by their known reverberation condition."""

    labels: list[float]
    assignment: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_records(cls, records: Sequence[ManifestRecord], labels: Sequence[float]) -> "ConditionPartition":
        partition = cls(labels=list(labels))
        for record in records:
            if record.split != "train":
                continue
            label = partition.label_for(record.t60)
            if label is None:
                raise EmptyDatasetError(f"utterance {record.utterance_id} has unlisted condition {record.t60}")
            partition.assignment[record.utterance_id] = label
        partition.validate()
        return partition

    def label_for(self, t60: float) -> Optional[float]:
        return next((label for label in self.labels if abs(label - t60) < 1e-9), None)

    def members(self, label: float) -> list[str]:
        return [uid for uid, lab in self.assignment.items() if lab == label]

    def validate(self) -> "ConditionPartition":
        for label in self.labels:
            if not self.members(label):
                raise EmptyDatasetError(f"condition subset T60={label} is empty")
        return self


def _check_specialists(specialists: Sequence[HddaeModel]) -> None:
    if not specialists:
        raise ShapeMismatchError("ensemble has no specialists")
    dims = {(m.spec.input_dim, m.spec.output_dim) for m in specialists}
    if len(dims) != 1:
        raise ShapeMismatchError(f"specialists disagree on input/output dims: {sorted(dims)}")


def ensemble_prepare(
    groups: Mapping[float, Pairs],
    spec: HddaeSpec,
    cfg: TrainConfig,
    workers: int = 1,
    normalizers: Optional[Sequence[FeatureNormalizer]] = None,
) -> list[TrainResult]:
    """Train one HDDAE per condition subset, in the mapping's order.

    Specialist ``p`` is initialised and shuffled from ``cfg.seed + p``, so a single
    subset reproduces a plain ``train`` call. Without ``normalizers`` each
    specialist fits its own on its subset.
    """
    jobs = list(groups.items())
    if not jobs:
        raise EmptyDatasetError("no condition subsets to train on")
    for label, (inputs, _) in jobs:
        if len(inputs) == 0:
            raise EmptyDatasetError(f"condition subset T60={label} is empty")
    if normalizers is not None and len(normalizers) != len(jobs):
        raise ShapeMismatchError(f"{len(normalizers)} normalizers for {len(jobs)} specialists")

    def _fit(index: int) -> TrainResult:
        label, (inputs, targets) = jobs[index]
        seed = cfg.seed + index
        model = build_hddae(spec, seed)
        if normalizers is not None:
            model.normalizer = normalizers[index]
        result = train(model, inputs, targets, cfg.model_copy(update={"seed": seed}), label=f"specialist[{label}]")
        result.model.meta["condition"] = label
        return result

    LOGGER.info("Training %d specialists with %d worker(s)", len(jobs), workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_fit, range(len(jobs))))
    return [_fit(i) for i in range(len(jobs))]


def ensemble_infer(specialists: Sequence[HddaeModel], y_spliced: np.ndarray) -> np.ndarray:
    """Stack specialist estimates as (frames, P, bins) in specialist order."""
    _check_specialists(specialists)
    return np.stack([m.forward(y_spliced) for m in specialists], axis=1)


def train_fusion(
    specialists: Sequence[HddaeModel],
    inputs: np.ndarray,
    targets: np.ndarray,
    spec: CnnSpec,
    cfg: TrainConfig,
) -> TrainResult:
    """Fit the fusion CNN on specialist outputs over every condition; specialists are only read."""
    stacked = ensemble_infer(specialists, inputs)
    spec = spec.model_copy(update={"in_channels": stacked.shape[1], "n_bins": stacked.shape[2]})
    model = build_cnn(spec, cfg.seed)
    return train(model, stacked, targets, cfg, label="fusion")


@dataclass
class IdeaModel:
    specialists: list[HddaeModel]
    fusion: FusionCnnModel
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    labels: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        _check_specialists(self.specialists)
        if self.fusion.spec.in_channels != len(self.specialists):
            raise ShapeMismatchError(
                f"fusion expects {self.fusion.spec.in_channels} channels, ensemble has {len(self.specialists)}"
            )
        if not self.labels:
            self.labels = [m.meta.get("condition", i) for i, m in enumerate(self.specialists)]

    def map_frames(self, y_spliced: np.ndarray) -> np.ndarray:
        return self.fusion.forward(ensemble_infer(self.specialists, y_spliced))

    def astype(self, dtype) -> "IdeaModel":
        return IdeaModel(
            specialists=[m.astype(dtype) for m in self.specialists],
            fusion=self.fusion.astype(dtype),
            analysis=self.analysis,
            labels=list(self.labels),
        )


def idea_dereverb(model: IdeaModel, y: Waveform) -> Waveform:
    return dereverb_pipeline(y, model.map_frames, model.analysis)


def single_dereverb(model: HddaeModel, y: Waveform, cfg: Optional[AnalysisConfig] = None) -> Waveform:
    return dereverb_pipeline(y, model.forward, cfg or AnalysisConfig())


def save_idea(model: IdeaModel, directory: Union[str, Path], config_hash: str = "") -> Path:
    """Write P specialist checkpoints, the fusion checkpoint and an ``idea.json`` manifest."""
    directory = Path(directory)
    entries = []
    for index, (label, specialist) in enumerate(zip(model.labels, model.specialists)):
        name = f"specialist_{index}.drvk"
        save_checkpoint(specialist, directory / name)
        entries.append({"index": index, "condition": label, "checkpoint": name})
    save_checkpoint(model.fusion, directory / "fusion.drvk")

    manifest = {
        "format": IDEA_FORMAT,
        "version": IDEA_VERSION,
        "config_hash": config_hash,
        "analysis": model.analysis.model_dump(mode="json"),
        "specialists": entries,
        "fusion": "fusion.drvk",
    }
    path = directory / "idea.json"
    path.write_text(ujson.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    LOGGER.info("Saved IDEA manifest with %d specialists to %s", len(entries), path)
    return path


def load_idea(path: Union[str, Path]) -> IdeaModel:
    path = Path(path)
    try:
        manifest = ujson.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read IDEA manifest {path}: {exc}") from exc
    if manifest.get("format") != IDEA_FORMAT:
        raise CheckpointError(f"{path} is not an IDEA manifest")
    if manifest.get("version") != IDEA_VERSION:
        raise CheckpointError(f"unsupported version {manifest.get('version')} in {path}")

    entries = sorted(manifest["specialists"], key=lambda e: e["index"])
    specialists = [load_checkpoint(path.parent / e["checkpoint"]) for e in entries]
    fusion = load_checkpoint(path.parent / manifest["fusion"])
    if not all(isinstance(m, HddaeModel) for m in specialists) or not isinstance(fusion, FusionCnnModel):
        raise CheckpointError(f"{path} references checkpoints of the wrong kind")
    return IdeaModel(
        specialists=specialists,
        fusion=fusion,
        analysis=AnalysisConfig.model_validate(manifest["analysis"]),
        labels=[e["condition"] for e in entries],
    )
