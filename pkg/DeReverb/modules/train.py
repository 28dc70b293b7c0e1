#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

import asyncio
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from DeReverb.core import (
    AnalysisConfig,
    CnnSpec,
    ConditionPartition,
    ExperimentConfig,
    FeatureNormalizer,
    HddaeSpec,
    IdeaModel,
    ManifestRecord,
    ManifestStore,
    TrainHistory,
    build_hddae,
    config,
    config_hash,
    ensemble_prepare,
    feature_cache,
    parse_model_id,
    save_checkpoint,
    save_idea,
    splice,
    train,
    train_fusion,
)
from DeReverb.core._errors import DataError, UnknownModelError
from DeReverb.logger import LOGGER
from DeReverb.modules.utils import history_rows, write_csv


def load_pairs(root: Path, records: Sequence[ManifestRecord], analysis: AnalysisConfig) -> tuple[np.ndarray, np.ndarray]:
    """Spliced reverberant LPS rows and their clean LPS targets, concatenated in record order."""
    if not records:
        raise DataError("no manifest records selected for training")
    inputs, targets = [], []
    for record in records:
        pair = feature_cache.get(root / record.feature_path)
        targets.append(pair[0])
        inputs.append(splice(pair[1], analysis.context_radius))
    return np.concatenate(inputs), np.concatenate(targets)


def _hddae_spec(cfg: ExperimentConfig, analysis: AnalysisConfig, depth: int) -> HddaeSpec:
    return HddaeSpec.model_validate({
        **cfg.hddae.model_dump(),
        "n_layers": depth,
        "input_dim": analysis.spliced_dim,
        "output_dim": analysis.n_bins,
    })


async def _write_history(path: Path, history: TrainHistory) -> Path:
    return await write_csv(path, ("epoch", "train_loss", "val_loss"), history_rows(history.train_loss, history.val_loss))


async def cmd_train(
    cfg: ExperimentConfig,
    model_id: str,
    out: Optional[Path] = None,
    seed: Optional[int] = None,
) -> list[Path]:
    """Train one roster entry on the prepared dataset; returns the written artifact paths."""
    mid = parse_model_id(model_id)
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    root = Path(out or cfg.output_dir)
    manifest = await ManifestStore(root).load()
    if manifest.config_hash != config_hash(cfg):
        LOGGER.warning("Config differs from the one %s was prepared with", root)

    analysis = manifest.analysis
    labels = manifest.train_t60
    records = manifest.split("train")
    partition = ConditionPartition.from_records(records, labels)
    moments = np.load(root / manifest.moments_path, allow_pickle=False)
    out_dir = mid.artifact_dir(root)
    hddae_cfg = cfg.train.hddae.model_copy(update={"seed": cfg.seed + cfg.train.hddae.seed})

    if mid.kind == "hddae":
        if mid.condition is None:
            selected = list(range(len(labels)))
        else:
            label = partition.label_for(mid.condition)
            if label is None:
                raise UnknownModelError(f"{mid}: T60 {mid.condition:g} is not one of the training conditions {labels}")
            selected = [labels.index(label)]
        wanted = {labels[i] for i in selected}
        subset = [r for r in records if partition.assignment[r.utterance_id] in wanted]
        LOGGER.info("%s: training on %d utterances (T60 %s)", mid, len(subset), sorted(wanted))
        inputs, targets = await asyncio.to_thread(load_pairs, root, subset, analysis)

        model = build_hddae(_hddae_spec(cfg, analysis, mid.depth), hddae_cfg.seed)
        model.normalizer = FeatureNormalizer.from_lps_moments(moments[selected].sum(axis=0), analysis.context_radius)
        result = await asyncio.to_thread(train, model, inputs, targets, hddae_cfg, str(mid))
        result.model.meta.update(analysis=analysis.model_dump(mode="json"), model_id=str(mid))
        path = save_checkpoint(result.model, mid.artifact(root))
        history = await _write_history(out_dir / "history.csv", result.history)
        return [path, history]

    groups = {}
    for label in labels:
        subset = [r for r in records if partition.assignment[r.utterance_id] == label]
        groups[label] = await asyncio.to_thread(load_pairs, root, subset, analysis)
    normalizers = [
        FeatureNormalizer.from_lps_moments(moments[i], analysis.context_radius) for i in range(len(labels))
    ]
    spec = _hddae_spec(cfg, analysis, mid.specialist_depth)
    LOGGER.info("%s: preparing %d specialists of depth %d", mid, len(labels), spec.n_layers)
    specialists = await asyncio.to_thread(ensemble_prepare, groups, spec, hddae_cfg, config.WORKERS, normalizers)

    inputs = np.concatenate([x for x, _ in groups.values()])
    targets = np.concatenate([y for _, y in groups.values()])
    cnn_spec = CnnSpec.model_validate({**cfg.cnn.model_dump(), "n_conv": mid.fusion_depth - 1})
    cnn_cfg = cfg.train.cnn.model_copy(update={"seed": cfg.seed + cfg.train.cnn.seed})
    LOGGER.info("%s: integrating with a %d-conv fusion CNN", mid, cnn_spec.n_conv)
    fusion = await asyncio.to_thread(
        train_fusion, [r.model for r in specialists], inputs, targets, cnn_spec, cnn_cfg
    )
    fusion.model.meta.update(model_id=str(mid))

    idea = IdeaModel(
        specialists=[r.model for r in specialists],
        fusion=fusion.model,
        analysis=analysis,
        labels=list(labels),
    )
    paths = [save_idea(idea, out_dir, manifest.config_hash)]
    for index, result in enumerate(specialists):
        paths.append(await _write_history(out_dir / f"specialist_{index}_history.csv", result.history))
    paths.append(await _write_history(out_dir / "fusion_history.csv", fusion.history))
    return paths
