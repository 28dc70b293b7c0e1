#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from DeReverb.core import (
    DatasetManifest,
    ExperimentConfig,
    FeatureCache,
    ImpulseResponse,
    ManifestRecord,
    ManifestStore,
    RirConfig,
    RirRecord,
    Waveform,
    config,
    config_hash,
    convolve,
    generate_rir,
    lps,
    measure_t60,
    place_randomly,
    read_wav,
    stft,
    write_wav,
)
from DeReverb.core._errors import DataError, DecayRangeError, EmptyDatasetError
from DeReverb.logger import LOGGER
from DeReverb.modules.utils import run_limited, sec_to_min

PEAK_LIMIT = 0.99
TEST_SEED_OFFSET = 100_000


@dataclass(frozen=True)
class RirJob:
    rir_id: str
    room_id: int
    t60: float
    split: str
    seed: int


def plan_rirs(cfg: ExperimentConfig) -> list[RirJob]:
    """Train RIR ``r`` goes to room ``r % rooms``; test T60 ``k`` (copy ``j``) to room ``(k + j) % rooms``."""
    n_rooms = len(cfg.rooms)
    jobs = []
    per_train = cfg.rirs.per_train_t60
    for ti, t60 in enumerate(cfg.rirs.train_t60):
        for j in range(per_train):
            r = ti * per_train + j
            jobs.append(RirJob(f"train_t{t60:g}_r{j}", r % n_rooms, t60, "train", cfg.seed + r))
    for k, t60 in enumerate(cfg.rirs.test_t60):
        for j in range(cfg.rirs.per_test_t60):
            seed = cfg.seed + TEST_SEED_OFFSET + k * cfg.rirs.per_test_t60 + j
            jobs.append(RirJob(f"test_t{t60:g}_r{j}", (k + j) % n_rooms, t60, "test", seed))
    return jobs


def synth_rir(job: RirJob, cfg: ExperimentConfig, root: Path) -> tuple[RirRecord, ImpulseResponse]:
    room = cfg.rooms[job.room_id]
    if not room.is_placed:
        room = place_randomly(room.dims, job.seed)
    rir_cfg = RirConfig(
        t60=job.t60,
        sample_rate=cfg.analysis.sample_rate,
        sound_speed=cfg.rirs.sound_speed,
        decay_model=cfg.rirs.decay_model,
        calibrate=cfg.rirs.calibrate,
    )
    rir = generate_rir(room, rir_cfg)
    try:
        measured: Optional[float] = measure_t60(rir)
    except DecayRangeError as exc:
        LOGGER.warning("RIR %s: %s", job.rir_id, exc)
        measured = None

    rel = f"rirs/{job.rir_id}.wav"
    write_wav(root / rel, Waveform(samples=rir.taps, sample_rate=rir.sample_rate), subtype="FLOAT")
    LOGGER.debug(
        "RIR %s room %d target %.2fs measured %s beta %.4f",
        job.rir_id, job.room_id, job.t60, measured, rir.beta,
    )
    record = RirRecord(
        rir_id=job.rir_id,
        room_id=job.room_id,
        t60=job.t60,
        path=rel,
        source=room.source,
        receiver=room.receiver,
        measured_t60=measured,
        beta=rir.beta,
    )
    return record, rir


def _moments(features: np.ndarray) -> np.ndarray:
    return np.stack([
        np.full(features.shape[1], float(features.shape[0])),
        features.sum(axis=0),
        (features * features).sum(axis=0),
    ])


def reverberate(
    clean: Waveform,
    clean_path: Path,
    rir_record: RirRecord,
    rir: ImpulseResponse,
    split: str,
    cfg: ExperimentConfig,
    root: Path,
) -> tuple[ManifestRecord, np.ndarray]:
    """Convolve one utterance with one RIR, write the WAV and LPS pair; returns the record and LPS moments."""
    uid = f"{clean_path.stem}__{rir_record.rir_id}"
    y = convolve(clean, rir)
    peak = float(np.max(np.abs(y.samples)))
    if peak > PEAK_LIMIT:
        LOGGER.warning("%s: reverberant peak %.3f rescaled to %.2f", uid, peak, PEAK_LIMIT)
        y = Waveform(samples=y.samples * (PEAK_LIMIT / peak), sample_rate=y.sample_rate)

    reverb_rel = f"reverb/{split}/{uid}.wav"
    feature_rel = f"features/{split}/{uid}.npy"
    write_wav(root / reverb_rel, y)
    clean_lps = lps(stft(clean, cfg.analysis), cfg.analysis)
    reverb_lps = lps(stft(y, cfg.analysis), cfg.analysis)
    FeatureCache.save(root / feature_rel, clean_lps, reverb_lps)

    record = ManifestRecord(
        utterance_id=uid,
        clean_path=str(clean_path),
        reverb_path=reverb_rel,
        feature_path=feature_rel,
        room_id=rir_record.room_id,
        rir_id=rir_record.rir_id,
        t60=rir_record.t60,
        split=split,
        n_frames=clean_lps.shape[0],
    )
    return record, np.stack([_moments(clean_lps), _moments(reverb_lps)])


def list_corpus(directory: Path) -> list[Path]:
    files = sorted(directory.glob("*.wav"))
    if not files:
        raise EmptyDatasetError(f"no .wav files in {directory}")
    return files


async def cmd_prepare(cfg: ExperimentConfig, out: Optional[Path] = None, seed: Optional[int] = None) -> DatasetManifest:
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    root = Path(out or cfg.output_dir)
    store = ManifestStore(root)
    started = time.monotonic()

    rate = cfg.analysis.sample_rate
    train_files = list_corpus(cfg.corpus.train_dir)
    test_files = list_corpus(cfg.corpus.test_dir)
    clean = await run_limited(config.WORKERS, read_wav, [(p, rate) for p in train_files + test_files])
    LOGGER.info("Loaded %d train and %d test clean utterances", len(train_files), len(test_files))

    jobs = plan_rirs(cfg)
    synthesized = await run_limited(config.WORKERS, synth_rir, [(job, cfg, root) for job in jobs])
    LOGGER.info("Generated %d RIRs", len(synthesized))

    work = []
    for (rir_record, rir), job in zip(synthesized, jobs):
        files = train_files if job.split == "train" else test_files
        offset = 0 if job.split == "train" else len(train_files)
        for i, path in enumerate(files):
            work.append((clean[offset + i], path, rir_record, rir, job.split, cfg, root))
    results = await run_limited(config.WORKERS, reverberate, work)

    # per training condition, clean then reverberant (count, sum, sum of squares) per bin
    moments = np.zeros((len(cfg.rirs.train_t60), 2, 3, cfg.analysis.n_bins))
    records = []
    for record, m in results:
        records.append(record)
        if record.split == "train":
            moments[cfg.rirs.train_t60.index(record.t60)] += m
    manifest = DatasetManifest(
        config_hash=config_hash(cfg),
        analysis=cfg.analysis,
        train_t60=cfg.rirs.train_t60,
        test_t60=cfg.rirs.test_t60,
        rirs=[r for r, _ in synthesized],
        records=sorted(records, key=lambda r: (r.split != "train", r.utterance_id)),
    )
    (root / manifest.moments_path).parent.mkdir(parents=True, exist_ok=True)
    np.save(root / manifest.moments_path, moments, allow_pickle=False)

    expected_train = len(train_files) * len(cfg.rirs.train_t60) * cfg.rirs.per_train_t60
    expected_test = len(test_files) * len(cfg.rirs.test_t60) * cfg.rirs.per_test_t60
    if (len(manifest.split("train")), len(manifest.split("test"))) != (expected_train, expected_test):
        raise DataError("prepared record counts do not match the configured corpus")

    manifest = await store.save(manifest)
    LOGGER.info("Prepared %s in %s", root, sec_to_min(time.monotonic() - started))
    return manifest
