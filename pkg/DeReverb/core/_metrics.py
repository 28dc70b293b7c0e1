#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

"""Objective measures: STOI, speech distortion index, log-spectral distance, and alignment."""

import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from pystoi import stoi as _pystoi
from scipy.signal import correlate, correlation_lags

from ._dataclass import AnalysisConfig, MetricRecord
from ._errors import MetricError, ShapeMismatchError
from ._signal import Waveform, stft

MAX_LAG_SECONDS = 0.5
SDI_FRAME = 256
SDI_ACTIVE_DB = 35.0
STOI_MIN_RATE = 10000
METRIC_NAMES = ("stoi", "sdi", "lsd")


def _same_rate(a: Waveform, b: Waveform) -> None:
    if a.sample_rate != b.sample_rate:
        raise MetricError(f"sample-rate mismatch: {a.sample_rate} Hz vs {b.sample_rate} Hz")


def _same_length(a: Waveform, b: Waveform) -> None:
    if len(a) != len(b):
        raise ShapeMismatchError(f"signals are not aligned: {len(a)} vs {len(b)} samples")


def estimate_lag(clean: Waveform, processed: Waveform, max_lag_s: float = MAX_LAG_SECONDS) -> int:
    """Delay of ``processed`` relative to ``clean`` (positive: processed lags) maximising cross-correlation."""
    _same_rate(clean, processed)
    xcorr = correlate(processed.samples, clean.samples, mode="full", method="fft")
    lags = correlation_lags(len(processed), len(clean), mode="full")
    window = np.abs(lags) <= int(round(max_lag_s * clean.sample_rate))
    return int(lags[window][np.argmax(xcorr[window])])


def align_trim(
    clean: Waveform, processed: Waveform, max_lag_s: float = MAX_LAG_SECONDS
) -> tuple[Waveform, Waveform]:
    clean.validate()
    processed.validate()
    lag = estimate_lag(clean, processed, max_lag_s)
    c, p = clean.samples, processed.samples
    if lag >= 0:
        p = p[lag:]
    else:
        c = c[-lag:]
    n = min(c.shape[0], p.shape[0])
    if n <= 0:
        raise MetricError(f"empty overlap after aligning at lag {lag}")
    return (
        Waveform(samples=c[:n], sample_rate=clean.sample_rate),
        Waveform(samples=p[:n], sample_rate=processed.sample_rate),
    )


def active_mask(clean: Waveform, frame: int = SDI_FRAME, range_db: float = SDI_ACTIVE_DB) -> np.ndarray:
    """Samples in frames whose energy lies within ``range_db`` of the loudest clean frame."""
    x = clean.samples
    n_frames = -(-x.shape[0] // frame)
    padded = np.pad(x, (0, n_frames * frame - x.shape[0]))
    energy = np.sum(padded.reshape(n_frames, frame) ** 2, axis=1)
    active = energy >= energy.max() * 10.0 ** (-range_db / 10.0)
    return np.repeat(active, frame)[: x.shape[0]]


def sdi(clean: Waveform, processed: Waveform) -> float:
    """Residual energy over clean energy, restricted to speech-active samples."""
    _same_rate(clean, processed)
    _same_length(clean, processed)
    if not np.sum(clean.samples**2) > 0:
        raise MetricError("clean reference has zero energy")
    mask = active_mask(clean)
    s = clean.samples[mask]
    residual = processed.samples[mask] - s
    return float(np.sum(residual * residual) / np.sum(s * s))


def stoi(clean: Waveform, processed: Waveform) -> float:
    """Short-time objective intelligibility; inputs are resampled to 10 kHz internally."""
    _same_rate(clean, processed)
    _same_length(clean, processed)
    if clean.sample_rate < STOI_MIN_RATE:
        raise MetricError(f"sample rate {clean.sample_rate} Hz is not supported (need >= {STOI_MIN_RATE})")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        score = _pystoi(clean.samples, processed.samples, clean.sample_rate, extended=False)
    if any("Not enough STFT frames" in str(w.message) for w in caught):
        raise MetricError("signal too short for STOI: fewer than 384 ms of speech after silence removal")
    return float(score)


def lsd(clean: Waveform, processed: Waveform, cfg: Optional[AnalysisConfig] = None) -> float:
    """Mean over frames of the RMS (over bins) dB difference between power spectra."""
    cfg = cfg or AnalysisConfig()
    _same_rate(clean, processed)
    _same_length(clean, processed)
    p_clean = np.maximum(np.abs(stft(clean, cfg).values) ** 2, cfg.log_floor)
    p_proc = np.maximum(np.abs(stft(processed, cfg).values) ** 2, cfg.log_floor)
    diff = 10.0 * np.log10(p_proc / p_clean)
    return float(np.mean(np.sqrt(np.mean(diff * diff, axis=1))))


def measure(
    clean: Waveform,
    processed: Waveform,
    utterance_id: str,
    condition: float,
    model: str,
    cfg: Optional[AnalysisConfig] = None,
) -> MetricRecord:
    c, p = align_trim(clean, processed)
    return MetricRecord(
        utterance_id=utterance_id,
        condition=condition,
        model=model,
        stoi=stoi(c, p),
        sdi=sdi(c, p),
        lsd=lsd(c, p, cfg),
    )


@dataclass
class MetricReport:
    """Per-utterance records with arithmetic-mean aggregates by model and condition."""

    records: list[MetricRecord] = field(default_factory=list)

    def extend(self, records: Iterable[MetricRecord]) -> "MetricReport":
        self.records.extend(records)
        return self

    def models(self) -> list[str]:
        return list(dict.fromkeys(r.model for r in self.records))

    def conditions(self) -> list[float]:
        return sorted({r.condition for r in self.records})

    def mean(self, model: str, condition: Optional[float] = None) -> dict[str, float]:
        rows = [
            r for r in self.records
            if r.model == model and (condition is None or abs(r.condition - condition) < 1e-9)
        ]
        if not rows:
            return {name: float("nan") for name in METRIC_NAMES}
        return {name: float(np.mean([getattr(r, name) for r in rows])) for name in METRIC_NAMES}

    def table(self) -> dict[str, dict[float, dict[str, float]]]:
        """model -> condition -> metric -> mean; key -1 holds the mean over every utterance of the model."""
        grouped: dict[str, dict[float, dict[str, float]]] = defaultdict(dict)
        for model in self.models():
            per_condition = {t: self.mean(model, t) for t in self.conditions()}
            per_condition[-1.0] = self.mean(model)
            grouped[model] = per_condition
        return dict(grouped)
