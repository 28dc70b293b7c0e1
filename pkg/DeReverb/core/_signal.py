#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

"""Spectral-mapping front end and back end: STFT, LPS, context splicing, restoration."""

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from ._dataclass import AnalysisConfig
from ._errors import InvalidSignalError, ShapeMismatchError

FrameMapper = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=np.float64).reshape(-1))
        if self.sample_rate <= 0:
            raise InvalidSignalError(f"sample rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def validate(self) -> "Waveform":
        if len(self) == 0:
            raise InvalidSignalError("empty waveform")
        if not np.all(np.isfinite(self.samples)):
            raise InvalidSignalError("waveform contains non-finite samples")
        return self


@dataclass(frozen=True, eq=False)
class ComplexSpectrogram:
    values: np.ndarray
    sample_rate: int
    cfg: AnalysisConfig

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def validate(self) -> "ComplexSpectrogram":
        if self.values.ndim != 2 or self.values.shape[1] != self.cfg.n_bins:
            raise ShapeMismatchError(
                f"spectrogram shape {self.values.shape} does not match {self.cfg.n_bins} bins"
            )
        if self.values.shape[0] < 1:
            raise ShapeMismatchError("spectrogram has no frames")
        return self


def analysis_window(cfg: AnalysisConfig) -> np.ndarray:
    # periodic Hann
    return get_window("hann", cfg.frame_len, fftbins=True)


def frame_count(n_samples: int, cfg: AnalysisConfig) -> int:
    if n_samples <= cfg.frame_len:
        return 1
    return (n_samples - cfg.frame_len) // cfg.hop + 1


def pad_to_frames(w: Waveform, cfg: AnalysisConfig) -> Waveform:
    """Zero-pad the tail so a final partial frame covers the last samples."""
    n = len(w)
    if n <= cfg.frame_len:
        return w
    n_frames = -(-(n - cfg.frame_len) // cfg.hop) + 1
    needed = (n_frames - 1) * cfg.hop + cfg.frame_len
    if needed == n:
        return w
    return Waveform(samples=np.pad(w.samples, (0, needed - n)), sample_rate=w.sample_rate)


def stft(w: Waveform, cfg: AnalysisConfig) -> ComplexSpectrogram:
    w.validate()
    n_frames = frame_count(len(w), cfg)
    needed = (n_frames - 1) * cfg.hop + cfg.frame_len
    x = w.samples
    if x.shape[0] < needed:
        x = np.pad(x, (0, needed - x.shape[0]))
    frames = sliding_window_view(x[:needed], cfg.frame_len)[:: cfg.hop]
    values = np.fft.rfft(frames * analysis_window(cfg), n=cfg.fft_size, axis=1)
    return ComplexSpectrogram(values=values, sample_rate=w.sample_rate, cfg=cfg)


def istft(spec: ComplexSpectrogram, target_len: int) -> Waveform:
    spec.validate()
    cfg = spec.cfg
    window = analysis_window(cfg)
    frames = np.fft.irfft(spec.values, n=cfg.fft_size, axis=1)[:, : cfg.frame_len] * window

    n_out = (spec.n_frames - 1) * cfg.hop + cfg.frame_len
    signal = np.zeros(n_out)
    norm = np.zeros(n_out)
    win_sq = window**2
    for i, frame in enumerate(frames):
        start = i * cfg.hop
        signal[start : start + cfg.frame_len] += frame
        norm[start : start + cfg.frame_len] += win_sq

    # the floor only bites in the first/last hop, where the window power vanishes
    signal /= np.maximum(norm, 1e-3)

    if n_out >= target_len:
        signal = signal[:target_len]
    else:
        signal = np.pad(signal, (0, target_len - n_out))
    return Waveform(samples=signal, sample_rate=spec.sample_rate)


def lps(spec: ComplexSpectrogram, cfg: AnalysisConfig) -> np.ndarray:
    """Natural log of the power spectrum, floored at ``cfg.log_floor``."""
    spec.validate()
    power = np.abs(spec.values) ** 2
    return np.log(np.maximum(power, cfg.log_floor))


def splice(features: np.ndarray, context: int) -> np.ndarray:
    """Concatenate each frame with its ``context`` neighbours on both sides.

    Frames past either edge replicate the first or last frame, so row ``i`` holds
    ``[Y[i-M], ..., Y[i], ..., Y[i+M]]`` flattened in that order.
    """
    features = np.asarray(features)
    if features.ndim != 2 or features.shape[0] < 1:
        raise ShapeMismatchError(f"expected a non-empty frames x bins matrix, got {features.shape}")
    if context == 0:
        return features.copy()

    n_frames, n_bins = features.shape
    padded = np.pad(features, ((context, context), (0, 0)), mode="edge")
    windows = sliding_window_view(padded, 2 * context + 1, axis=0)
    return np.ascontiguousarray(windows.transpose(0, 2, 1)).reshape(n_frames, (2 * context + 1) * n_bins)


def center_frame(spliced: np.ndarray, cfg: AnalysisConfig) -> np.ndarray:
    m, b = cfg.context_radius, cfg.n_bins
    return spliced[:, m * b : (m + 1) * b]


def restore_spectrum(est_lps: np.ndarray, phase_src: ComplexSpectrogram) -> ComplexSpectrogram:
    phase_src.validate()
    est_lps = np.asarray(est_lps, dtype=np.float64)
    if est_lps.shape != phase_src.values.shape:
        raise ShapeMismatchError(
            f"estimated LPS {est_lps.shape} does not match spectrogram {phase_src.values.shape}"
        )
    magnitude = np.abs(phase_src.values)
    phasor = np.ones_like(phase_src.values)
    nonzero = magnitude > 0
    phasor[nonzero] = phase_src.values[nonzero] / magnitude[nonzero]
    values = np.exp(est_lps / 2.0) * phasor
    return ComplexSpectrogram(values=values, sample_rate=phase_src.sample_rate, cfg=phase_src.cfg)


def dereverb_pipeline(y: Waveform, model_fn: FrameMapper, cfg: AnalysisConfig) -> Waveform:
    """STFT -> LPS -> splice -> model -> restore with the reverberant phase -> ISTFT.

    The tail is padded to a frame boundary first, so every input sample is
    resynthesised and the output is trimmed back to ``len(y)``.
    """
    spec = stft(pad_to_frames(y.validate(), cfg), cfg)
    spliced = splice(lps(spec, cfg), cfg.context_radius)
    estimate = np.asarray(model_fn(spliced), dtype=np.float64)
    if estimate.shape != spec.values.shape:
        raise ShapeMismatchError(
            f"model produced {estimate.shape}, expected {spec.values.shape}"
        )
    return istft(restore_spectrum(estimate, spec), target_len=len(y))
