#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

"""Seeded pseudo-speech: formant-filtered glottal pulse trains with pauses and fricatives."""

import numpy as np
from scipy.signal import butter, lfilter, sosfilt

from ._signal import Waveform

FORMANT_RANGES = ((300.0, 800.0), (900.0, 2200.0), (2400.0, 3200.0))
FORMANT_BANDWIDTHS = (80.0, 120.0, 180.0)


def _resonator(freq: float, bandwidth: float, fs: int) -> tuple[np.ndarray, np.ndarray]:
    r = np.exp(-np.pi * bandwidth / fs)
    theta = 2.0 * np.pi * freq / fs
    a = np.array([1.0, -2.0 * r * np.cos(theta), r * r])
    return np.array([a.sum()]), a


def _voiced(n: int, fs: int, rng: np.random.Generator) -> np.ndarray:
    f0 = rng.uniform(90.0, 220.0)
    t = np.arange(n) / fs
    contour = f0 * (1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(2.0, 5.0) * t) - 0.1 * t / max(t[-1], 1e-3))
    phase = np.cumsum(contour / fs)
    pulses = np.diff(np.floor(phase), prepend=0.0)
    excitation = pulses + 0.02 * rng.standard_normal(n)

    out = excitation
    for (lo, hi), bw in zip(FORMANT_RANGES, FORMANT_BANDWIDTHS):
        b, a = _resonator(rng.uniform(lo, hi), bw, fs)
        out = lfilter(b, a, out)
    return out


def _fricative(n: int, fs: int, rng: np.random.Generator) -> np.ndarray:
    sos = butter(4, min(rng.uniform(2500.0, 4500.0), 0.45 * fs), btype="highpass", fs=fs, output="sos")
    return 0.3 * sosfilt(sos, rng.standard_normal(n))


def pseudo_speech(duration_s: float, sample_rate: int = 16000, seed: int = 0) -> Waveform:
    """Syllable-like bursts (150-350 ms) separated by 50-200 ms pauses, peak-normalised to 0.5."""
    rng = np.random.default_rng(seed)
    n_total = int(round(duration_s * sample_rate))
    out = np.zeros(n_total)
    pos = int(rng.integers(0, int(0.1 * sample_rate)))
    while pos < n_total:
        n = min(int(rng.uniform(0.15, 0.35) * sample_rate), n_total - pos)
        if n < 32:
            break
        burst = _fricative(n, sample_rate, rng) if rng.random() < 0.2 else _voiced(n, sample_rate, rng)
        envelope = np.hanning(n) ** 0.5
        burst = burst * envelope / (np.max(np.abs(burst)) + 1e-12)
        out[pos : pos + n] += rng.uniform(0.4, 1.0) * burst
        pos += n + int(rng.uniform(0.05, 0.2) * sample_rate)

    peak = np.max(np.abs(out))
    if peak > 0:
        out *= 0.5 / peak
    return Waveform(samples=out, sample_rate=sample_rate)


def speech_shaped_noise(duration_s: float, sample_rate: int = 16000, seed: int = 0) -> Waveform:
    """Stationary noise with a speech-like long-term spectral tilt."""
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate))
    sos = butter(2, [100.0, 4000.0], btype="bandpass", fs=sample_rate, output="sos")
    noise = sosfilt(sos, rng.standard_normal(n))
    return Waveform(samples=0.5 * noise / np.max(np.abs(noise)), sample_rate=sample_rate)
