#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from __future__ import annotations

import numpy as np
import pytest

from DeReverb.core import AnalysisConfig, Waveform, dereverb_pipeline, lps, splice, stft
from DeReverb.core._errors import InvalidSignalError, ShapeMismatchError
from DeReverb.core._signal import ComplexSpectrogram, center_frame, istft, pad_to_frames, restore_spectrum


def _dft_oracle(x: np.ndarray, cfg: AnalysisConfig) -> np.ndarray:
    n = np.arange(cfg.frame_len)
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / cfg.frame_len)
    k = np.arange(cfg.n_bins)
    basis = np.exp(-2j * np.pi * ((k[:, None] * n[None, :]) % cfg.fft_size) / cfg.fft_size)
    n_frames = (len(x) - cfg.frame_len) // cfg.hop + 1
    frames = np.stack([x[i * cfg.hop : i * cfg.hop + cfg.frame_len] * window for i in range(n_frames)])
    return frames @ basis.T


def _interior_error(reference: np.ndarray, estimate: np.ndarray, margin: int) -> float:
    ref, est = reference[margin:-margin], estimate[margin:-margin]
    return float(np.linalg.norm(est - ref) / np.linalg.norm(ref))


def test_default_dimensions():
    cfg = AnalysisConfig()
    assert cfg.n_bins == 257
    assert cfg.spliced_dim == 2827


def test_one_second_of_silence_has_61_frames():
    spec = stft(Waveform(samples=np.zeros(16000), sample_rate=16000), AnalysisConfig())
    assert spec.values.shape == (61, 257)
    assert not np.any(spec.values)


def test_short_signal_is_padded_to_one_frame():
    spec = stft(Waveform(samples=np.ones(100), sample_rate=16000), AnalysisConfig())
    assert spec.n_frames == 1


def test_stft_matches_dft_oracle(noise_second: Waveform):
    cfg = AnalysisConfig()
    spec = stft(noise_second, cfg)
    np.testing.assert_allclose(spec.values, _dft_oracle(noise_second.samples, cfg), rtol=0, atol=1e-9)


def test_sinusoid_peaks_at_bin_32():
    t = np.arange(16000) / 16000
    spec = stft(Waveform(samples=np.sin(2 * np.pi * 1000.0 * t), sample_rate=16000), AnalysisConfig())
    assert np.all(np.argmax(np.abs(spec.values), axis=1) == 32)


@pytest.mark.parametrize("seed", range(50))
def test_round_trip_interior(seed: int):
    cfg = AnalysisConfig()
    x = np.random.default_rng(seed).standard_normal(16000)
    spec = stft(Waveform(samples=x, sample_rate=16000), cfg)
    rec = istft(spec, target_len=len(x))
    assert len(rec) == len(x)
    # stft alone stops at the last full frame, which ends at sample 15872
    covered = (spec.n_frames - 1) * cfg.hop + cfg.frame_len
    err = _interior_error(x[:covered], rec.samples[:covered], cfg.frame_len)
    assert err < 1e-6


def test_istft_of_zero_spectrogram_is_silent():
    cfg = AnalysisConfig()
    spec = ComplexSpectrogram(values=np.zeros((10, 257), dtype=complex), sample_rate=16000, cfg=cfg)
    assert not np.any(istft(spec, 3000).samples)


def test_scaled_magnitudes_scale_the_output():
    cfg = AnalysisConfig()
    t = np.arange(16000) / 16000
    x = 0.3 * np.sin(2 * np.pi * 440.0 * t)
    spec = stft(Waveform(samples=x, sample_rate=16000), cfg)
    doubled = ComplexSpectrogram(values=2.0 * spec.values, sample_rate=16000, cfg=cfg)
    out = istft(doubled, len(x)).samples
    covered = (spec.n_frames - 1) * cfg.hop + cfg.frame_len
    assert _interior_error(2.0 * x[:covered], out[:covered], cfg.frame_len) < 1e-3


def test_lps_values():
    cfg = AnalysisConfig(frame_len=4, hop=2, fft_size=4, context_radius=0)
    values = np.array([[0.0, 1.0, np.e]], dtype=complex)
    out = lps(ComplexSpectrogram(values=values, sample_rate=16000, cfg=cfg), cfg)
    np.testing.assert_allclose(out, [[np.log(1e-12), 0.0, 2.0]])


def test_splice_replicates_edges():
    rows = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    out = splice(rows, 1)
    expected = np.array([
        [1, 2, 1, 2, 3, 4],
        [1, 2, 3, 4, 5, 6],
        [3, 4, 5, 6, 5, 6],
    ], dtype=float)
    np.testing.assert_array_equal(out, expected)


def test_splice_single_frame_defaults():
    frame = np.arange(257, dtype=float)[None, :]
    out = splice(frame, 5)
    assert out.shape == (1, 2827)
    np.testing.assert_array_equal(out[0], np.tile(frame[0], 11))


def test_splice_without_context_is_identity():
    rows = np.random.default_rng(0).standard_normal((7, 5))
    np.testing.assert_array_equal(splice(rows, 0), rows)


def test_splice_rejects_empty():
    with pytest.raises(ShapeMismatchError):
        splice(np.zeros((0, 4)), 2)


def test_restore_inverts_lps(noise_second: Waveform):
    cfg = AnalysisConfig()
    spec = stft(noise_second, cfg)
    restored = restore_spectrum(lps(spec, cfg), spec)
    keep = np.abs(spec.values) ** 2 > cfg.log_floor
    np.testing.assert_allclose(restored.values[keep], spec.values[keep], rtol=0, atol=1e-9)


def test_restore_keeps_phase():
    cfg = AnalysisConfig(frame_len=4, hop=2, fft_size=4, context_radius=0)
    phase_src = ComplexSpectrogram(values=np.array([[1j, -1.0, 1.0]]), sample_rate=16000, cfg=cfg)
    np.testing.assert_array_equal(restore_spectrum(np.zeros((1, 3)), phase_src).values, phase_src.values)
    out = restore_spectrum(np.array([[2.0, 2.0, 2.0]]), phase_src).values
    assert out[0, 2] == pytest.approx(np.e)


def test_restore_shape_mismatch():
    cfg = AnalysisConfig()
    spec = ComplexSpectrogram(values=np.ones((3, 257), dtype=complex), sample_rate=16000, cfg=cfg)
    with pytest.raises(ShapeMismatchError):
        restore_spectrum(np.zeros((2, 257)), spec)


def test_identity_model_reconstructs(speech: Waveform):
    cfg = AnalysisConfig()
    out = dereverb_pipeline(speech, lambda rows: center_frame(rows, cfg), cfg)
    assert len(out) == len(speech)
    covered = (len(speech) - cfg.frame_len) // cfg.hop * cfg.hop + cfg.frame_len
    assert _interior_error(speech.samples[:covered], out.samples[:covered], cfg.frame_len) < 1e-3


def test_pipeline_keeps_the_samples_after_the_last_full_frame():
    cfg = AnalysisConfig()
    x = np.random.default_rng(17).standard_normal(16000)
    out = dereverb_pipeline(Waveform(samples=x, sample_rate=16000), lambda rows: center_frame(rows, cfg), cfg)
    # a full-frame analysis of 16000 samples stops at 15872
    np.testing.assert_allclose(out.samples[15872:], x[15872:], rtol=1e-9, atol=1e-9)
    assert _interior_error(x, out.samples, cfg.frame_len) < 1e-9


@pytest.mark.parametrize("n,padded", [(16000, 16128), (15872, 15872), (300, 300), (513, 768)])
def test_pad_to_frames(n: int, padded: int):
    w = pad_to_frames(Waveform(samples=np.ones(n), sample_rate=16000), AnalysisConfig())
    assert len(w) == padded
    assert not np.any(w.samples[n:])


def test_floor_model_outputs_silence(speech: Waveform):
    cfg = AnalysisConfig()
    out = dereverb_pipeline(speech, lambda rows: np.full((rows.shape[0], 257), np.log(cfg.log_floor)), cfg)
    assert len(out) == len(speech)
    assert np.sqrt(np.mean(out.samples**2)) < 1e-5


def test_pipeline_rejects_wrong_model_width(speech: Waveform):
    cfg = AnalysisConfig()
    with pytest.raises(ShapeMismatchError):
        dereverb_pipeline(speech, lambda rows: rows[:, :10], cfg)


def test_pipeline_on_silence_stays_finite():
    cfg = AnalysisConfig()
    y = Waveform(samples=np.zeros(8000), sample_rate=16000)
    out = dereverb_pipeline(y, lambda rows: center_frame(rows, cfg), cfg)
    assert np.all(np.isfinite(out.samples))
    assert np.max(np.abs(out.samples)) < 1e-3


@pytest.mark.parametrize("samples", [np.zeros(0), np.array([0.0, np.nan, 1.0])])
def test_invalid_waveforms(samples: np.ndarray):
    with pytest.raises(InvalidSignalError):
        stft(Waveform(samples=samples, sample_rate=16000), AnalysisConfig())
