#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from DeReverb.core import AnalysisConfig, lps, read_wav, stft
from DeReverb.logger import LOGGER
from DeReverb.modules.utils import write_csv


def render_png(features: np.ndarray, path: Path) -> Path:
    """Grey-scale image, time left to right, low frequencies at the bottom."""
    lo, hi = float(features.min()), float(features.max())
    scaled = np.zeros_like(features) if hi <= lo else (features - lo) / (hi - lo)
    pixels = np.ascontiguousarray(np.flipud(scaled.T * 255.0).round().astype(np.uint8))
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels).save(path)
    return path


async def cmd_spectrogram(
    in_wav: Path,
    out_csv: Path,
    png: Optional[Path] = None,
    cfg: Optional[AnalysisConfig] = None,
) -> np.ndarray:
    """Write the frames x bins LPS matrix of ``in_wav`` as CSV (and optionally a PNG)."""
    cfg = cfg or AnalysisConfig()
    w = read_wav(in_wav, sample_rate=cfg.sample_rate, pcm16=False)
    features = lps(stft(w, cfg), cfg)
    header = [f"bin_{k}" for k in range(features.shape[1])]
    await write_csv(out_csv, header, features.tolist())
    if png is not None:
        render_png(features, png)
    LOGGER.info("Spectrogram of %s: %d frames x %d bins -> %s", in_wav, *features.shape, out_csv)
    return features
