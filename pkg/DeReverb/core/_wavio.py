#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from pathlib import Path
from typing import Optional, Union

import numpy as np
import soundfile as sf
from scipy.io import wavfile

from DeReverb.logger import LOGGER
from ._errors import WavFormatError
from ._signal import Waveform

PathLike = Union[str, Path]


def read_wav(path: PathLike, sample_rate: Optional[int] = 16000, pcm16: bool = True) -> Waveform:
    """Load a mono WAV; the corpus is never resampled, so a rate mismatch is an error."""
    path = Path(path)
    try:
        info = sf.info(str(path))
        data, rate = sf.read(str(path), dtype="float64", always_2d=True)
    except (RuntimeError, OSError) as exc:
        raise WavFormatError(f"unreadable WAV {path}: {exc}") from exc

    if info.format != "WAV":
        raise WavFormatError(f"{path} is {info.format}, not a RIFF WAV")
    if pcm16 and info.subtype != "PCM_16":
        raise WavFormatError(f"{path} is {info.subtype}, expected 16-bit PCM")
    if data.shape[1] != 1:
        raise WavFormatError(f"{path} has {data.shape[1]} channels, expected mono")
    if sample_rate is not None and rate != sample_rate:
        raise WavFormatError(f"{path} is sampled at {rate} Hz, expected {sample_rate} Hz")
    if data.shape[0] == 0:
        raise WavFormatError(f"{path} contains no samples")
    return Waveform(samples=data[:, 0], sample_rate=rate)


def write_wav(path: PathLike, w: Waveform, subtype: str = "PCM_16") -> int:
    """Write ``w`` clipped to [-1, 1]; returns how many samples were clipped."""
    path = Path(path)
    samples = w.samples
    clipped = int(np.count_nonzero(np.abs(samples) > 1.0))
    if clipped and subtype.startswith("PCM"):
        LOGGER.warning("%s: clipped %d of %d samples to [-1, 1]", path.name, clipped, len(w))
        samples = np.clip(samples, -1.0, 1.0)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        if subtype == "FLOAT":
            # libsndfile adds a PEAK chunk stamped with the write time
            wavfile.write(path, w.sample_rate, samples.astype(np.float32))
        else:
            sf.write(str(path), samples, w.sample_rate, subtype=subtype, format="WAV")
    except (RuntimeError, OSError, ValueError) as exc:
        raise WavFormatError(f"cannot write WAV {path}: {exc}") from exc
    return clipped if subtype.startswith("PCM") else 0
