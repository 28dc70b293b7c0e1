#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from pathlib import Path

from DeReverb.core import MapperWrapper, read_wav, write_wav
from DeReverb.logger import LOGGER


def cmd_dereverb(model_path: Path, in_wav: Path, out_wav: Path) -> int:
    """Dereverberate one file with an HDDAE checkpoint or an IDEA manifest; returns the clip count."""
    mapper = MapperWrapper(model_path)
    y = read_wav(in_wav, sample_rate=mapper.analysis.sample_rate, pcm16=False)
    estimate = mapper.dereverb(y)
    clipped = write_wav(out_wav, estimate)
    LOGGER.info("Wrote %s (%.2fs, %d clipped samples)", out_wav, estimate.duration, clipped)
    return clipped
