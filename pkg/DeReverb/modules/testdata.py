#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from pathlib import Path

import aiofiles

from DeReverb.core import config, pseudo_speech, write_wav
from DeReverb.logger import LOGGER
from DeReverb.modules.utils import run_limited

DESK_TOML = """\
# Desk-scale experiment over the generated pseudo-speech corpus.
seed = {seed}
output_dir = "run"
roster = ["HDDAE_A(3)", "HDDAE_0.3(3)", "HDDAE_0.6(3)", "HDDAE_0.9(3)", "HDDAE_A(6)", "IDEA_A(6)"]

[corpus]
train_dir = "corpus/train"
test_dir = "corpus/test"

[rirs]
train_t60 = [0.3, 0.6, 0.9]
test_t60 = [0.3, 0.4, 0.6, 0.7, 0.9, 1.0]
per_train_t60 = 1
per_test_t60 = 1

[hddae]
hidden = 512

[cnn]
conv_channels = 8
fc_hidden = 512

[train.hddae]
epochs = 40
minibatch_size = 128
learning_rate = 5e-4
patience = 6

[train.cnn]
epochs = 40
minibatch_size = 128
learning_rate = 5e-4
patience = 6
"""


def _write_utterance(path: Path, duration: float, seed: int) -> Path:
    write_wav(path, pseudo_speech(duration, seed=seed))
    return path


async def cmd_gen_testdata(
    out: Path,
    n_train: int = 20,
    n_test: int = 5,
    duration: float = 3.0,
    seed: int = 1234,
) -> Path:
    """Write a seeded pseudo-speech corpus under ``out/corpus`` and a matching ``out/desk.toml``."""
    jobs = [(out / "corpus" / "train" / f"utt_{i:03d}.wav", duration, seed + i) for i in range(n_train)]
    jobs += [
        (out / "corpus" / "test" / f"utt_{i:03d}.wav", duration, seed + n_train + i) for i in range(n_test)
    ]
    await run_limited(config.WORKERS, _write_utterance, jobs)

    path = out / "desk.toml"
    async with aiofiles.open(path, "w", encoding="utf-8") as fh:
        await fh.write(DESK_TOML.format(seed=seed))
    LOGGER.info("Generated %d train / %d test utterances and %s", n_train, n_test, path)
    return path
