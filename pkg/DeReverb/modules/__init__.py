#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from .dereverb import cmd_dereverb
from .evaluate import cmd_evaluate
from .prepare import cmd_prepare
from .spectrogram import cmd_spectrogram
from .testdata import cmd_gen_testdata
from .train import cmd_train

__all__ = [
    "cmd_dereverb",
    "cmd_evaluate",
    "cmd_gen_testdata",
    "cmd_prepare",
    "cmd_spectrogram",
    "cmd_train",
]
