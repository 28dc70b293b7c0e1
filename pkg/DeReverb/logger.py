#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

import logging
import os
from logging.handlers import RotatingFileHandler

LOG_FORMAT = (
    "[%(asctime)s - %(levelname)s] - %(name)s - "
    "%(filename)s:%(lineno)d - %(message)s"
)

formatter = logging.Formatter(LOG_FORMAT, datefmt="%d-%b-%y %H:%M:%S")

stream_handler = logging.StreamHandler()
stream_handler.setFormatter(formatter)

file_handler = RotatingFileHandler(
    os.getenv("LOG_FILE", "dereverb.log"),
    maxBytes=20 * 1024 * 1024,
    backupCount=1,
    encoding="utf-8",
    delay=True,
)
file_handler.setFormatter(formatter)

_level = os.getenv("LOG_LEVEL", "INFO").upper()
if not isinstance(logging.getLevelName(_level), int):
    _level = "INFO"

logging.basicConfig(
    level=_level,
    handlers=[stream_handler, file_handler],
)

# quiet down noisy libraries
for lib in ("PIL", "numba", "matplotlib"):
    logging.getLogger(lib).setLevel(logging.WARNING)

# selectively enable debug for these
# logging.getLogger("DeReverb.train").setLevel(logging.DEBUG)

LOGGER = logging.getLogger("DeReverb")


def configure(level: str, path: str) -> None:
    """Apply settings loaded from `.env` after import; the file handler has not opened yet."""
    logging.getLogger().setLevel(level)
    if file_handler.stream is None:
        file_handler.baseFilename = os.path.abspath(path)
