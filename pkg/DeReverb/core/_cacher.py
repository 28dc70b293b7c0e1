#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

import threading
from pathlib import Path
from typing import Union

import numpy as np
from cachetools import LRUCache

from ._config import config
from ._errors import DataError


class FeatureCache:
    """LRU of per-utterance LPS pairs stored as ``(2, frames, bins)`` arrays: clean, then reverberant."""

    def __init__(self, maxsize: int):
        self._cache: LRUCache[str, np.ndarray] = LRUCache(maxsize=maxsize)
        self._lock = threading.Lock()

    @staticmethod
    def save(path: Union[str, Path], clean_lps: np.ndarray, reverb_lps: np.ndarray) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.save(path, np.stack([clean_lps, reverb_lps]).astype(np.float64), allow_pickle=False)

    def get(self, path: Union[str, Path]) -> np.ndarray:
        key = str(path)
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        try:
            pair = np.load(key, allow_pickle=False)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read cached features {key}: {exc}") from exc
        if pair.ndim != 3 or pair.shape[0] != 2:
            raise DataError(f"cached features {key} have shape {pair.shape}, expected (2, frames, bins)")
        pair.setflags(write=False)
        with self._lock:
            self._cache[key] = pair
        return pair

    def clear(self) -> None:
        with self._lock:
            self._cache.clear()

    def __len__(self) -> int:
        return len(self._cache)


feature_cache: FeatureCache = FeatureCache(config.FEATURE_CACHE_SIZE)
