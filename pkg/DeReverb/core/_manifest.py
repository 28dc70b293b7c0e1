#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

import hashlib
from pathlib import Path
from typing import Union

import aiofiles
import ujson
from pydantic import ValidationError

from DeReverb.logger import LOGGER
from ._dataclass import DatasetManifest
from ._errors import DataError

MANIFEST_NAME = "manifest.json"


def content_hash(manifest: DatasetManifest) -> str:
    payload = manifest.model_dump(mode="json", exclude={"content_hash"})
    return hashlib.sha256(ujson.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


class ManifestStore:
    """Reads and writes the dataset manifest under a run directory."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.path = self.root / MANIFEST_NAME

    def exists(self) -> bool:
        return self.path.is_file()

    async def save(self, manifest: DatasetManifest) -> DatasetManifest:
        manifest = manifest.model_copy(update={"content_hash": content_hash(manifest)})
        self.root.mkdir(parents=True, exist_ok=True)
        text = ujson.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True)
        async with aiofiles.open(self.path, "w", encoding="utf-8") as fh:
            await fh.write(text)
        LOGGER.info(
            "Manifest written: %d train / %d test records, hash %s",
            len(manifest.split("train")), len(manifest.split("test")), manifest.content_hash[:12],
        )
        return manifest

    async def load(self) -> DatasetManifest:
        if not self.exists():
            raise DataError(f"no prepared dataset at {self.root} (run `prepare` first)")
        try:
            async with aiofiles.open(self.path, "r", encoding="utf-8") as fh:
                raw = ujson.loads(await fh.read())
            manifest = DatasetManifest.model_validate(raw)
        except (OSError, ValueError, ValidationError) as exc:
            raise DataError(f"unreadable manifest {self.path}: {exc}") from exc
        if manifest.content_hash and manifest.content_hash != content_hash(manifest):
            LOGGER.warning("Manifest %s content hash does not match its records", self.path)
        return manifest

    def resolve(self, relative: str) -> Path:
        return self.root / relative
