#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional

from ._errors import UnknownModelError

_MODEL_ID = re.compile(r"^(?P<kind>HDDAE|IDEA)_(?P<cond>A|\d+(?:\.\d+)?)\((?P<depth>\d+)\)$")


@dataclass(frozen=True)
class ModelId:
    """``HDDAE_A(L)``, ``HDDAE_<t60>(L)`` or ``IDEA_A(n)``.

    An IDEA model of depth ``n`` uses specialists with ``n // 2`` hidden layers and
    a fusion CNN with ``n - n // 2`` layers (``J - 1`` convolutions plus the FC layer).
    """

    kind: Literal["hddae", "idea"]
    condition: Optional[float]
    depth: int

    @property
    def specialist_depth(self) -> int:
        return self.depth // 2 if self.kind == "idea" else self.depth

    @property
    def fusion_depth(self) -> int:
        return self.depth - self.depth // 2

    @property
    def slug(self) -> str:
        cond = "A" if self.condition is None else f"{self.condition:g}"
        return f"{self.kind}_{cond}_{self.depth}"

    def artifact_dir(self, root: Path) -> Path:
        return Path(root) / "models" / self.slug

    def artifact(self, root: Path) -> Path:
        """``model.drvk`` for a single HDDAE, ``idea.json`` for an ensemble."""
        return self.artifact_dir(root) / ("idea.json" if self.kind == "idea" else "model.drvk")

    def __str__(self) -> str:
        cond = "A" if self.condition is None else f"{self.condition:g}"
        return f"{self.kind.upper()}_{cond}({self.depth})"


def parse_model_id(text: str) -> ModelId:
    match = _MODEL_ID.match(text.strip())
    if not match:
        raise UnknownModelError(f"unknown model id {text!r} (expected HDDAE_A(L), HDDAE_<T60>(L) or IDEA_A(n))")
    kind = match["kind"].lower()
    condition = None if match["cond"] == "A" else float(match["cond"])
    depth = int(match["depth"])
    if kind == "idea" and condition is not None:
        raise UnknownModelError(f"{text}: IDEA models always train on all conditions")
    if kind == "hddae" and depth < 2:
        raise UnknownModelError(f"{text}: an HDDAE needs at least 2 hidden layers")
    if kind == "idea" and depth < 4:
        raise UnknownModelError(f"{text}: IDEA depth must be at least 4")
    return ModelId(kind=kind, condition=condition, depth=depth)
