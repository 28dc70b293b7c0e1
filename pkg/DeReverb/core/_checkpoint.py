#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

"""Binary model checkpoints.

Layout (little-endian)::

    b"DRVK"                  magic
    u32                      format version
    u16 + bytes              model kind tag ("hddae" | "cnn")
    u32 + bytes              JSON metadata: architecture spec and training metadata
    u32 n_params, u32 n_norm
    shape table              per array: u16 + name, u8 ndim, u32 * ndim
    '<f8' blobs              parameters in table order, then normalizer stats
"""

import os
import struct
from pathlib import Path
from typing import Union

import numpy as np
import ujson

from DeReverb.logger import LOGGER
from ._errors import CheckpointError
from ._nn import MODEL_KINDS, PARAM_SHAPES, SPEC_KINDS, FeatureNormalizer, Network

MAGIC = b"DRVK"
VERSION = 1
NORM_KEYS = ("norm.in_mean", "norm.in_std", "norm.out_mean", "norm.out_std")
NORM_SHAPES = {
    "hddae": lambda spec: ((spec.input_dim,), (spec.output_dim,)),
    "cnn": lambda spec: ((spec.in_channels, spec.n_bins), (spec.n_bins,)),
}


def _pack_str(text: str, width: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack(f"<{width}", len(raw)) + raw


def encode_checkpoint(model: Network) -> bytes:
    normalizer = model.require_normalizer()
    params = {k: np.asarray(v, dtype="<f8") for k, v in model.params.items()}
    norm = {k: np.asarray(v, dtype="<f8") for k, v in normalizer.arrays().items()}
    meta = {"spec": model.spec.model_dump(mode="json"), "training": model.meta}

    parts = [
        MAGIC,
        struct.pack("<I", VERSION),
        _pack_str(model.kind, "H"),
        _pack_str(ujson.dumps(meta, sort_keys=True), "I"),
        struct.pack("<II", len(params), len(norm)),
    ]
    arrays = list(params.items()) + list(norm.items())
    for name, arr in arrays:
        parts.append(_pack_str(name, "H"))
        parts.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
    parts.extend(arr.tobytes(order="C") for _, arr in arrays)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if self.pos + n > len(self.data):
            raise CheckpointError("corrupted checkpoint: unexpected end of file")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self, width: str) -> str:
        (n,) = self.unpack(f"<{width}")
        try:
            return bytes(self.take(n)).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CheckpointError("corrupted checkpoint: undecodable text field") from exc


def decode_checkpoint(data: bytes) -> Network:
    reader = _Reader(data)
    if bytes(reader.take(4)) != MAGIC:
        raise CheckpointError("corrupted checkpoint: bad magic")
    (version,) = reader.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version} (expected {VERSION})")

    kind = reader.text("H")
    if kind not in MODEL_KINDS:
        raise CheckpointError(f"corrupted checkpoint: unknown model kind {kind!r}")
    try:
        meta = ujson.loads(reader.text("I"))
        spec = SPEC_KINDS[kind].model_validate(meta["spec"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"corrupted checkpoint: bad metadata ({exc})") from exc

    n_params, n_norm = reader.unpack("<II")
    table = []
    for _ in range(n_params + n_norm):
        name = reader.text("H")
        (ndim,) = reader.unpack("<B")
        table.append((name, reader.unpack(f"<{ndim}I")))

    arrays = {}
    for name, shape in table:
        count = int(np.prod(shape, dtype=np.int64))
        arrays[name] = np.frombuffer(reader.take(8 * count), dtype="<f8").reshape(shape).astype(np.float64)
    if reader.pos != len(reader.data):
        raise CheckpointError("corrupted checkpoint: trailing bytes")

    names = [name for name, _ in table]
    if tuple(names[n_params:]) != NORM_KEYS:
        raise CheckpointError("corrupted checkpoint: missing normalizer statistics")
    declared = {name: tuple(shape) for name, shape in table[:n_params]}
    if len(declared) != n_params or declared != PARAM_SHAPES[kind](spec):
        raise CheckpointError(
            f"corrupted checkpoint: parameter table does not match the declared {kind} architecture"
        )
    in_shape, out_shape = NORM_SHAPES[kind](spec)
    norm_shapes = [tuple(shape) for _, shape in table[n_params:]]
    if norm_shapes != [in_shape, in_shape, out_shape, out_shape]:
        raise CheckpointError("corrupted checkpoint: normalizer statistics do not match the declared architecture")
    params = {name: arrays[name] for name in names[:n_params]}
    normalizer = FeatureNormalizer(*(arrays[k] for k in NORM_KEYS))
    model = MODEL_KINDS[kind](spec, params, normalizer)
    model.meta = dict(meta.get("training", {}))
    return model


def save_checkpoint(model: Network, path: Union[str, Path]) -> Path:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".part")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(encode_checkpoint(model))
        os.replace(tmp, path)
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc
    LOGGER.info("Saved %s checkpoint to %s", model.kind, path)
    return path


def load_checkpoint(path: Union[str, Path]) -> Network:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    model = decode_checkpoint(data)
    LOGGER.debug("Loaded %s checkpoint from %s", model.kind, path)
    return model
