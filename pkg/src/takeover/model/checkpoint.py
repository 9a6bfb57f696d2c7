"""Binary checkpoint format.

Layout (all integers little-endian)::

    8 bytes   magic  b"TOTCKPT\\0"
    uint16    format version
    uint32    header length in bytes
    header    UTF-8 JSON: {"config", "task", "mask", "params": [{"name", "shape"}]}
    payload   each parameter as little-endian float64, C order, header order
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from ..features import FeatureMask
from .config import ModelConfig
from .network import Model

MAGIC = b"TOTCKPT\x00"
VERSION = 1
_PREFIX = struct.Struct("<8sHI")


class CheckpointError(ValueError):
    pass


def save_checkpoint(model: Model, path) -> None:
    header = {
        "config": model.config.to_dict(),
        "task": model.task,
        "mask": model.mask.to_dict(),
        "params": [{"name": k, "shape": list(v.shape)} for k, v in model.params.items()],
    }
    hbytes = json.dumps(header).encode("utf-8")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(hbytes)))
        fh.write(hbytes)
        for v in model.params.values():
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())
    os.replace(tmp, path)


def load_checkpoint(path) -> Model:
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        raise CheckpointError(f"{path}: file too short to be a checkpoint")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic bytes, not a take-over model checkpoint")
    if version != VERSION:
        raise CheckpointError(f"{path}: checkpoint format version {version} is not supported (expected {VERSION})")
    pos = _PREFIX.size
    try:
        header = json.loads(data[pos : pos + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from None
    pos += hlen
    params = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if pos + nbytes > len(data):
            raise CheckpointError(f"{path}: truncated payload at parameter {entry['name']}")
        params[entry["name"]] = np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=pos).reshape(shape).astype(float)
        pos += nbytes
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes after payload")
    return Model(
        config=ModelConfig.from_dict(header["config"]),
        params=params,
        task=header["task"],
        mask=FeatureMask(**header["mask"]),
    )
