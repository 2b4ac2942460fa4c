"""Model checkpoint container.

Binary layout, all integers little-endian:

    magic   8 bytes  b"FLDCKPT\\0"
    version u32
    hlen    u64      length of the JSON header in bytes
    header  hlen bytes, UTF-8 JSON: model kind, config, normalization,
                     seed, iteration, and the ordered array directory
                     [{"name": ..., "shape": [...]}, ...]
    payload raw float64 little-endian array data, in directory order
    crc     u32      CRC32 of everything before it

Loading verifies magic, version and checksum; rebuilding a model rejects
array directories that do not exactly match the architecture's parameter
and running-statistics names.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import FFBaseline, FFConfig, FLDConfig, FLDModel, VAEBaseline, VAEConfig
from .signals import NormalizationStats

MAGIC = b"FLDCKPT\0"
VERSION = 1

MODEL_KINDS = ("fld", "pae", "vae", "ff")


@dataclass
class ModelCheckpoint:
    model_kind: str
    config: dict
    normalization: NormalizationStats
    seed: int
    iteration: int
    arrays: dict[str, np.ndarray]

    def __post_init__(self):
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model_kind!r}")


def save_checkpoint(checkpoint: ModelCheckpoint, path: str | Path) -> None:
    directory = [{"name": name, "shape": list(arr.shape)}
                 for name, arr in checkpoint.arrays.items()]
    header = json.dumps({
        "model_kind": checkpoint.model_kind,
        "config": checkpoint.config,
        "normalization": checkpoint.normalization.to_dict(),
        "seed": checkpoint.seed,
        "iteration": checkpoint.iteration,
        "arrays": directory,
    }).encode("utf-8")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    blob += struct.pack("<Q", len(header))
    blob += header
    for arr in checkpoint.arrays.values():
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 16:
        raise ValueError(f"{path}: truncated checkpoint")
    if raw[:len(MAGIC)] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint file (bad magic)")
    stored_crc = struct.unpack("<I", raw[-4:])[0]
    if zlib.crc32(raw[:-4]) != stored_crc:
        raise ValueError(f"{path}: checksum mismatch (corrupted or truncated)")
    offset = len(MAGIC)
    version = struct.unpack_from("<I", raw, offset)[0]
    offset += 4
    if version != VERSION:
        raise ValueError(f"{path}: checkpoint version {version}, reader supports {VERSION}")
    hlen = struct.unpack_from("<Q", raw, offset)[0]
    offset += 8
    header = json.loads(raw[offset:offset + hlen].decode("utf-8"))
    offset += hlen
    arrays: dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 8
        if offset + nbytes > len(raw) - 4:
            raise ValueError(f"{path}: payload shorter than the array directory")
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        arrays[entry["name"]] = arr.reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(raw) - 4:
        raise ValueError(f"{path}: trailing bytes after payload")
    return ModelCheckpoint(
        model_kind=header["model_kind"],
        config=header["config"],
        normalization=NormalizationStats.from_dict(header["normalization"]),
        seed=int(header["seed"]),
        iteration=int(header["iteration"]),
        arrays=arrays,
    )


def checkpoint_from_model(model, model_kind: str, normalization: NormalizationStats,
                          seed: int, iteration: int) -> ModelCheckpoint:
    arrays = {name: arr.copy() for name, arr in model.state_arrays().items()}
    return ModelCheckpoint(model_kind=model_kind, config=model.config.to_dict(),
                           normalization=normalization, seed=seed,
                           iteration=iteration, arrays=arrays)


def build_model(checkpoint: ModelCheckpoint):
    """Reconstruct the typed model and load every array by name.

    The checkpoint's array directory must match the architecture exactly;
    unknown or missing names are rejected.
    """
    kind = checkpoint.model_kind
    rng = np.random.default_rng(0)  # shapes only; values are overwritten
    if kind in ("fld", "pae"):
        model = FLDModel(FLDConfig.from_dict(checkpoint.config), rng)
    elif kind == "vae":
        model = VAEBaseline(VAEConfig.from_dict(checkpoint.config), rng)
    elif kind == "ff":
        model = FFBaseline(FFConfig.from_dict(checkpoint.config), rng)
    else:  # pragma: no cover - guarded in ModelCheckpoint
        raise ValueError(f"unknown model kind {kind!r}")
    targets = model.state_arrays()
    unknown = set(checkpoint.arrays) - set(targets)
    missing = set(targets) - set(checkpoint.arrays)
    if unknown:
        raise ValueError(f"checkpoint contains unknown arrays: {sorted(unknown)}")
    if missing:
        raise ValueError(f"checkpoint is missing arrays: {sorted(missing)}")
    for name, arr in checkpoint.arrays.items():
        if targets[name].shape != arr.shape:
            raise ValueError(f"array {name}: shape {arr.shape} != expected {targets[name].shape}")
        targets[name][...] = arr
    return model
