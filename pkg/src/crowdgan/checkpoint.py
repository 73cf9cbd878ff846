"""Named-parameter archive format.

Layout: 4-byte magic, u32 version, u64 header length, JSON header, raw
little-endian tensor payloads. The header records an architecture manifest
plus (name, dtype, shape, offset, nbytes) per tensor. Weights are stored as
32-bit floats; integer bookkeeping buffers (batch-norm step counters) as
64-bit ints. Saving then loading reproduces every tensor bit-exactly.
"""

from __future__ import annotations

import json
import struct
from typing import Union

import numpy as np
import torch

from .data import Direction
from .discriminator import PatchDiscriminator
from .errors import ConfigError, FormatError
from .generator import UNetGenerator
from .training import TrainedTask

MAGIC = b"CGCK"
VERSION = 1
_DTYPES = ("<f4", "<i8")

Model = Union[UNetGenerator, PatchDiscriminator]


def _dtype_tag(arr: np.ndarray) -> str:
    if arr.dtype == np.float32:
        return "<f4"
    if arr.dtype == np.int64:
        return "<i8"
    raise ConfigError(f"unsupported parameter dtype {arr.dtype}")


def save_archive(path: str, manifest: dict, arrays: dict[str, np.ndarray]) -> None:
    """Write a manifest plus named arrays; iteration order is preserved."""
    tensors = []
    payload = bytearray()
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        tag = _dtype_tag(arr)
        raw = arr.astype(tag, copy=False).tobytes()
        tensors.append(
            {
                "name": name,
                "dtype": tag,
                "shape": list(arr.shape),
                "offset": len(payload),
                "nbytes": len(raw),
            }
        )
        payload.extend(raw)
    header = json.dumps({"manifest": manifest, "tensors": tensors}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(payload)


def load_archive(path: str) -> tuple[dict, dict[str, np.ndarray]]:
    """Read back (manifest, arrays). Corrupt or truncated files raise FormatError."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise FormatError(f"{path}: not a parameter archive")
    (version,) = struct.unpack("<I", blob[4:8])
    if version != VERSION:
        raise FormatError(f"{path}: unsupported archive version {version}")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    if len(blob) < 16 + header_len:
        raise FormatError(f"{path}: truncated header")
    try:
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
        manifest = header["manifest"]
        tensors = header["tensors"]
    except (ValueError, KeyError) as exc:
        raise FormatError(f"{path}: corrupt archive header: {exc}") from exc
    base = 16 + header_len
    arrays: dict[str, np.ndarray] = {}
    for spec in tensors:
        try:
            name, tag = spec["name"], spec["dtype"]
            shape = tuple(spec["shape"])
            offset, nbytes = spec["offset"], spec["nbytes"]
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{path}: corrupt tensor entry: {exc}") from exc
        if tag not in _DTYPES:
            raise FormatError(f"{path}: unknown tensor dtype {tag!r}")
        if base + offset + nbytes > len(blob):
            raise FormatError(f"{path}: truncated payload for tensor {name!r}")
        arr = np.frombuffer(blob, dtype=tag, count=nbytes // np.dtype(tag).itemsize,
                            offset=base + offset)
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise FormatError(f"{path}: payload size mismatch for tensor {name!r}")
        arrays[name] = arr.reshape(shape).copy()
    return manifest, arrays


def _state_arrays(model: Model) -> dict[str, np.ndarray]:
    return {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}


def _load_state(model: Model, arrays: dict[str, np.ndarray], path: str) -> None:
    state = {}
    for k, arr in arrays.items():
        state[k] = torch.from_numpy(np.ascontiguousarray(arr))
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise FormatError(f"{path}: parameter set mismatch: {exc}") from exc


def _build(manifest: dict, path: str) -> Model:
    kind = manifest.get("kind")
    if kind == "generator":
        return UNetGenerator.from_manifest(manifest)
    if kind == "discriminator":
        return PatchDiscriminator.from_manifest(manifest)
    raise FormatError(f"{path}: unknown model kind {kind!r}")


def save_model(path: str, model: Model) -> None:
    """One network per file: its manifest plus every state tensor."""
    save_archive(path, model.manifest(), _state_arrays(model))


def load_model(path: str, resolution: int | None = None) -> Model:
    """Rebuild a network from its archive; resolution mismatch raises ConfigError."""
    manifest, arrays = load_archive(path)
    if resolution is not None and manifest.get("resolution") != resolution:
        raise ConfigError(
            f"{path}: archive resolution {manifest.get('resolution')} "
            f"!= requested {resolution}"
        )
    model = _build(manifest, path)
    _load_state(model, arrays, path)
    model.eval()
    return model


def save_task(path: str, task: TrainedTask) -> None:
    """Bundle one direction's generator + discriminator into a single archive."""
    manifest = {
        "kind": "task",
        "direction": task.direction.value,
        "generator": task.generator.manifest(),
        "discriminator": task.discriminator.manifest(),
    }
    arrays: dict[str, np.ndarray] = {}
    for prefix, model in (("generator", task.generator), ("discriminator", task.discriminator)):
        for name, arr in _state_arrays(model).items():
            arrays[f"{prefix}.{name}"] = arr
    save_archive(path, manifest, arrays)


def load_task(path: str, resolution: int | None = None) -> TrainedTask:
    """Rebuild a trained task bundle; loss history is not stored in archives."""
    manifest, arrays = load_archive(path)
    if manifest.get("kind") != "task":
        raise FormatError(f"{path}: expected a task archive, got {manifest.get('kind')!r}")
    try:
        direction = Direction(manifest["direction"])
        g_manifest = manifest["generator"]
        d_manifest = manifest["discriminator"]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: corrupt task manifest: {exc}") from exc
    if resolution is not None and g_manifest.get("resolution") != resolution:
        raise ConfigError(
            f"{path}: archive resolution {g_manifest.get('resolution')} "
            f"!= requested {resolution}"
        )
    generator = _build(g_manifest, path)
    discriminator = _build(d_manifest, path)
    for prefix, model in (("generator", generator), ("discriminator", discriminator)):
        sub = {
            name[len(prefix) + 1 :]: arr
            for name, arr in arrays.items()
            if name.startswith(prefix + ".")
        }
        _load_state(model, sub, path)
    generator.eval()
    discriminator.eval()
    return TrainedTask(direction, generator, discriminator, loss_history=[])
