"""Model file format: magic ``CNNM``, canonical JSON config, raw tensors.

Layout (all integers little-endian):

* 4 bytes magic ``CNNM``, u32 format version
* u32 length + that many bytes of canonical JSON (sorted keys, no spaces)
  describing the :class:`~cuneo.nn.model.ModelConfig`
* for each layer, its parameter tensors in sorted-name order: u8 ndim,
  ndim u32 extents, then float32 data
* u32 CRC-32 of everything before it

Float32 payloads round-trip bit-exactly; the trailing CRC turns silent
truncation or bit rot into a hard load error.
"""

from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np

from ..errors import ConfigError, FormatError
from .model import (
    ConvSpec,
    DenseSpec,
    FlattenSpec,
    ModelConfig,
    ModelParams,
    PoolSpec,
    ReluSpec,
    SoftmaxSpec,
    init_params,
)

MODEL_MAGIC = b"CNNM"
MODEL_VERSION = 1


def _spec_to_dict(spec) -> dict:
    if isinstance(spec, ConvSpec):
        return {"kind": "conv", "filters": spec.filters, "kernel": spec.kernel}
    if isinstance(spec, PoolSpec):
        return {"kind": "pool", "size": spec.size, "stride": spec.stride}
    if isinstance(spec, ReluSpec):
        return {"kind": "relu"}
    if isinstance(spec, FlattenSpec):
        return {"kind": "flatten"}
    if isinstance(spec, DenseSpec):
        return {"kind": "dense", "units": spec.units}
    if isinstance(spec, SoftmaxSpec):
        return {"kind": "softmax"}
    raise ConfigError(f"unknown layer spec {type(spec).__name__}")


def _spec_from_dict(d: dict):
    kind = d.get("kind")
    try:
        if kind == "conv":
            return ConvSpec(filters=int(d["filters"]), kernel=int(d["kernel"]))
        if kind == "pool":
            return PoolSpec(size=int(d["size"]), stride=int(d["stride"]))
        if kind == "relu":
            return ReluSpec()
        if kind == "flatten":
            return FlattenSpec()
        if kind == "dense":
            return DenseSpec(units=int(d["units"]))
        if kind == "softmax":
            return SoftmaxSpec()
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad layer entry {d!r}") from exc
    raise FormatError(f"unknown layer kind {kind!r}")


def config_to_json(config: ModelConfig) -> str:
    payload = {
        "input_shape": list(config.input_shape),
        "layers": [_spec_to_dict(s) for s in config.layers],
        "num_classes": config.num_classes,
        "seed": config.seed,
        "class_names": list(config.class_names) if config.class_names is not None else None,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def config_from_json(text: str) -> ModelConfig:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model config is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise FormatError("model config must be a JSON object")
    try:
        names = payload["class_names"]
        config = ModelConfig(
            input_shape=tuple(int(v) for v in payload["input_shape"]),
            layers=tuple(_spec_from_dict(d) for d in payload["layers"]),
            num_classes=int(payload["num_classes"]),
            seed=int(payload["seed"]),
            class_names=tuple(str(n) for n in names) if names is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"model config is malformed: {exc}") from exc
    except ConfigError as exc:
        raise FormatError(f"model config is inconsistent: {exc}") from exc
    return config


def save_model(path: str | os.PathLike, config: ModelConfig, params: ModelParams) -> None:
    """Write config and parameters; see the module docstring for layout."""
    if len(params) != len(config.layers):
        raise ValueError(f"{len(params)} parameter entries for {len(config.layers)} layers")
    blob = bytearray()
    blob += MODEL_MAGIC
    blob += struct.pack("<I", MODEL_VERSION)
    cfg = config_to_json(config).encode("utf-8")
    blob += struct.pack("<I", len(cfg))
    blob += cfg
    for layer in params:
        for name in sorted(layer):
            arr = np.ascontiguousarray(layer[name], dtype=np.float32)
            blob += struct.pack("<B", arr.ndim)
            blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
            blob += arr.tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(bytes(blob))


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.data):
            raise FormatError(f"model file truncated: {self.path}")
        out = self.data[self.off : self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]


def load_model(path: str | os.PathLike) -> tuple[ModelConfig, ModelParams]:
    """Read a model file back; raises :class:`FormatError` on any damage."""
    path = os.fspath(path)
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 12 or data[:4] != MODEL_MAGIC:
        raise FormatError(f"not a model file (bad magic): {path}")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    actual_crc = zlib.crc32(data[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise FormatError(f"model file corrupted (checksum mismatch): {path}")
    r = _Reader(data[:-4], path)
    r.take(4)  # magic
    version = r.u32()
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model format version {version}: {path}")
    cfg_len = r.u32()
    config = config_from_json(r.take(cfg_len).decode("utf-8"))

    # shapes the config implies, to validate the tensor blocks against
    expected = init_params(config)
    params: ModelParams = []
    for layer in expected:
        loaded = {}
        for name in sorted(layer):
            ndim = r.u8()
            if ndim > 8:
                raise FormatError(f"implausible tensor rank {ndim}: {path}")
            shape = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
            if shape != layer[name].shape:
                raise FormatError(
                    f"tensor shape {shape} does not match config "
                    f"(expected {layer[name].shape}): {path}"
                )
            count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            arr = np.frombuffer(r.take(4 * count), dtype="<f4").reshape(shape)
            loaded[name] = arr.astype(np.float32)
        params.append(loaded)
    if r.off != len(r.data):
        raise FormatError(f"model file has {len(r.data) - r.off} trailing bytes: {path}")
    return config, params
