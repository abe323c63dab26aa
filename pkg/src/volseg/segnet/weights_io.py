"""Versioned binary container for network weights.

Layout: magic ``VSGW``, u32 format version, u32 JSON header length, the
JSON header (config echo, block index, optional metadata such as the
modality tag), then each block's float32 little-endian payload in index
order. Weights load back as float64 arrays.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .config import NetworkConfig, parameter_shapes
from .network import Weights

MAGIC = b"VSGW"
FORMAT_VERSION = 1


def weights_to_bytes(weights: Weights, config: NetworkConfig,
                     metadata: dict | None = None) -> bytes:
    blocks = []
    payloads = []
    for name in parameter_shapes(config):
        arr = np.ascontiguousarray(weights[name], dtype="<f4")
        blocks.append({"name": name, "shape": list(arr.shape)})
        payloads.append(arr.tobytes())
    header = {
        "config": config.to_dict(),
        "blocks": blocks,
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    return b"".join(
        [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header_bytes)), header_bytes, *payloads]
    )


def weights_from_bytes(buf: bytes) -> tuple[Weights, NetworkConfig, dict]:
    if buf[:4] != MAGIC:
        raise ValueError(f"not a weights container (magic {buf[:4]!r})")
    version, header_len = struct.unpack("<II", buf[4:12])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported weights format version {version}")
    header = json.loads(buf[12 : 12 + header_len].decode())
    config = NetworkConfig.from_dict(header["config"])
    weights: Weights = {}
    offset = 12 + header_len
    for block in header["blocks"]:
        shape = tuple(block["shape"])
        count = int(np.prod(shape))
        arr = np.frombuffer(buf, dtype="<f4", count=count, offset=offset)
        weights[block["name"]] = arr.astype(np.float64).reshape(shape)
        offset += count * 4
    return weights, config, header.get("metadata", {})


def save_weights(weights: Weights, config: NetworkConfig, path: str | Path,
                 metadata: dict | None = None) -> None:
    Path(path).write_bytes(weights_to_bytes(weights, config, metadata))


def load_weights(path: str | Path) -> tuple[Weights, NetworkConfig, dict]:
    return weights_from_bytes(Path(path).read_bytes())


def save_loss_curve(curve: list[float], path: str | Path) -> None:
    lines = ["epoch,loss"] + [f"{i},{v!r}" for i, v in enumerate(curve)]
    Path(path).write_text("\n".join(lines) + "\n")
