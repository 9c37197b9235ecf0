"""Versioned checkpoint container for the classifier head.

Layout: a magic line, an 8-byte little-endian header length, a UTF-8 JSON
header (config, label scheme, encoder identity, parameter count, tensor
table), then the raw tensor payloads concatenated in table order as
little-endian float32, row-major.  The bytes are a pure function of the
saved state: no timestamps, no compression, no pickle.  Loading does not
require the pretrained encoder to be present.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from .dataset import LabelScheme
from .model import ClassifierHead, ModelConfig, build_head, parameter_count

MAGIC = b"BANGLAHATE-CKPT\n"
FORMAT_VERSION = 1


class CorruptCheckpoint(ValueError):
    pass


def save_checkpoint(
    path: str | Path,
    head: ClassifierHead,
    scheme: LabelScheme,
    encoder_info: dict,
) -> None:
    state = head.state_dict()
    names = sorted(state)
    table = []
    payloads = []
    for name in names:
        arr = state[name].detach().cpu().numpy().astype("<f4", copy=False)
        arr = np.ascontiguousarray(arr)
        table.append({"name": name, "shape": list(arr.shape), "dtype": "float32",
                      "nbytes": int(arr.nbytes)})
        payloads.append(arr.tobytes())
    header = {
        "format_version": FORMAT_VERSION,
        "model_config": head.cfg.as_dict(),
        "scheme": {"subtask": scheme.subtask, "names": list(scheme.names)},
        "encoder": dict(encoder_info),
        "parameter_count": parameter_count(head.cfg),
        "tensors": table,
    }
    header_bytes = json.dumps(header, ensure_ascii=False, sort_keys=True,
                              separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for payload in payloads:
            f.write(payload)


class CheckpointBundle:
    def __init__(self, head: ClassifierHead, scheme: LabelScheme, encoder_info: dict, header: dict):
        self.head = head
        self.scheme = scheme
        self.encoder_info = encoder_info
        self.header = header


def read_header(path: str | Path) -> dict:
    with open(path, "rb") as f:
        magic = f.read(len(MAGIC))
        if magic != MAGIC:
            raise CorruptCheckpoint(f"{path}: not a checkpoint file (bad magic)")
        (header_len,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(header_len).decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise CorruptCheckpoint(
            f"{path}: unsupported format version {header.get('format_version')!r}"
        )
    return header


def load_checkpoint(path: str | Path) -> CheckpointBundle:
    header = read_header(path)
    cfg = ModelConfig.from_dict(header["model_config"])
    if header["parameter_count"] != parameter_count(cfg):
        raise CorruptCheckpoint(
            f"{path}: stored parameter count {header['parameter_count']} does not match "
            f"the architecture ({parameter_count(cfg)}); architecture drift?"
        )
    head = build_head(cfg)
    state = head.state_dict()
    offset = len(MAGIC) + 8 + len(
        json.dumps(header, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode("utf-8")
    )
    loaded = {}
    with open(path, "rb") as f:
        f.seek(offset)
        for entry in header["tensors"]:
            raw = f.read(entry["nbytes"])
            if len(raw) != entry["nbytes"]:
                raise CorruptCheckpoint(f"{path}: truncated payload for {entry['name']}")
            arr = np.frombuffer(raw, dtype="<f4").reshape(entry["shape"]).copy()
            loaded[entry["name"]] = torch.from_numpy(arr)
    if set(loaded) != set(state):
        missing = set(state) - set(loaded)
        extra = set(loaded) - set(state)
        raise CorruptCheckpoint(f"{path}: tensor set mismatch (missing={missing}, extra={extra})")
    head.load_state_dict(loaded)
    scheme = LabelScheme(header["scheme"]["subtask"], tuple(header["scheme"]["names"]))
    return CheckpointBundle(head, scheme, header["encoder"], header)
