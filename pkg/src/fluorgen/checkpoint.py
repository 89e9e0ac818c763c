"""Checkpoint persistence: JSON header plus a flat float64 parameter blob.

Layout: 8-byte magic, u32 format version, u64 header length, UTF-8 JSON
header, then all parameter arrays as little-endian float64 in the order
fixed by the header's manifest. The header carries a SHA-256 of the blob;
loading verifies it, so truncation or corruption fails loudly instead of
returning garbage. Save/load round-trips are bit-exact.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct

import numpy as np

from .errors import CheckpointError

MAGIC = b"FLGNCKPT"
FORMAT_VERSION = 1


def save_checkpoint(path, state: dict):
    """Serialize a model state dict ({'kind', 'arrays', ...metadata})."""
    arrays = state["arrays"]
    meta = {k: v for k, v in state.items() if k != "arrays"}
    manifest = [{"name": name, "shape": list(np.asarray(a).shape)} for name, a in arrays.items()]
    blob = b"".join(np.ascontiguousarray(arrays[m["name"]], dtype="<f8").tobytes() for m in manifest)
    header = {
        "format_version": FORMAT_VERSION,
        "meta": meta,
        "manifest": manifest,
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<I", FORMAT_VERSION))
        handle.write(struct.pack("<Q", len(header_bytes)))
        handle.write(header_bytes)
        handle.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path) -> dict:
    """Read a state dict back; digest and version are enforced."""
    with open(path, "rb") as handle:
        magic = handle.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", handle.read(4))
        if version != FORMAT_VERSION:
            raise CheckpointError(
                f"{path}: format version {version} needs migration; this build reads {FORMAT_VERSION}")
        (header_len,) = struct.unpack("<Q", handle.read(8))
        header = json.loads(handle.read(header_len).decode("utf-8"))
        blob = handle.read()
    digest = hashlib.sha256(blob).hexdigest()
    if digest != header["blob_sha256"]:
        raise CheckpointError(f"{path}: parameter blob digest mismatch (truncated or corrupt)")
    arrays = {}
    offset = 0
    for entry in header["manifest"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        nbytes = count * 8
        chunk = blob[offset : offset + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointError(f"{path}: blob shorter than manifest requires")
        arrays[entry["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(entry["shape"]).copy()
        offset += nbytes
    state = dict(header["meta"])
    state["arrays"] = arrays
    return state


KIND_LOADERS = {}


def register_kind(kind: str, loader):
    KIND_LOADERS[kind] = loader


def load_model(path):
    """Instantiate the right model class from a checkpoint's kind tag."""
    state = load_checkpoint(path)
    kind = state.get("kind")
    loader = KIND_LOADERS.get(kind)
    if loader is None:
        raise CheckpointError(f"{path}: unknown checkpoint kind {kind!r}")
    return loader(state)


def _register_builtin():
    from .autoencoder.model import Autoencoder
    from .diffusion.dit import DiT
    from .prediction.heads import AGP, LSP
    from .prediction.hybrid import BiasNet

    register_kind("autoencoder", Autoencoder.from_state)
    register_kind("dit", DiT.from_state)
    register_kind("agp", AGP.from_state)
    register_kind("lsp", LSP.from_state)
    register_kind("biasnet", BiasNet.from_state)


_register_builtin()
