"""Deterministic RNG substreams.

All randomness in the package flows from a single run seed through named
substreams; no module touches the global numpy RNG. Substream identity is
(seed, *labels), so e.g. per-chain streams are substream(seed, "sample",
chain_index) and are reproducible regardless of evaluation order.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_words(label) -> list[int]:
    if isinstance(label, (int, np.integer)):
        return [int(label) & 0xFFFFFFFF, (int(label) >> 32) & 0xFFFFFFFF]
    digest = hashlib.sha256(str(label).encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def substream(seed: int, *labels) -> np.random.Generator:
    """A generator keyed by (seed, *labels); stable across runs and platforms."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for label in labels:
        entropy.extend(_label_words(label))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
