"""Circular fingerprints and Tanimoto similarity.

Neighborhood invariants are hashed with a fixed 64-bit mixer and folded to
a 2048-bit vector. Bit-compatibility with external toolkits is not a goal;
determinism and invariance to input atom ordering are.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .mol import ATOMIC_NUMBER, Molecule

FP_BITS = 2048

_MASK = (1 << 64) - 1


def _mix(*values: int) -> int:
    h = 0x9E3779B97F4A7C15
    for v in values:
        h = (h ^ (v & _MASK)) * 0xBF58476D1CE4E5B9 & _MASK
        h = (h ^ (h >> 27)) * 0x94D049BB133111EB & _MASK
        h ^= h >> 31
    return h


def morgan_fingerprint(mol: Molecule, radius: int = 2, nbits: int = FP_BITS) -> np.ndarray:
    """Folded circular fingerprint; deterministic and permutation-invariant."""
    adj = mol.adjacency()
    ring = mol.ring_bond_indices()
    codes = []
    for i, atom in enumerate(mol.atoms):
        in_ring = any(bi in ring for _, bi in adj[i])
        codes.append(_mix(
            ATOMIC_NUMBER.get(atom.element, 0), atom.charge + 8, int(atom.aromatic),
            atom.h_count, len(adj[i]), int(in_ring),
        ))
    bits = np.zeros(nbits, dtype=np.uint8)
    for code in codes:
        bits[code % nbits] = 1
    for _ in range(radius):
        nxt = []
        for i in range(mol.n_atoms):
            env = sorted(_mix(mol.bonds[bi].order, codes[j]) for j, bi in adj[i])
            nxt.append(_mix(codes[i], *env))
        codes = nxt
        for code in codes:
            bits[code % nbits] = 1
    return bits


def tanimoto(a: np.ndarray, b: np.ndarray) -> float:
    """|a & b| / |a | b|; two empty fingerprints count as identical (1.0)."""
    if a.shape != b.shape:
        raise ContractError(f"fingerprint length mismatch: {a.shape} vs {b.shape}")
    inter = int(np.sum((a != 0) & (b != 0)))
    union = int(np.sum((a != 0) | (b != 0)))
    if union == 0:
        return 1.0
    return inter / union
