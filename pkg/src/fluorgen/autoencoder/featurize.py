"""Molecular graph featurization for the encoder.

Molecules are padded to a common atom count and augmented with P virtual
nodes appended after the real-atom block; virtual nodes link to every real
atom (and each other) through dedicated bond types so one attention hop
reaches the whole molecule.
"""

from __future__ import annotations

import numpy as np

from ..chem.mol import AROMATIC, Molecule
from ..errors import ContractError

ELEMENTS = ["B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"]
ELEMENT_INDEX = {e: i for i, e in enumerate(ELEMENTS)}
N_ELEMENT_KINDS = len(ELEMENTS) + 1  # +1 pad slot

BOND_NONE, BOND_SINGLE, BOND_DOUBLE, BOND_TRIPLE = 0, 1, 2, 3
BOND_AROMATIC, BOND_REAL_VIRT, BOND_VIRT_VIRT, BOND_SELF = 4, 5, 6, 7
N_BOND_KINDS = 8

_ORDER_TO_TYPE = {1: BOND_SINGLE, 2: BOND_DOUBLE, 3: BOND_TRIPLE, AROMATIC: BOND_AROMATIC}

N_CHARGE_KINDS = 5  # charge clamped to [-2, 2]
N_H_KINDS = 5       # hydrogen count clamped to [0, 4]
N_AROM_KINDS = 2


class GraphBatch:
    def __init__(self, elem, charge, arom, hcount, bond_type, node_mask, n_real: int, p: int):
        self.elem = elem            # (B, n_real) element indices, pad slot for padding
        self.charge = charge        # (B, n_real)
        self.arom = arom            # (B, n_real)
        self.hcount = hcount        # (B, n_real)
        self.bond_type = bond_type  # (B, n_real + p, n_real + p)
        self.node_mask = node_mask  # (B, n_real + p) 1.0 valid / 0.0 padding
        self.n_real = n_real
        self.p = p

    @property
    def batch_size(self) -> int:
        return self.elem.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.n_real + self.p


def featurize_molecules(mols: list[Molecule], p: int, max_atoms: int = 128) -> GraphBatch:
    if not mols:
        raise ContractError("empty molecule batch")
    sizes = [m.n_atoms for m in mols]
    if max(sizes) > max_atoms:
        raise ContractError(f"molecule with {max(sizes)} atoms exceeds the configured maximum {max_atoms}")
    n_real = max(sizes)
    b = len(mols)
    n = n_real + p

    elem = np.full((b, n_real), len(ELEMENTS), dtype=np.intp)
    charge = np.zeros((b, n_real), dtype=np.intp)
    arom = np.zeros((b, n_real), dtype=np.intp)
    hcount = np.zeros((b, n_real), dtype=np.intp)
    bond_type = np.zeros((b, n, n), dtype=np.intp)
    node_mask = np.zeros((b, n), dtype=np.float64)

    for bi, mol in enumerate(mols):
        na = mol.n_atoms
        node_mask[bi, :na] = 1.0
        node_mask[bi, n_real:] = 1.0
        for ai, atom in enumerate(mol.atoms):
            if atom.element not in ELEMENT_INDEX:
                raise ContractError(f"element {atom.element!r} outside the supported set")
            elem[bi, ai] = ELEMENT_INDEX[atom.element]
            charge[bi, ai] = int(np.clip(atom.charge, -2, 2)) + 2
            arom[bi, ai] = 1 if atom.aromatic else 0
            hcount[bi, ai] = int(np.clip(atom.h_count, 0, 4))
        for bond in mol.bonds:
            t = _ORDER_TO_TYPE[bond.order]
            bond_type[bi, bond.a, bond.b] = t
            bond_type[bi, bond.b, bond.a] = t
        bond_type[bi, :na, n_real:] = BOND_REAL_VIRT
        bond_type[bi, n_real:, :na] = BOND_REAL_VIRT
        bond_type[bi, n_real:, n_real:] = BOND_VIRT_VIRT
        idx = np.arange(n)
        bond_type[bi, idx, idx] = BOND_SELF
    return GraphBatch(elem, charge, arom, hcount, bond_type, node_mask, n_real, p)
