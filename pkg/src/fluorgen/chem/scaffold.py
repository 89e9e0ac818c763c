"""Murcko scaffolds: ring systems plus linkers, side chains removed."""

from __future__ import annotations

from ..errors import ParseError
from .mol import Atom, Bond, Molecule
from .smiles import _implicit_h, write_smiles


def murcko_scaffold(mol: Molecule) -> Molecule | None:
    """Iteratively prune degree-1 non-ring atoms; None when the molecule is acyclic.

    Ring atoms never reach degree 1, so rings and the linkers between them
    survive while side chains fall away.
    """
    ring_bonds = mol.ring_bond_indices()
    if not ring_bonds:
        return None
    keep = set(range(mol.n_atoms))
    adj = mol.adjacency()
    in_ring = {i for i in range(mol.n_atoms) if any(bi in ring_bonds for _, bi in adj[i])}
    changed = True
    while changed:
        changed = False
        for i in sorted(keep):
            if i in in_ring:
                continue
            degree = sum(1 for nbr, _ in adj[i] if nbr in keep)
            if degree <= 1:
                keep.discard(i)
                changed = True
    index = {old: new for new, old in enumerate(sorted(keep))}
    bonds = [
        Bond(index[b.a], index[b.b], b.order)
        for b in mol.bonds
        if b.a in keep and b.b in keep
    ]
    atoms = []
    orders: list[list[int]] = [[] for _ in keep]
    for bond in bonds:
        orders[bond.a].append(bond.order)
        orders[bond.b].append(bond.order)
    for old in sorted(keep):
        src = mol.atoms[old]
        atoms.append(Atom(src.element, src.charge, src.aromatic, 0, src.h_explicit))
    scaffold = Molecule(atoms, bonds)
    for i, atom in enumerate(atoms):
        # refill hydrogens for the pruned environment; odd valences get a bracket
        try:
            atom.h_count = _implicit_h(atom.element, atom.aromatic, orders[i], 0)
        except ParseError:
            atom.h_count = 0
            atom.h_explicit = True
    return scaffold


def scaffold_key(mol: Molecule) -> str:
    """Grouping key for scaffold-based splitting; '' for acyclic molecules."""
    scaffold = murcko_scaffold(mol)
    if scaffold is None or scaffold.n_atoms == 0:
        return ""
    return write_smiles(scaffold)
