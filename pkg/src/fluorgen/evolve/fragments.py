"""Fragment-mode assembly and the synthetic-accessibility proxy."""

from __future__ import annotations

import numpy as np

from ..chem.mol import AROMATIC, Atom, Bond, Molecule
from ..errors import ContractError


def eligible_fragment_sites(frag: Molecule) -> list[int]:
    """Connectable fragment atoms: conjugated C or N with an implicit hydrogen.

    Conjugated means aromatic or touching a double/triple/aromatic bond.
    Bracket-atom hydrogen counts are explicit and do not qualify.
    """
    adj = frag.adjacency()
    sites = []
    for i, atom in enumerate(frag.atoms):
        if atom.element not in ("C", "N"):
            continue
        if atom.h_explicit or atom.h_count < 1:
            continue
        conjugated = atom.aromatic or any(
            frag.bonds[bi].order in (2, 3, AROMATIC) for _, bi in adj[i]
        )
        if conjugated:
            sites.append(i)
    return sites


def attach(core: Molecule, anchor: int, frag: Molecule, site: int) -> Molecule:
    """Join fragment to core with a single bond, consuming one hydrogen per side."""
    if not (0 <= anchor < core.n_atoms):
        raise ContractError(f"anchor {anchor} out of range")
    if core.atoms[anchor].h_count < 1:
        raise ContractError(f"core anchor {anchor} has no hydrogen to give up")
    if frag.atoms[site].h_count < 1:
        raise ContractError(f"fragment site {site} has no hydrogen to give up")
    atoms = [Atom(a.element, a.charge, a.aromatic, a.h_count, a.h_explicit) for a in core.atoms]
    atoms += [Atom(a.element, a.charge, a.aromatic, a.h_count, a.h_explicit) for a in frag.atoms]
    offset = core.n_atoms
    bonds = [Bond(b.a, b.b, b.order) for b in core.bonds]
    bonds += [Bond(b.a + offset, b.b + offset, b.order) for b in frag.bonds]
    bonds.append(Bond(anchor, site + offset, 1))
    atoms[anchor].h_count -= 1
    atoms[site + offset].h_count -= 1
    out = Molecule(atoms, bonds)
    out.validate()
    return out


def fragment_mutate(core: Molecule, anchors: list[int], frag: Molecule,
                    rng: np.random.Generator | None = None,
                    max_assemblies: int | None = None) -> list[Molecule]:
    """All single-bond assemblies of the fragment onto the core anchors.

    Returns an empty list (flagging the fragment) when no eligible site
    exists; rng-subsampled to max_assemblies when requested.
    """
    if not anchors:
        raise ContractError("no core anchors defined")
    sites = eligible_fragment_sites(frag)
    if not sites:
        return []
    pairs = [(a, s) for a in anchors for s in sites if core.atoms[a].h_count >= 1]
    if max_assemblies is not None and len(pairs) > max_assemblies:
        if rng is None:
            raise ContractError("subsampling assemblies needs an rng")
        idx = rng.choice(len(pairs), size=max_assemblies, replace=False)
        pairs = [pairs[int(i)] for i in idx]
    return [attach(core, a, frag, s) for a, s in pairs]


def ring_count(mol: Molecule) -> int:
    """Cyclomatic number (independent cycles) of a connected graph."""
    return len(mol.bonds) - mol.n_atoms + 1


def smallest_ring_through(mol: Molecule, bond_idx: int) -> int | None:
    """Length of the shortest cycle containing the bond, None for bridges."""
    if bond_idx not in mol.ring_bond_indices():
        return None
    bond = mol.bonds[bond_idx]
    adj = mol.adjacency()
    # BFS from one endpoint to the other, avoiding the bond itself
    dist = {bond.a: 0}
    queue = [bond.a]
    while queue:
        node = queue.pop(0)
        for nbr, bi in adj[node]:
            if bi == bond_idx or nbr in dist:
                continue
            dist[nbr] = dist[node] + 1
            queue.append(nbr)
    return dist[bond.b] + 1 if bond.b in dist else None


def sa_proxy(mol: Molecule) -> float:
    """Synthetic-accessibility stand-in on the 1 (easy) .. 10 (hard) scale.

    Penalizes size, ring count, ring fusion, macrocycles, and charges.
    Parity with published synthetic-accessibility scores is a non-goal;
    the scorer is pluggable wherever it is consumed.
    """
    score = 1.0
    score += 0.05 * max(0, mol.n_atoms - 10)
    score += 0.25 * ring_count(mol)
    ring_bonds = mol.ring_bond_indices()
    fusion_atoms = sum(
        1 for i in range(mol.n_atoms)
        if sum(bi in ring_bonds for _, bi in mol.adjacency()[i]) >= 3
    )
    score += 0.2 * fusion_atoms
    for bi in ring_bonds:
        size = smallest_ring_through(mol, bi)
        if size is not None and size > 8:
            score += 0.25
    score += 0.4 * sum(abs(a.charge) for a in mol.atoms)
    return float(min(score, 10.0))
