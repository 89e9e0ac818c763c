"""Molecular graphs: atoms, bonds, ring perception, isomorphism."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..errors import ContractError

AROMATIC = 4  # bond order sentinel; real orders are 1, 2, 3

# allowed valences for the organic subset, smallest first
VALENCES = {
    "B": (3,), "C": (4,), "N": (3, 5), "O": (2,), "P": (3, 5),
    "S": (2, 4, 6), "F": (1,), "Cl": (1,), "Br": (1,), "I": (1,),
}

ATOMIC_NUMBER = {
    "B": 5, "C": 6, "N": 7, "O": 8, "F": 9, "P": 15, "S": 16,
    "Cl": 17, "Br": 35, "I": 53,
}

AROMATIC_ELEMENTS = {"B", "C", "N", "O", "P", "S"}


@dataclass
class Atom:
    element: str
    charge: int = 0
    aromatic: bool = False
    h_count: int = 0
    h_explicit: bool = False  # True when the count came from a bracket atom


@dataclass
class Bond:
    a: int
    b: int
    order: int  # 1, 2, 3, or AROMATIC

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


@dataclass
class Molecule:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)

    def __post_init__(self):
        self._adj: list[list[tuple[int, int]]] | None = None
        self._ring_bonds: set[int] | None = None

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    def adjacency(self) -> list[list[tuple[int, int]]]:
        """Per-atom list of (neighbor index, bond index)."""
        if self._adj is None:
            adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
            for bi, bond in enumerate(self.bonds):
                adj[bond.a].append((bond.b, bi))
                adj[bond.b].append((bond.a, bi))
            self._adj = adj
        return self._adj

    def degree(self, idx: int) -> int:
        return len(self.adjacency()[idx])

    def bond_between(self, a: int, b: int) -> Bond | None:
        for nbr, bi in self.adjacency()[a]:
            if nbr == b:
                return self.bonds[bi]
        return None

    def ring_bond_indices(self) -> set[int]:
        """Bond indices on cycles (non-bridge edges)."""
        if self._ring_bonds is None:
            self._ring_bonds = _non_bridge_edges(self)
        return self._ring_bonds

    def bond_in_ring(self, bond_idx: int) -> bool:
        return bond_idx in self.ring_bond_indices()

    def atom_in_ring(self, idx: int) -> bool:
        return any(bi in self.ring_bond_indices() for _, bi in self.adjacency()[idx])

    def validate(self):
        n = self.n_atoms
        seen = set()
        for bond in self.bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n) or bond.a == bond.b:
                raise ContractError(f"bond endpoints out of range: {bond.a}-{bond.b}")
            key = (min(bond.a, bond.b), max(bond.a, bond.b))
            if key in seen:
                raise ContractError(f"duplicate bond {key}")
            seen.add(key)
        for i, atom in enumerate(self.atoms):
            if atom.h_count < 0:
                raise ContractError(f"negative hydrogen count on atom {i}")

    def copy(self) -> "Molecule":
        return Molecule([replace(a) for a in self.atoms], [replace(b) for b in self.bonds])


def _non_bridge_edges(mol: Molecule) -> set[int]:
    """Iterative bridge finding; every non-bridge edge lies on a cycle."""
    n = mol.n_atoms
    adj = mol.adjacency()
    disc = [-1] * n
    low = [0] * n
    bridges: set[int] = set()
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        stack = [(root, -1, iter(adj[root]))]
        disc[root] = low[root] = timer
        timer += 1
        while stack:
            node, parent_bond, it = stack[-1]
            advanced = False
            for nbr, bi in it:
                if bi == parent_bond:
                    continue
                if disc[nbr] == -1:
                    disc[nbr] = low[nbr] = timer
                    timer += 1
                    stack.append((nbr, bi, iter(adj[nbr])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nbr])
            if not advanced:
                stack.pop()
                if stack:
                    pnode, pbond, _ = stack[-1]
                    low[pnode] = min(low[pnode], low[node])
                    if low[node] > disc[pnode]:
                        bridges.add(parent_bond)
    return {bi for bi in range(len(mol.bonds))} - bridges


def _atom_key(atom: Atom) -> tuple:
    return (atom.element, atom.charge, atom.aromatic, atom.h_count)


def isomorphic(a: Molecule, b: Molecule) -> bool:
    """Exact graph isomorphism on (element, charge, aromatic, H count) and bond orders."""
    if a.n_atoms != b.n_atoms or len(a.bonds) != len(b.bonds):
        return False
    if sorted(map(_atom_key, a.atoms)) != sorted(map(_atom_key, b.atoms)):
        return False
    adj_a, adj_b = a.adjacency(), b.adjacency()
    order = _connected_order(a)
    mapping = [-1] * a.n_atoms
    used = [False] * b.n_atoms

    def compatible(ai: int, bi: int) -> bool:
        if _atom_key(a.atoms[ai]) != _atom_key(b.atoms[bi]):
            return False
        if len(adj_a[ai]) != len(adj_b[bi]):
            return False
        for nbr, bond_i in adj_a[ai]:
            if mapping[nbr] != -1:
                other = b.bond_between(bi, mapping[nbr])
                if other is None or other.order != a.bonds[bond_i].order:
                    return False
        return True

    def extend(k: int) -> bool:
        if k == len(order):
            return True
        ai = order[k]
        anchored = [mapping[nbr] for nbr, _ in adj_a[ai] if mapping[nbr] != -1]
        if anchored:
            candidates = [nbr for nbr, _ in adj_b[anchored[0]]]
        else:
            candidates = range(b.n_atoms)
        for bi in candidates:
            if used[bi] or not compatible(ai, bi):
                continue
            mapping[ai] = bi
            used[bi] = True
            if extend(k + 1):
                return True
            mapping[ai] = -1
            used[bi] = False
        return False

    return extend(0)


def _connected_order(mol: Molecule) -> list[int]:
    """Visit order where each atom after the first in a component touches a prior one."""
    adj = mol.adjacency()
    seen = [False] * mol.n_atoms
    order = []
    for root in range(mol.n_atoms):
        if seen[root]:
            continue
        queue = [root]
        seen[root] = True
        while queue:
            node = queue.pop(0)
            order.append(node)
            for nbr, _ in adj[node]:
                if not seen[nbr]:
                    seen[nbr] = True
                    queue.append(nbr)
    return order
