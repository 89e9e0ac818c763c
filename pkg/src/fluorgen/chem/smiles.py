"""SMILES subset parser and canonical writer.

Grammar subset: organic-subset atoms (B C N O P S F Cl Br I), aromatic
lowercase b c n o p s, bracket atoms with explicit H count and charge,
bond symbols - = # :, branches, ring closures (digits and %nn). No
stereochemistry, no isotopes, no multi-fragment dots. Aromaticity is taken
from the notation; no perception is attempted.

Implicit hydrogens fill the smallest allowed valence. Aromatic bonds count
one toward the valence sum; an aromatic B/C/N/P atom with no exocyclic
double/triple bond contributes one extra unit for its delocalized bond when
room remains. Bracket atoms carry their written H count and are exempt from
valence checking.
"""

from __future__ import annotations

from ..errors import ParseError
from .mol import AROMATIC, AROMATIC_ELEMENTS, VALENCES, Atom, Bond, Molecule

ORGANIC = {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"}
AROMATIC_TOKENS = {"b": "B", "c": "C", "n": "N", "o": "O", "p": "P", "s": "S"}
_BOND_CHARS = {"-": 1, "=": 2, "#": 3, ":": AROMATIC}


def _implicit_h(element: str, aromatic: bool, orders: list[int], pos: int) -> int:
    total = sum(1 if o == AROMATIC else o for o in orders)
    if aromatic:
        if element not in AROMATIC_ELEMENTS:
            raise ParseError(f"element {element} cannot be aromatic", pos)
        has_multiple = any(o in (2, 3) for o in orders)
        if element in ("B", "C", "N", "P") and not has_multiple and VALENCES[element][0] - total >= 1:
            total += 1
    for valence in VALENCES[element]:
        if total <= valence:
            return valence - total
    raise ParseError(f"valence violation on {element} (bond order sum {total})", pos)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.atoms: list[Atom] = []
        self.bracket: list[bool] = []
        self.positions: list[int] = []
        self.bonds: list[Bond] = []
        self.bond_keys: set[tuple[int, int]] = set()

    def error(self, message: str, pos: int | None = None):
        raise ParseError(message, self.pos if pos is None else pos)

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def add_bond(self, a: int, b: int, order: int, pos: int):
        if a == b:
            self.error("ring closure back to the same atom", pos)
        key = (min(a, b), max(a, b))
        if key in self.bond_keys:
            self.error("duplicate bond", pos)
        self.bond_keys.add(key)
        self.bonds.append(Bond(a, b, order))

    def resolve_order(self, explicit: int | None, a: int, b: int, pos: int) -> int:
        if explicit is None:
            if self.atoms[a].aromatic and self.atoms[b].aromatic:
                return AROMATIC
            return 1
        if explicit == AROMATIC and not (self.atoms[a].aromatic and self.atoms[b].aromatic):
            self.error("':' bond requires aromatic atoms on both ends", pos)
        return explicit

    def parse_bracket(self) -> int:
        start = self.pos
        self.pos += 1  # consume '['
        text = self.text
        if self.pos < len(text) and text[self.pos].isdigit():
            self.error("isotopes are not supported", self.pos)
        aromatic = False
        if self.pos < len(text) and text[self.pos] in AROMATIC_TOKENS:
            # lowercase aromatic symbol; 'se'-style two-letter aromatics unsupported
            element = AROMATIC_TOKENS[text[self.pos]]
            aromatic = True
            self.pos += 1
        else:
            if self.pos >= len(text) or not text[self.pos].isupper():
                self.error("expected element symbol in bracket atom", self.pos)
            element = text[self.pos]
            self.pos += 1
            if self.pos < len(text) and text[self.pos].islower() and element + text[self.pos] in ORGANIC:
                element += text[self.pos]
                self.pos += 1
        if element not in ORGANIC:
            self.error(f"unknown atom token {element!r}", start)
        if self.peek() == "@":
            self.error("stereochemistry is not supported", self.pos)
        h_count = 0
        if self.peek() == "H":
            self.pos += 1
            h_count = 1
            digits = ""
            while self.peek().isdigit():
                digits += self.peek()
                self.pos += 1
            if digits:
                h_count = int(digits)
        charge = 0
        if self.peek() in "+-":
            sign = 1 if self.peek() == "+" else -1
            symbol = self.peek()
            self.pos += 1
            if self.peek().isdigit():
                digits = ""
                while self.peek().isdigit():
                    digits += self.peek()
                    self.pos += 1
                charge = sign * int(digits)
            else:
                charge = sign
                while self.peek() == symbol:
                    charge += sign
                    self.pos += 1
        if self.peek() != "]":
            self.error("unterminated bracket atom", start)
        self.pos += 1
        self.atoms.append(Atom(element, charge, aromatic, h_count, h_explicit=True))
        self.bracket.append(True)
        self.positions.append(start)
        return len(self.atoms) - 1

    def parse_plain_atom(self) -> int | None:
        text, pos = self.text, self.pos
        two = text[pos : pos + 2]
        if two in ("Cl", "Br"):
            self.atoms.append(Atom(two))
            self.pos += 2
        elif text[pos] in "BCNOPSFI":
            self.atoms.append(Atom(text[pos]))
            self.pos += 1
        elif text[pos] in AROMATIC_TOKENS:
            self.atoms.append(Atom(AROMATIC_TOKENS[text[pos]], aromatic=True))
            self.pos += 1
        else:
            return None
        self.bracket.append(False)
        self.positions.append(pos)
        return len(self.atoms) - 1

    def run(self) -> Molecule:
        text = self.text
        if not text:
            self.error("empty SMILES", 0)
        prev: int | None = None
        pending: int | None = None
        pending_pos = 0
        stack: list[tuple[int, int]] = []
        open_rings: dict[int, tuple[int, int | None, int]] = {}

        while self.pos < len(text):
            ch = text[self.pos]
            if ch in _BOND_CHARS:
                if pending is not None:
                    self.error("two consecutive bond symbols", self.pos)
                pending = _BOND_CHARS[ch]
                pending_pos = self.pos
                self.pos += 1
                continue
            if ch in "/\\":
                self.error("stereo bonds are not supported", self.pos)
            if ch == ".":
                self.error("multi-fragment SMILES are not supported", self.pos)
            if ch == "(":
                if prev is None:
                    self.error("branch before any atom", self.pos)
                if pending is not None:
                    self.error("bond symbol before '('", self.pos)
                stack.append((prev, self.pos))
                self.pos += 1
                continue
            if ch == ")":
                if not stack:
                    self.error("unbalanced ')'", self.pos)
                if pending is not None:
                    self.error("dangling bond symbol before ')'", pending_pos)
                prev, _ = stack.pop()
                self.pos += 1
                continue
            if ch.isdigit() or ch == "%":
                if prev is None:
                    self.error("ring closure before any atom", self.pos)
                mark_pos = self.pos
                if ch == "%":
                    if self.pos + 2 >= len(text) + 1 or not text[self.pos + 1 : self.pos + 3].isdigit():
                        self.error("'%' ring closure needs two digits", self.pos)
                    number = int(text[self.pos + 1 : self.pos + 3])
                    self.pos += 3
                else:
                    number = int(ch)
                    self.pos += 1
                if number in open_rings:
                    other, other_order, other_pos = open_rings.pop(number)
                    if pending is not None and other_order is not None and pending != other_order:
                        self.error("conflicting ring closure bond orders", mark_pos)
                    explicit = pending if pending is not None else other_order
                    order = self.resolve_order(explicit, prev, other, mark_pos)
                    self.add_bond(other, prev, order, mark_pos)
                else:
                    open_rings[number] = (prev, pending, mark_pos)
                pending = None
                continue
            if ch == "[":
                idx = self.parse_bracket()
            else:
                atom_pos = self.pos
                idx = self.parse_plain_atom()
                if idx is None:
                    self.error(f"unknown atom token {ch!r}", atom_pos)
            if prev is not None:
                order = self.resolve_order(pending, prev, idx, self.positions[idx])
                self.add_bond(prev, idx, order, self.positions[idx])
            elif pending is not None:
                self.error("bond symbol before first atom", pending_pos)
            pending = None
            prev = idx

        if stack:
            self.error("unbalanced '('", stack[-1][1])
        if pending is not None:
            self.error("dangling bond symbol", pending_pos)
        if open_rings:
            number, (_, _, pos) = sorted(open_rings.items())[0]
            self.error(f"unresolved ring closure %{number}" if number > 9 else f"unresolved ring closure {number}", pos)

        mol = Molecule(self.atoms, self.bonds)
        orders: list[list[int]] = [[] for _ in self.atoms]
        for bond in self.bonds:
            orders[bond.a].append(bond.order)
            orders[bond.b].append(bond.order)
        for i, atom in enumerate(self.atoms):
            if self.bracket[i]:
                if atom.aromatic and atom.element not in AROMATIC_ELEMENTS:
                    self.error(f"element {atom.element} cannot be aromatic", self.positions[i])
                continue
            atom.h_count = _implicit_h(atom.element, atom.aromatic, orders[i], self.positions[i])
        mol.validate()
        return mol


def parse_smiles(text: str) -> Molecule:
    """Parse a SMILES string from the supported subset into a Molecule."""
    return _Parser(text).run()


# ---------------------------------------------------------------------------
# canonical writer

_MAX_LEAVES = 20000


def _initial_invariants(mol: Molecule) -> list[tuple]:
    ring = mol.ring_bond_indices()
    out = []
    for i, atom in enumerate(mol.atoms):
        in_ring = any(bi in ring for _, bi in mol.adjacency()[i])
        out.append((atom.element, atom.charge, atom.aromatic, atom.h_count, mol.degree(i), in_ring))
    return out


def _refine(mol: Molecule, ranks: list[int]) -> list[int]:
    adj = mol.adjacency()
    n = mol.n_atoms
    while True:
        keys = []
        for i in range(n):
            nbrs = sorted((mol.bonds[bi].order, ranks[j]) for j, bi in adj[i])
            keys.append((ranks[i], tuple(nbrs)))
        sorted_keys = sorted(set(keys))
        index = {k: r for r, k in enumerate(sorted_keys)}
        new_ranks = [index[k] for k in keys]
        if new_ranks == ranks:
            return ranks
        ranks = new_ranks


def _canonical_labels(mol: Molecule) -> list[int]:
    """Discrete atom labeling invariant to input atom order.

    Iterative refinement, then individualization of the first tied class;
    among the discrete labelings reached, the one generating the smallest
    SMILES string wins (resolved by the caller).
    """
    inv = _initial_invariants(mol)
    index = {k: r for r, k in enumerate(sorted(set(inv)))}
    ranks = _refine(mol, [index[k] for k in inv])
    return ranks


def _discrete_labelings(mol: Molecule, ranks: list[int], budget: list[int]) -> list[list[int]]:
    n = mol.n_atoms
    counts: dict[int, list[int]] = {}
    for i, r in enumerate(ranks):
        counts.setdefault(r, []).append(i)
    tied = [r for r, members in sorted(counts.items()) if len(members) > 1]
    if not tied:
        return [ranks]
    members = counts[tied[0]]
    out = []
    for chosen in members:
        budget[0] -= 1
        if budget[0] < 0:
            raise ParseError("canonicalization budget exceeded", 0)
        bumped = [2 * r for r in ranks]
        bumped[chosen] -= 1
        index = {k: r for r, k in enumerate(sorted(set(bumped)))}
        refined = _refine(mol, [index[k] for k in bumped])
        out.extend(_discrete_labelings(mol, refined, budget))
    return out


def _emit_from_labels(mol: Molecule, labels: list[int]) -> str:
    adj = mol.adjacency()
    n = mol.n_atoms
    root = labels.index(min(labels))
    parent = {root: (-1, -1)}
    visited = {root}
    tree: dict[int, list[int]] = {i: [] for i in range(n)}
    closures: dict[int, list[tuple[int, int]]] = {i: [] for i in range(n)}  # atom -> [(digit, bond_idx)]

    # DFS in label order, collecting tree edges and ring closures
    seen_bonds = set()
    next_digit = [1]

    def take_digit() -> int:
        d = next_digit[0]
        next_digit[0] += 1
        return d

    order_cache: dict[int, list[tuple[int, int]]] = {}

    def nbrs_sorted(i: int):
        if i not in order_cache:
            order_cache[i] = sorted(adj[i], key=lambda p: labels[p[0]])
        return order_cache[i]

    def walk(node: int):
        for nbr, bi in nbrs_sorted(node):
            if bi in seen_bonds:
                continue
            if nbr in visited:
                seen_bonds.add(bi)
                digit = take_digit()
                closures[node].append((digit, bi))
                closures[nbr].append((digit, bi))
            else:
                seen_bonds.add(bi)
                visited.add(nbr)
                tree[node].append(nbr)
                parent[nbr] = (node, bi)
                walk(nbr)

    import sys

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * n + 100))
    try:
        walk(root)
    finally:
        sys.setrecursionlimit(old_limit)

    def bond_token(order: int, a: int, b: int) -> str:
        if order == AROMATIC:
            return ""
        if order == 1:
            if mol.atoms[a].aromatic and mol.atoms[b].aromatic:
                return "-"
            return ""
        return {2: "=", 3: "#"}[order]

    def atom_token(i: int) -> str:
        atom = mol.atoms[i]
        orders = [mol.bonds[bi].order for _, bi in adj[i]]
        try:
            implied = _implicit_h(atom.element, atom.aromatic, orders, 0)
        except ParseError:
            implied = -1
        symbol = atom.element.lower() if atom.aromatic else atom.element
        if atom.charge == 0 and implied == atom.h_count and atom.element in ORGANIC:
            return symbol
        h = "" if atom.h_count == 0 else ("H" if atom.h_count == 1 else f"H{atom.h_count}")
        if atom.charge == 0:
            q = ""
        elif atom.charge == 1:
            q = "+"
        elif atom.charge == -1:
            q = "-"
        else:
            q = f"{'+' if atom.charge > 0 else '-'}{abs(atom.charge)}"
        return f"[{symbol}{h}{q}]"

    out: list[str] = []

    def emit(node: int):
        out.append(atom_token(node))
        for digit, bi in sorted(closures[node]):
            bond = mol.bonds[bi]
            out.append(bond_token(bond.order, bond.a, bond.b))
            out.append(str(digit) if digit < 10 else f"%{digit:02d}")
        children = tree[node]
        for k, child in enumerate(children):
            _, bi = parent[child]
            bond = mol.bonds[bi]
            token = bond_token(bond.order, node, child)
            if k < len(children) - 1:
                out.append("(")
                out.append(token)
                emit(child)
                out.append(")")
            else:
                out.append(token)
                emit(child)

    sys.setrecursionlimit(max(old_limit, 4 * n + 100))
    try:
        emit(root)
    finally:
        sys.setrecursionlimit(old_limit)
    return "".join(out)


def write_smiles(mol: Molecule) -> str:
    """Deterministic canonical SMILES; round-trips to an isomorphic graph."""
    if mol.n_atoms == 0:
        raise ParseError("cannot write an empty molecule", 0)
    mol.validate()
    ranks = _canonical_labels(mol)
    budget = [_MAX_LEAVES]
    candidates = _discrete_labelings(mol, ranks, budget)
    return min(_emit_from_labels(mol, labels) for labels in candidates)
