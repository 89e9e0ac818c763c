"""Restricted pattern graphs and substructure matching.

Patterns support element-or-wildcard atoms (with optional aromatic and
charge constraints) and order-or-any bonds. A small text reader accepts the
subset needed by the fluorophore pattern table: [#n]/[*] atoms, bare
organic/aromatic symbols, + and - charges, bonds - = # : ~, branches, ring
closures. Constructs outside the subset (negation, disjunction, in-pattern
H counts, connectivity counts) are dropped to wildcards; every drop is
recorded in the pattern's notes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ContractError, ParseError
from .mol import AROMATIC, ATOMIC_NUMBER, Molecule

_SYMBOL_BY_NUMBER = {v: k for k, v in ATOMIC_NUMBER.items()}
_PAT_BONDS = {"-": 1, "=": 2, "#": 3, ":": AROMATIC, "~": None}
_AROMATIC_LOWER = {"b": "B", "c": "C", "n": "N", "o": "O", "p": "P", "s": "S"}

MAX_PATTERN_ATOMS = 64


@dataclass
class PatternAtom:
    element: str | None = None   # None matches any element
    aromatic: bool | None = None # None matches either
    charge: int | None = None    # None matches any charge


@dataclass
class PatternBond:
    a: int
    b: int
    order: int | None = None  # None matches any order


@dataclass
class PatternGraph:
    atoms: list[PatternAtom] = field(default_factory=list)
    bonds: list[PatternBond] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    source: str = ""

    def validate(self):
        if not self.atoms:
            raise ContractError("empty pattern")
        if len(self.atoms) > MAX_PATTERN_ATOMS:
            raise ContractError(f"pattern exceeds {MAX_PATTERN_ATOMS} atoms")
        adj = [[] for _ in self.atoms]
        for bond in self.bonds:
            adj[bond.a].append(bond.b)
            adj[bond.b].append(bond.a)
        seen = {0}
        queue = [0]
        while queue:
            node = queue.pop()
            for nbr in adj[node]:
                if nbr not in seen:
                    seen.add(nbr)
                    queue.append(nbr)
        if len(seen) != len(self.atoms):
            raise ContractError("pattern graph must be connected")


def parse_pattern(text: str) -> PatternGraph:
    """Read a pattern from the restricted text subset."""
    pat = PatternGraph(source=text)
    pos = 0
    prev: int | None = None
    pending: int | None | str = "unset"
    stack: list[int] = []
    open_rings: dict[int, tuple[int, int | None | str]] = {}

    def add_atom(atom: PatternAtom) -> int:
        pat.atoms.append(atom)
        return len(pat.atoms) - 1

    def add_bond(a: int, b: int, order):
        order = None if order == "unset" else order
        pat.bonds.append(PatternBond(a, b, order))

    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch in _PAT_BONDS:
            pending = _PAT_BONDS[ch]
            pos += 1
            continue
        if ch == "(":
            if prev is None:
                raise ParseError("branch before any pattern atom", pos)
            stack.append(prev)
            pos += 1
            continue
        if ch == ")":
            if not stack:
                raise ParseError("unbalanced ')' in pattern", pos)
            prev = stack.pop()
            pos += 1
            continue
        if ch.isdigit() or ch == "%":
            if ch == "%":
                number = int(text[pos + 1 : pos + 3])
                pos += 3
            else:
                number = int(ch)
                pos += 1
            if prev is None:
                raise ParseError("ring closure before any pattern atom", pos)
            if number in open_rings:
                other, other_pending = open_rings.pop(number)
                order = pending if pending != "unset" else other_pending
                add_bond(other, prev, order)
            else:
                open_rings[number] = (prev, pending)
            pending = "unset"
            continue
        if ch == "[":
            end = text.find("]", pos)
            if end < 0:
                raise ParseError("unterminated pattern bracket", pos)
            body = text[pos + 1 : end]
            atom = _bracket_pattern_atom(body, pat.notes, pos)
            idx = add_atom(atom)
            pos = end + 1
        elif text[pos : pos + 2] in ("Cl", "Br"):
            idx = add_atom(PatternAtom(element=text[pos : pos + 2], aromatic=False))
            pos += 2
        elif ch in "BCNOPSFI":
            idx = add_atom(PatternAtom(element=ch, aromatic=False))
            pos += 1
        elif ch in _AROMATIC_LOWER:
            idx = add_atom(PatternAtom(element=_AROMATIC_LOWER[ch], aromatic=True))
            pos += 1
        elif ch == "*":
            idx = add_atom(PatternAtom())
            pos += 1
        else:
            raise ParseError(f"unsupported pattern token {ch!r}", pos)
        if prev is not None:
            add_bond(prev, idx, pending)
        pending = "unset"
        prev = idx

    if open_rings:
        raise ParseError("unresolved pattern ring closure", len(text) - 1)
    if stack:
        raise ParseError("unbalanced '(' in pattern", len(text) - 1)
    pat.validate()
    return pat


def _bracket_pattern_atom(body: str, notes: list[str], pos: int) -> PatternAtom:
    atom = PatternAtom()
    i = 0
    seen_element = False
    while i < len(body):
        ch = body[i]
        if ch == "!":
            notes.append(f"dropped negation '!{body[i + 1 :]}' -> wildcard")
            return PatternAtom()
        if ch == ",":
            notes.append(f"dropped disjunction in '[{body}]' -> wildcard")
            return PatternAtom()
        if ch == "#":
            j = i + 1
            while j < len(body) and body[j].isdigit():
                j += 1
            number = int(body[i + 1 : j])
            symbol = _SYMBOL_BY_NUMBER.get(number)
            if symbol is None:
                notes.append(f"dropped unknown atomic number #{number} -> wildcard element")
            else:
                atom.element = symbol
                seen_element = True
            i = j
            continue
        if ch == "*":
            i += 1
            continue
        if ch == "+":
            atom.charge = (atom.charge or 0) + 1
            i += 1
            continue
        if ch == "-":
            atom.charge = (atom.charge or 0) - 1
            i += 1
            continue
        if ch == "H" and seen_element:
            j = i + 1
            while j < len(body) and body[j].isdigit():
                j += 1
            notes.append(f"dropped in-pattern H count 'H{body[i + 1 : j]}' in '[{body}]'")
            i = j
            continue
        if ch.isupper():
            sym = ch
            if i + 1 < len(body) and body[i + 1].islower() and sym + body[i + 1] in ATOMIC_NUMBER:
                sym += body[i + 1]
                i += 1
            if sym in ATOMIC_NUMBER:
                atom.element = sym
                atom.aromatic = False
                seen_element = True
            else:
                notes.append(f"dropped unsupported primitive '{sym}' in '[{body}]'")
            i += 1
            continue
        if ch in _AROMATIC_LOWER:
            atom.element = _AROMATIC_LOWER[ch]
            atom.aromatic = True
            seen_element = True
            i += 1
            continue
        notes.append(f"dropped unsupported primitive {ch!r} in '[{body}]'")
        i += 1
    return atom


def _atom_matches(pattern: PatternAtom, mol: Molecule, idx: int) -> bool:
    atom = mol.atoms[idx]
    if pattern.element is not None and atom.element != pattern.element:
        return False
    if pattern.aromatic is not None and atom.aromatic != pattern.aromatic:
        return False
    if pattern.charge is not None and atom.charge != pattern.charge:
        return False
    return True


def _bond_matches(pattern: PatternBond, order: int) -> bool:
    return pattern.order is None or pattern.order == order


def substructure_match(mol: Molecule, pattern: PatternGraph) -> tuple[bool, dict[int, int] | None]:
    """Injective embedding of the pattern into the molecule.

    Returns (found, mapping) where mapping sends pattern atom indices to
    molecule atom indices for the first embedding found.
    """
    pattern.validate()
    if len(pattern.atoms) > mol.n_atoms:
        return False, None
    pat_adj: list[list[tuple[int, int]]] = [[] for _ in pattern.atoms]
    for bi, bond in enumerate(pattern.bonds):
        pat_adj[bond.a].append((bond.b, bi))
        pat_adj[bond.b].append((bond.a, bi))

    # visit pattern atoms so each one (after the first) touches a mapped atom
    order: list[int] = [0]
    seen = {0}
    frontier = [0]
    while frontier:
        node = frontier.pop(0)
        for nbr, _ in pat_adj[node]:
            if nbr not in seen:
                seen.add(nbr)
                order.append(nbr)
                frontier.append(nbr)

    adj = mol.adjacency()
    mapping: dict[int, int] = {}
    used = [False] * mol.n_atoms

    def candidates(p_idx: int):
        anchors = [(nbr, bi) for nbr, bi in pat_adj[p_idx] if nbr in mapping]
        if anchors:
            anchor_nbr, _ = anchors[0]
            return [m for m, _ in adj[mapping[anchor_nbr]]]
        return range(mol.n_atoms)

    def feasible(p_idx: int, m_idx: int) -> bool:
        if used[m_idx] or not _atom_matches(pattern.atoms[p_idx], mol, m_idx):
            return False
        for nbr, bi in pat_adj[p_idx]:
            if nbr in mapping:
                bond = mol.bond_between(m_idx, mapping[nbr])
                if bond is None or not _bond_matches(pattern.bonds[bi], bond.order):
                    return False
        return True

    def extend(k: int) -> bool:
        if k == len(order):
            return True
        p_idx = order[k]
        for m_idx in candidates(p_idx):
            if feasible(p_idx, m_idx):
                mapping[p_idx] = m_idx
                used[m_idx] = True
                if extend(k + 1):
                    return True
                del mapping[p_idx]
                used[m_idx] = False
        return False

    if extend(0):
        return True, dict(mapping)
    return False, None


# ---------------------------------------------------------------------------
# fluorophore pattern table (restricted transcription)
#
# Constructs outside the subset are degraded on load and the degradation is
# kept in each pattern's notes ([!#6] and [#7,#8] become wildcards, [#7H]
# loses its H requirement, the [X] halogen placeholders become wildcards).

FLUOROPHORE_PATTERN_TEXT: dict[str, list[str]] = {
    "bodipy": [
        "[X]-[B]1(-[X])-[*]2~[#6]~[#6]~[#6]~[#6]~2~[#6]~[#6]2~[*]-1~[#6]~[#6]~[#6]~2",
    ],
    "coumarin": [
        "[!#6]=[#6]1~[#6]~[#6]~[#6]2:[#6]:[#6]:[#6]:[#6]:[#6]:2~[!#6]~1",
    ],
    "cyanine": [
        "[*]-[#7+]1=[#6](-[#6]=[#6]2-[#7](-[*])~[#6]~[#6]~[#6]~2)~[#6]~[#6]~[#6]~1",
        "[*]-[#7+]1=[#6](-[#6]=[#6]-[#6]=[#6]2-[#7](-[*])~[#6]~[#6]~[#6]~2)~[#6]~[#6]~[#6]~1",
    ],
    "naphthalimide": [
        "[#8]=[#6]1-[#7,#8]-[#6](=[#8])-[#6]2:[#6]:[#6]:[#6]:[#6]3:[#6]:[#6]:[#6]:[#6]-1:[#6]:2:3",
    ],
    "pyrene": [
        "[#6]12:[#6]:[#6]:[#6]3:[#6]:[#6]:[#6]:[#6]4:[#6]:3:[#6]:1:[#6](:[#6]:[#6]:[#6]:[#6]:2):[#6]:[#6]:4",
    ],
    "porphyrin": [
        "[#6]12:[#6]:[#6]3:[#6]:[#6]:[#6](:[#7H]:3):[#6]:[#6]3:[#7]:[#6](-[#6]=[#6]-3):[#6]:[#6]3:[#7H]:[#6](:[#6]:[#6](:[#7]:1)-[#6]=[#6]-2):[#6]:[#6]:3",
    ],
    "rhodamine_fluorescein": [
        "[#6]1:[#6]:[#6]:[#6]2:[#6](:[#6]:1)~[#8]~[#6]1~[#6]~[#6]~[#6]~[#6]~[#6]~1~[#6]~2",
        "[#6]1:[#6]:[#6]2:[#8]:[#6]3:[#6]:[#6]:[#6]:[#6]:[#6]:3:[#6]:[#6]-2:[#6]:[#6]:1",
        "[#6]1:[#6]:[#6]2:[#8]:[#6]3:[#6]:[#6]:[#6]:[#6]:[#6]:3:[#6]:[#6]:2:[#6]:[#6]:1",
    ],
    "squaraine": [
        "[#8]~[#6]1~[#6]~[#6]~[#6]~1",
    ],
    "triphenylamine": [
        "[#6]1(-[#7])(~[#6]2~[#6]~[#6]~[#6]~[#6]~2)-[#6]2:[#6]:[#6]:[#6]:[#6]:[#6]:2:[#6]:[#6]:[#6]:1",
    ],
}

# manual transcription adjustments, beyond the automatic wildcard degradations
PATTERN_TRANSCRIPTION_NOTES = {
    "coumarin": "fused aromatic ring restored to six members",
    "naphthalimide": "imide-ring closure to the carbonyl carbon written as a single bond "
                     "so the pattern matches standard (non-aromatic imide) notation",
    "rhodamine_fluorescein": "bridged-xanthene variant rewritten with wildcard bonds on the "
                             "central and distal rings; a structurally inconsistent source "
                             "alternative was replaced",
    "*": "unannotated bonds in pattern text match any bond order",
}

# classes held out by the fluorophore dataset split
FLUOROPHORE_TEST_CLASSES = ("bodipy", "coumarin", "naphthalimide")

_cache: dict[str, list[PatternGraph]] = {}


def fluorophore_patterns(name: str) -> list[PatternGraph]:
    if name not in FLUOROPHORE_PATTERN_TEXT:
        raise ContractError(f"unknown fluorophore class {name!r}")
    if name not in _cache:
        _cache[name] = [parse_pattern(text) for text in FLUOROPHORE_PATTERN_TEXT[name]]
    return _cache[name]


def matches_any_fluorophore(mol: Molecule, classes=FLUOROPHORE_TEST_CLASSES) -> bool:
    for name in classes:
        for pattern in fluorophore_patterns(name):
            found, _ = substructure_match(mol, pattern)
            if found:
                return True
    return False
