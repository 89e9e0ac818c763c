"""Shared toy corpus and helpers for the test suite."""

from __future__ import annotations

import numpy as np

# 50 small molecules within the supported grammar subset
TOY_CORPUS = [
    "CCO", "CCN", "CCC", "CC(C)O", "CC(=O)C", "c1ccccc1", "Cc1ccccc1", "CCc1ccccc1",
    "Oc1ccccc1", "Nc1ccccc1", "c1ccncc1", "Cc1ccncc1", "c1ccoc1", "c1ccsc1", "c1cc[nH]c1",
    "O=c1ccc2ccccc2o1", "O=c1ccc2ccc(O)cc2o1", "Nc1ccc2ccccc2c1", "c1ccc2ccccc2c1",
    "Cc1ccc2ccccc2c1", "c1ccc2[nH]cnc2c1", "c1ccc2ncccc2c1", "c1ccc2[nH]ccc2c1",
    "CC(=O)Nc1ccccc1", "COc1ccccc1", "CN(C)c1ccccc1", "Clc1ccccc1", "Fc1ccccc1",
    "Brc1ccccc1", "N#Cc1ccccc1", "O=Cc1ccccc1", "OC(=O)c1ccccc1", "CCOC(=O)c1ccccc1",
    "Nc1ccc(O)cc1", "Oc1ccc(C=O)cc1", "CN(C)c1ccc(C=O)cc1", "c1cnc2[nH]ccc2c1",
    "Cc1cccc(C)c1", "CCOc1ccccc1", "CSc1ccccc1", "OCc1ccccc1", "NCc1ccccc1",
    "O=C(C)Oc1ccccc1", "c1ccc(-c2ccccc2)cc1", "Cc1ccc(N)cc1", "Oc1cccc2ccccc12",
    "CC(C)(C)c1ccccc1", "O=C1c2ccccc2C(=O)N1C", "CN1C(=O)c2ccccc2C1=O", "Cn1cnc2ccccc21",
]

# optimization-settings starting molecules and solvents
START_GLOBAL = "CCc1ccc(Nc2ccc3ccccc3n2)cc1"
START_FRAGMENT = "c1ccc2[nH]cnc2c1"
START_PERMEABILITY = "O=C(O)c1ccccc1-c1c2ccc(=O)cc-2oc2cc(O)ccc12"
SOLVENT_GLOBAL = "CCO"
SOLVENT_FRAGMENT = "ClC(Cl)Cl"
SOLVENT_PERMEABILITY = "O"

ROUND_TRIP_CORPUS = TOY_CORPUS + [
    START_GLOBAL, START_FRAGMENT, START_PERMEABILITY,
    SOLVENT_GLOBAL, SOLVENT_FRAGMENT, SOLVENT_PERMEABILITY,
    # fluorophore-class exemplars mirroring the pattern table
    "[B-]1(F)(F)n2cccc2C=C3C=CC=[N+]13",            # boron dipyrromethene core
    "O=c1ccc2ccc(N(C)C)cc2o1",                       # aminocoumarin
    "O=C1c2cccc3cccc(c23)C(=O)N1CCO",                # naphthalimide derivative
    "c1cc2ccc3cccc4ccc(c1)c2c34",                    # pyrene
    "CN(C)c1ccc2c(c1)Oc1cc(=[N+](C)C)ccc1C2c1ccccc1",  # rhodamine-like
    "C(c1ccccc1)(c1ccccc1)N(c1ccccc1)c1ccccc1",     # triarylamine-flavored
]


def permute_molecule(mol, perm):
    from fluorgen.chem.mol import Atom, Bond, Molecule

    inv = {old: new for new, old in enumerate(perm)}
    atoms = [Atom(a.element, a.charge, a.aromatic, a.h_count, a.h_explicit)
             for a in (mol.atoms[p] for p in perm)]
    bonds = [Bond(inv[b.a], inv[b.b], b.order) for b in mol.bonds]
    return Molecule(atoms, bonds)


def mann_whitney_one_sided(greater: np.ndarray, lesser: np.ndarray) -> float:
    """Normal-approximation p-value that `greater` stochastically dominates."""
    x = np.asarray(greater, dtype=np.float64)
    y = np.asarray(lesser, dtype=np.float64)
    n1, n2 = x.size, y.size
    combined = np.concatenate([x, y])
    order = np.argsort(combined, kind="stable")
    ranks = np.empty_like(combined)
    ranks[order] = np.arange(1, combined.size + 1, dtype=np.float64)
    # average ties
    sorted_vals = combined[order]
    i = 0
    while i < combined.size:
        j = i
        while j + 1 < combined.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        if j > i:
            ranks[order[i : j + 1]] = (i + 1 + j + 1) / 2.0
        i = j + 1
    u = ranks[:n1].sum() - n1 * (n1 + 1) / 2.0
    mu = n1 * n2 / 2.0
    sigma = np.sqrt(n1 * n2 * (n1 + n2 + 1) / 12.0)
    z = (u - mu) / sigma
    from math import erf, sqrt
    return 0.5 * (1.0 - erf(z / sqrt(2.0)))
