"""Synthetic physics oracle.

Stands in for the excited-state calculation pipeline: a hidden smooth
ground-truth function of fingerprint-derived features and the solvent
dielectric, plus a molecule-cluster-dependent affine bias and seeded noise
on the raw outputs. Everything is deterministic per (molecule, dielectric,
seed), so calibration experiments are reproducible.
"""

from __future__ import annotations

import numpy as np

from ..chem.fingerprints import morgan_fingerprint
from ..chem.mol import Molecule
from ..chem.smiles import write_smiles
from ..errors import ContractError
from ..rng import substream

N_FEATURES = 8


def fingerprint_features(mol: Molecule) -> np.ndarray:
    """Relative distribution of fingerprint bits across segments.

    Small molecules set only a few dozen of the folded bits, so absolute
    densities barely vary; the per-segment shares carry the structural
    signal. Scaled so typical values spread over [0, 1].
    """
    fp = morgan_fingerprint(mol)
    segments = fp.reshape(N_FEATURES, -1).sum(axis=1)
    return 4.0 * segments / max(int(fp.sum()), 1)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


class SyntheticOracle:
    """Hidden ground truth plus biased raw outputs.

    bias one of:
        "zero"    raw equals truth plus noise
        "affine"  one global scale/shift pair
        "cluster" scale/shift depending on a fingerprint-derived cluster id
    """

    def __init__(self, seed: int = 0, bias: str = "cluster", n_clusters: int = 4,
                 noise_nm: float = 5.0, affine=(1.1, 30.0)):
        if bias not in ("zero", "affine", "cluster"):
            raise ContractError(f"unknown bias mode {bias!r}")
        self.seed = seed
        self.bias = bias
        self.noise_nm = noise_nm
        self.affine = affine
        rng = substream(seed, "oracle-truth")
        self.w_abs = rng.normal(0, 1.2, N_FEATURES)
        self.w_emi = rng.normal(0, 1.2, N_FEATURES)
        self.w_loge = rng.normal(0, 1.0, N_FEATURES)
        self.w_plqy = rng.normal(0, 1.0, N_FEATURES)
        self.w_eps = rng.normal(0, 0.6, 4)
        rng_b = substream(seed, "oracle-bias")
        self.cluster_scale = rng_b.uniform(0.9, 1.25, n_clusters)
        self.cluster_shift = rng_b.uniform(-45.0, 45.0, n_clusters)
        self.n_clusters = n_clusters

    def true_properties(self, mol: Molecule, dielectric: float) -> np.ndarray:
        """(abs_nm, emi_nm, loge, plqy) ground truth; smooth in its features."""
        f = fingerprint_features(mol) - 0.5
        en = dielectric / 100.0
        abs_nm = 330.0 + 340.0 * _sigmoid(f @ self.w_abs + self.w_eps[0] * en)
        emi_nm = abs_nm + 15.0 + 120.0 * _sigmoid(f @ self.w_emi + self.w_eps[1] * en)
        loge = 3.2 + 2.4 * _sigmoid(f @ self.w_loge + self.w_eps[2] * en)
        plqy = _sigmoid(0.8 * (f @ self.w_plqy) + self.w_eps[3] * en)
        return np.array([abs_nm, emi_nm, loge, plqy])

    def cluster_of(self, mol: Molecule) -> int:
        fp = morgan_fingerprint(mol)
        return int(fp[: 64].sum() + 3 * fp[64:160].sum()) % self.n_clusters

    def raw(self, mol: Molecule, dielectric: float) -> np.ndarray:
        """Raw oracle outputs (lambda_0_to_max, lambda_0_to_1, max oscillator strength)."""
        truth = self.true_properties(mol, dielectric)
        if self.bias == "zero":
            scale, shift = 1.0, 0.0
        elif self.bias == "affine":
            scale, shift = self.affine
        else:
            cid = self.cluster_of(mol)
            scale, shift = self.cluster_scale[cid], self.cluster_shift[cid]
        key = write_smiles(mol)
        rng = substream(self.seed, "oracle-noise", key, int(round(dielectric * 1000)))
        noise = rng.normal(0.0, self.noise_nm, 2)
        lam_max = scale * truth[0] + shift + noise[0]
        lam_01 = scale * truth[1] + shift + noise[1]
        oscillator = 10.0 ** (truth[2] - 4.5) * (1.0 + 0.05 * rng.normal())
        return np.array([lam_max, lam_01, oscillator])
