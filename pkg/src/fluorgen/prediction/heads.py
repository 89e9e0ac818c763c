"""Dual-branch property predictors.

The attentive graph predictor (AGP) runs message passing over molecule and
solvent graphs and pools atoms through per-property learnable-query
cross-attention, exposing the attention weights for interpretation. The
latent surrogate predictor (LSP) regresses properties directly from the
frozen encoder's latent matrix concatenated with mean-pooled solvent
features, so property gradients with respect to the latent are available
to guidance.

Both predict in normalized units; plqy passes through a sigmoid so it
always lands in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import tensor as T
from ..chem.mol import Molecule
from ..chem.smiles import parse_smiles
from ..errors import ContractError
from ..nn import Dense, ParamStore
from ..rng import substream
from ..tensor import Tensor
from .mpnn import MPNN, featurize_plain

N_PROPS = 4
NEG = -1e9


def _squash_plqy(vals: Tensor) -> Tensor:
    parts = [vals[:, 0:1], vals[:, 1:2], vals[:, 2:3], T.sigmoid(vals[:, 3:4])]
    return T.concat(parts, axis=1)


@dataclass
class PredictorConfig:
    hidden: int = 32
    depth: int = 3
    head_hidden: int = 64
    max_atoms: int = 128

    @classmethod
    def full_scale(cls) -> "PredictorConfig":
        return cls(hidden=256, depth=10, head_hidden=256)


class AGP:
    def __init__(self, config: PredictorConfig, seed: int = 0):
        self.config = config
        self.store = ParamStore()
        rng = substream(seed, "agp-init")
        d = config.hidden
        self.mol_enc = MPNN(self.store, "agp.mol", d, config.depth, rng)
        self.sol_enc = MPNN(self.store, "agp.sol", d, config.depth, rng)
        self.queries = self.store.add("agp.queries", 0.1 * rng.standard_normal((N_PROPS, d)))
        self.key = Dense(self.store, "agp.key", d, d, rng)
        self.value = Dense(self.store, "agp.value", d, d, rng)
        self.head_in = [Dense(self.store, f"agp.head{i}.in", d, config.head_hidden, rng) for i in range(N_PROPS)]
        self.head_out = [Dense(self.store, f"agp.head{i}.out", config.head_hidden, 1, rng) for i in range(N_PROPS)]

    def predict_batch(self, mols: list[Molecule], solvents: list[Molecule]) -> tuple[Tensor, np.ndarray]:
        """Normalized property predictions (B, 4) and attention weights (B, 4, atoms)."""
        if len(mols) != len(solvents):
            raise ContractError("molecule/solvent batch size mismatch")
        h_mol, m_mol = self.mol_enc(featurize_plain(mols, self.config.max_atoms))
        h_sol, m_sol = self.sol_enc(featurize_plain(solvents, self.config.max_atoms))
        feats = T.concat([h_mol, h_sol], axis=1)
        mask = np.concatenate([m_mol, m_sol], axis=1)
        k = self.key(feats)
        v = self.value(feats)
        d = self.config.hidden
        logits = T.matmul(k, T.transpose(self.queries, (1, 0)))  # (B, atoms, 4)
        logits = T.transpose(logits, (0, 2, 1)) * (1.0 / math.sqrt(d))
        logits = logits + Tensor(((mask - 1.0) * -NEG)[:, None, :])
        weights = T.softmax(logits, axis=-1)              # (B, 4, atoms)
        pooled = T.matmul(weights, v)                     # (B, 4, d)
        cols = []
        for i in range(N_PROPS):
            f_i = pooled[:, i, :]
            cols.append(self.head_out[i](T.silu(self.head_in[i](f_i))))
        preds = _squash_plqy(T.concat(cols, axis=1))
        return preds, weights.data

    def predict(self, mol: Molecule, solvent: Molecule) -> tuple[np.ndarray, np.ndarray]:
        preds, weights = self.predict_batch([mol], [solvent])
        return preds.data[0], weights[0]

    def state(self) -> dict:
        return {"kind": "agp", "config": asdict(self.config),
                "arrays": {n: t.data for n, t in self.store.items()}}

    @classmethod
    def from_state(cls, state: dict) -> "AGP":
        model = cls(PredictorConfig(**state["config"]))
        model.store.load_arrays(state["arrays"])
        return model


class LSP:
    def __init__(self, config: PredictorConfig, latent_p: int, latent_h: int, seed: int = 0):
        self.config = config
        self.latent_p = latent_p
        self.latent_h = latent_h
        self.store = ParamStore()
        rng = substream(seed, "lsp-init")
        d = config.hidden
        self.sol_enc = MPNN(self.store, "lsp.sol", d, config.depth, rng)
        in_dim = latent_p * latent_h + d
        self.fc1 = Dense(self.store, "lsp.fc1", in_dim, config.head_hidden, rng)
        self.fc2 = Dense(self.store, "lsp.fc2", config.head_hidden, config.head_hidden, rng)
        self.out = Dense(self.store, "lsp.out", config.head_hidden, N_PROPS, rng)

    def predict_latent(self, x: Tensor, solvents: list[Molecule]) -> Tensor:
        """Normalized property predictions (B, 4); differentiable w.r.t. x (B, P, h)."""
        b = x.shape[0]
        if x.shape[1] != self.latent_p or x.shape[2] != self.latent_h:
            raise ContractError(f"latent shape {x.shape[1:]} differs from configured "
                                f"({self.latent_p}, {self.latent_h})")
        h_sol, m_sol = self.sol_enc(featurize_plain(solvents, self.config.max_atoms))
        denom = np.maximum(m_sol.sum(axis=1, keepdims=True), 1.0)
        pooled = T.sum_(h_sol, axis=1) * Tensor(1.0 / denom)
        flat = T.reshape(x, (b, self.latent_p * self.latent_h))
        z = T.concat([flat, pooled], axis=1)
        z = T.silu(self.fc1(z))
        z = T.silu(self.fc2(z))
        return _squash_plqy(self.out(z))

    def predict(self, x_latent: np.ndarray, solvent: Molecule) -> np.ndarray:
        return self.predict_latent(Tensor(x_latent[None]), [solvent]).data[0]

    def state(self) -> dict:
        return {"kind": "lsp", "config": asdict(self.config),
                "latent_p": self.latent_p, "latent_h": self.latent_h,
                "arrays": {n: t.data for n, t in self.store.items()}}

    @classmethod
    def from_state(cls, state: dict) -> "LSP":
        model = cls(PredictorConfig(**state["config"]), state["latent_p"], state["latent_h"])
        model.store.load_arrays(state["arrays"])
        return model


DEFAULT_SOLVENT = "O"


def solvent_molecule(smiles: str | None) -> Molecule:
    return parse_smiles(smiles if smiles else DEFAULT_SOLVENT)
