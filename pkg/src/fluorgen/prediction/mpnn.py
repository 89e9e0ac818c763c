"""Message-passing graph encoder with layer-shared weights."""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..autoencoder.featurize import (
    BOND_AROMATIC,
    BOND_SINGLE,
    N_AROM_KINDS,
    N_BOND_KINDS,
    N_CHARGE_KINDS,
    N_ELEMENT_KINDS,
    N_H_KINDS,
    GraphBatch,
    featurize_molecules,
)
from ..nn import Dense, ParamStore
from ..tensor import Tensor

EDGE_EMB_DIM = 8


class MPNN:
    """Sum-aggregated message passing; one weight set reused across depth."""

    def __init__(self, store: ParamStore, name: str, hidden: int, depth: int, rng: np.random.Generator):
        self.hidden = hidden
        self.depth = depth
        self.emb_elem = store.add(f"{name}.emb_elem", 0.1 * rng.standard_normal((N_ELEMENT_KINDS, hidden)))
        self.emb_charge = store.add(f"{name}.emb_charge", 0.1 * rng.standard_normal((N_CHARGE_KINDS, hidden)))
        self.emb_arom = store.add(f"{name}.emb_arom", 0.1 * rng.standard_normal((N_AROM_KINDS, hidden)))
        self.emb_h = store.add(f"{name}.emb_h", 0.1 * rng.standard_normal((N_H_KINDS, hidden)))
        self.emb_bond = store.add(f"{name}.emb_bond", 0.1 * rng.standard_normal((N_BOND_KINDS, EDGE_EMB_DIM)))
        self.msg = Dense(store, f"{name}.msg", hidden + EDGE_EMB_DIM, hidden, rng)
        self.update = Dense(store, f"{name}.update", 2 * hidden, hidden, rng)

    def __call__(self, batch: GraphBatch) -> tuple[Tensor, np.ndarray]:
        """Atom features (B, n, hidden) and the validity mask (B, n)."""
        b, n = batch.elem.shape
        h = (T.embedding(self.emb_elem, batch.elem)
             + T.embedding(self.emb_charge, batch.charge)
             + T.embedding(self.emb_arom, batch.arom)
             + T.embedding(self.emb_h, batch.hcount))
        bond_type = batch.bond_type[:, :n, :n]
        adj = ((bond_type >= BOND_SINGLE) & (bond_type <= BOND_AROMATIC)).astype(np.float64)
        e = T.embedding(self.emb_bond, bond_type)
        adj_t = Tensor(adj[..., None])
        for _ in range(self.depth):
            h_j = T.broadcast_to(T.reshape(h, (b, 1, n, self.hidden)), (b, n, n, self.hidden))
            pair = T.concat([h_j, e], axis=-1)
            msg = T.silu(self.msg(pair)) * adj_t
            m = T.sum_(msg, axis=2)
            h = T.silu(self.update(T.concat([h, m], axis=-1)))
        mask = batch.node_mask[:, :n]
        return h * Tensor(mask[..., None]), mask


def featurize_plain(mols, max_atoms: int = 128) -> GraphBatch:
    """Graph batch without virtual nodes, for the message-passing encoders."""
    return featurize_molecules(mols, p=0, max_atoms=max_atoms)
