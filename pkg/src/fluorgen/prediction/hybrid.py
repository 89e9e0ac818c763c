"""Oracle bias calibration: per-molecule dynamic scale/shift factors.

A message-passing network over the molecule and solvent graphs regresses
(w, b) pairs for absorption and emission; calibrated wavelengths are
w * raw + b. Heads start at the identity (w = 1, b = 0).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import tensor as T
from ..chem.mol import Molecule
from ..errors import ContractError, NumericError
from ..nn import AdamW, Dense, ParamStore, cosine_lr
from ..rng import substream
from ..tensor import Tensor
from .mpnn import MPNN, featurize_plain


@dataclass
class BiasNetConfig:
    hidden: int = 32
    sol_hidden: int = 16
    depth: int = 3
    head_hidden: int = 32
    max_atoms: int = 128

    @classmethod
    def full_scale(cls) -> "BiasNetConfig":
        return cls(hidden=256, sol_hidden=32, depth=10, head_hidden=256)


class BiasNet:
    def __init__(self, config: BiasNetConfig, seed: int = 0):
        self.config = config
        self.store = ParamStore()
        rng = substream(seed, "biasnet-init")
        self.mol_enc = MPNN(self.store, "bias.mol", config.hidden, config.depth, rng)
        self.sol_enc = MPNN(self.store, "bias.sol", config.sol_hidden, config.depth, rng)
        in_dim = config.hidden + config.sol_hidden
        self.trunk = Dense(self.store, "bias.trunk", in_dim, config.head_hidden, rng)
        # zero-init heads: calibration starts at w=1, b=0
        self.head_w = Dense(self.store, "bias.head_w", config.head_hidden, 2, rng, zero_init=True)
        self.head_b = Dense(self.store, "bias.head_b", config.head_hidden, 2, rng, zero_init=True)

    def factors(self, mols: list[Molecule], solvents: list[Molecule]) -> tuple[Tensor, Tensor]:
        """(w, b) tensors of shape (B, 2), ordered (absorption, emission)."""
        h_mol, m_mol = self.mol_enc(featurize_plain(mols, self.config.max_atoms))
        h_sol, m_sol = self.sol_enc(featurize_plain(solvents, self.config.max_atoms))
        pool_m = T.sum_(h_mol, axis=1) * Tensor(1.0 / np.maximum(m_mol.sum(axis=1, keepdims=True), 1.0))
        pool_s = T.sum_(h_sol, axis=1) * Tensor(1.0 / np.maximum(m_sol.sum(axis=1, keepdims=True), 1.0))
        z = T.silu(self.trunk(T.concat([pool_m, pool_s], axis=1)))
        w = self.head_w(z) + 1.0
        b = self.head_b(z) * 100.0
        return w, b

    def calibrate_batch(self, mols, solvents, raw_wavelengths: np.ndarray) -> Tensor:
        """Calibrated (B, 2) wavelengths from raw (lambda_0_to_max, lambda_0_to_1)."""
        w, b = self.factors(mols, solvents)
        return w * Tensor(np.asarray(raw_wavelengths, dtype=np.float64)) + b

    def state(self) -> dict:
        return {"kind": "biasnet", "config": asdict(self.config),
                "arrays": {n: t.data for n, t in self.store.items()}}

    @classmethod
    def from_state(cls, state: dict) -> "BiasNet":
        model = cls(BiasNetConfig(**state["config"]))
        model.store.load_arrays(state["arrays"])
        return model


def train_bias_net(pairs: list[tuple], config: BiasNetConfig | None = None, *,
                   steps: int = 400, batch_size: int = 16, lr: float = 3e-3,
                   seed: int = 0) -> BiasNet:
    """Fit calibration factors on (mol, solvent, raw (2,), true (2,)) tuples.

    Wavelength residuals are scaled by 1/900 inside the loss so the two
    targets share the optimizer's dynamic range.
    """
    if len(pairs) < 10:
        raise ContractError(f"need at least 10 calibration pairs, got {len(pairs)}")
    config = config or BiasNetConfig()
    model = BiasNet(config, seed=seed)
    opt = AdamW(model.store, lr=lr, weight_decay=1e-5)
    rng = substream(seed, "biasnet-train")
    mols = [p[0] for p in pairs]
    solvents = [p[1] for p in pairs]
    raw = np.array([p[2] for p in pairs], dtype=np.float64)
    true = np.array([p[3] for p in pairs], dtype=np.float64)
    n = len(pairs)
    for step in range(steps):
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        with T.tape() as tp:
            cal = model.calibrate_batch([mols[i] for i in idx], [solvents[i] for i in idx], raw[idx])
            resid = (cal - Tensor(true[idx])) * (1.0 / 900.0)
            loss = T.mean(resid * resid)
            if not math.isfinite(loss.item()):
                raise NumericError(f"bias-net loss became non-finite at step {step}")
            grads = tp.backward(loss)
        opt.step(grads, lr=cosine_lr(step, steps, lr, lr / 10))
    return model
