"""Multi-task training for the property predictors."""

from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from ..autoencoder.model import Autoencoder
from ..chem.data import DatasetRecord
from ..errors import ContractError, NumericError
from ..nn import AdamW, cosine_lr
from ..normalization import PROPERTY_NAMES, normalize_property
from ..rng import substream
from ..tensor import Tensor
from .heads import AGP, LSP, PredictorConfig, solvent_molecule
from .metrics import multitask_loss


def record_targets(records: list[DatasetRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Normalized label matrix (n, 4) and presence mask (n, 4)."""
    labels = np.zeros((len(records), 4))
    mask = np.zeros((len(records), 4))
    for i, rec in enumerate(records):
        for j, name in enumerate(PROPERTY_NAMES):
            v = getattr(rec, name)
            if v is not None:
                labels[i, j] = normalize_property(name, v)
                mask[i, j] = 1.0
    return labels, mask


def train_predictor(records: list[DatasetRecord], kind: str = "agp", *,
                    autoencoder: Autoencoder | None = None,
                    config: PredictorConfig | None = None,
                    steps: int = 600, batch_size: int = 16, lr: float = 2e-3,
                    seed: int = 0) -> AGP | LSP:
    """Fit an AGP or LSP on dataset records with masked multi-task MSE."""
    if not records:
        raise ContractError("empty training records")
    config = config or PredictorConfig()
    mols = [r.molecule() for r in records]
    solvents = [solvent_molecule(r.solvent_smiles) for r in records]
    labels, mask = record_targets(records)

    if kind == "agp":
        model = AGP(config, seed=seed)
    elif kind == "lsp":
        if autoencoder is None:
            raise ContractError("the latent surrogate needs a frozen autoencoder")
        model = LSP(config, autoencoder.config.p, autoencoder.config.h, seed=seed)
        latents = np.stack([autoencoder.encode(m) for m in mols])
    else:
        raise ContractError(f"unknown predictor kind {kind!r}")

    opt = AdamW(model.store, lr=lr, weight_decay=1e-5)
    rng = substream(seed, "predictor-train", kind)
    n = len(records)
    for step in range(steps):
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        with T.tape() as tp:
            if kind == "agp":
                preds, _ = model.predict_batch([mols[i] for i in idx], [solvents[i] for i in idx])
            else:
                preds = model.predict_latent(Tensor(latents[idx]), [solvents[i] for i in idx])
            loss = multitask_loss(preds, labels[idx], mask[idx])
            if not math.isfinite(loss.item()):
                raise NumericError(f"predictor loss became non-finite at step {step}")
            grads = tp.backward(loss)
        opt.step(grads, lr=cosine_lr(step, steps, lr, lr / 10))
    return model
