"""Denoising training with per-field condition dropout."""

from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from ..errors import ContractError, NumericError
from ..nn import AdamW, cosine_lr
from ..rng import substream
from ..tensor import Tensor
from .dit import DiT, DiTConfig
from .schedule import NoiseSchedule

CONDITION_DROPOUT = 0.1


def train_dit(latents: np.ndarray, cond_values: np.ndarray, cond_mask: np.ndarray,
              config: DiTConfig | None = None, schedule: NoiseSchedule | None = None, *,
              steps: int = 1500, batch_size: int = 32, lr: float = 2e-3, lr_end: float = 2e-4,
              weight_decay: float = 1e-4, dropout: float = CONDITION_DROPOUT,
              seed: int = 0) -> tuple[DiT, dict]:
    """Fit the noise predictor on frozen-encoder latents.

    Loss per sample is the squared Frobenius norm between true and predicted
    noise at a uniformly drawn timestep; each condition field is masked
    independently with the dropout probability during training.
    """
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 3:
        raise ContractError("latents must be (n, P, h)")
    n, p, h = latents.shape
    config = config or DiTConfig(latent_p=p, latent_h=h)
    if (config.latent_p, config.latent_h) != (p, h):
        raise ContractError("latent dims differ from DiT config")
    schedule = schedule or NoiseSchedule.linear(config.t_max)
    if schedule.t_max != config.t_max:
        raise ContractError("schedule length differs from DiT config")
    cond_values = np.asarray(cond_values, dtype=np.float64)
    cond_mask = np.asarray(cond_mask, dtype=np.float64)

    model = DiT(config, seed=seed)
    opt = AdamW(model.store, lr=lr, weight_decay=weight_decay)
    rng = substream(seed, "dit-train")
    history = {"loss": []}
    for step in range(steps):
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        x0 = latents[idx]
        b = x0.shape[0]
        t = rng.integers(1, schedule.t_max + 1, size=b)
        eps = rng.standard_normal(x0.shape)
        ab = schedule.alpha_bar[t][:, None, None]
        x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
        keep = (rng.random((b, len(cond_mask[0]))) >= dropout).astype(np.float64)
        mask = cond_mask[idx] * keep
        with T.tape() as tp:
            eps_hat = model.predict_noise(Tensor(x_t), t, (cond_values[idx], mask))
            diff = eps_hat - Tensor(eps)
            loss = T.mean(T.sum_(diff * diff, axis=(-2, -1)))
            if not math.isfinite(loss.item()):
                raise NumericError(f"diffusion loss became non-finite at step {step}")
            grads = tp.backward(loss)
        opt.step(grads, lr=cosine_lr(step, steps, lr, lr_end))
        history["loss"].append(loss.item())
    return model, history
