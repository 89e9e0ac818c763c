"""Noise-prediction transformer with adaptive layer normalization.

Latent rows are the tokens. Timestep and prompt embeddings are summed into
a conditioning vector; each block modulates a gain-free LayerNorm with
regressed scale (1 + eta) and shift (zeta). Modulation regressors and the
output head start at zero, so an untrained model is exactly LayerNorm
blocks predicting zero noise.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import tensor as T
from ..errors import ContractError
from ..nn import Dense, GatedTransition, LayerNorm, ParamStore, attention
from ..rng import substream
from ..tensor import Tensor
from .conditioning import CONDITION_FIELDS, Condition, rbf_embed


def adaln(h: Tensor, eta: Tensor, zeta: Tensor) -> Tensor:
    """eta * LayerNorm(h) + zeta with a parameter-free LayerNorm."""
    dim = h.shape[-1]
    base = T.layer_norm(h, Tensor(np.ones(dim)), Tensor(np.zeros(dim)))
    return base * eta + zeta


@dataclass
class DiTConfig:
    latent_p: int = 8
    latent_h: int = 16
    width: int = 128
    layers: int = 4
    heads: int = 4
    k_rbf: int = 64
    t_max: int = 200

    @classmethod
    def full_scale(cls, latent_p: int = 16, latent_h: int = 32) -> "DiTConfig":
        return cls(latent_p=latent_p, latent_h=latent_h, width=512, layers=12,
                   heads=16, k_rbf=256, t_max=1000)


class DiT:
    def __init__(self, config: DiTConfig, seed: int = 0):
        if config.width % config.heads:
            raise ContractError("width must divide head count")
        self.config = config
        self.store = ParamStore()
        rng = substream(seed, "dit-init")
        s, cfg = self.store, config
        w = cfg.width

        self.token_in = Dense(s, "dit.token_in", cfg.latent_h, w, rng)
        self.pos = s.add("dit.pos", 0.1 * rng.standard_normal((cfg.latent_p, w)))
        self.t_table = _sinusoidal(cfg.t_max + 1, w)
        self.t_mlp = Dense(s, "dit.t_mlp", w, w, rng)
        # each present field adds a zero-initialized delta on top of its null
        # embedding, so an untrained (or dropout-starved) prompt path is a no-op
        self.field_in = [Dense(s, f"dit.cond.{name}", cfg.k_rbf, w, rng, zero_init=True)
                         for name in CONDITION_FIELDS]
        self.null_emb = s.add("dit.cond.null", 0.1 * rng.standard_normal((len(CONDITION_FIELDS), w)))
        self.cond_mlp = Dense(s, "dit.cond_mlp", w, w, rng)

        self.layers = []
        for l in range(cfg.layers):
            pre = f"dit.layer{l}"
            self.layers.append({
                "mod_attn": Dense(s, f"{pre}.mod_attn", w, 2 * w, rng, zero_init=True),
                "q": Dense(s, f"{pre}.q", w, w, rng),
                "k": Dense(s, f"{pre}.k", w, w, rng),
                "v": Dense(s, f"{pre}.v", w, w, rng),
                "out": Dense(s, f"{pre}.out", w, w, rng),
                "mod_ffn": Dense(s, f"{pre}.mod_ffn", w, 2 * w, rng, zero_init=True),
                "ffn": GatedTransition(s, f"{pre}.ffn", w, 2 * w, rng),
            })
        self.ln_final = LayerNorm(s, "dit.ln_final", w)
        self.head = Dense(s, "dit.head", w, cfg.latent_h, rng, zero_init=True)

    def _condition_vector(self, t: np.ndarray, values: np.ndarray, mask: np.ndarray) -> Tensor:
        cfg = self.config
        b = t.shape[0]
        c = Tensor(self.t_table[t])
        c = T.silu(self.t_mlp(c))
        for j, _ in enumerate(CONDITION_FIELDS):
            emb_rows = np.stack([rbf_embed(values[i, j], cfg.k_rbf) for i in range(b)])
            present = mask[:, j : j + 1]
            delta = self.field_in[j](Tensor(emb_rows)) * Tensor(present)
            c = c + self.null_emb[j : j + 1, :] + delta
        return T.silu(self.cond_mlp(c))

    def predict_noise(self, x_t: Tensor, t, cond: Condition | tuple) -> Tensor:
        """Noise estimate with the same shape as x_t (B, P, h).

        cond is a Condition applied to the whole batch, or a (values, mask)
        pair of (B, 5) arrays for per-sample prompts.
        """
        cfg = self.config
        if x_t.shape[-2:] != (cfg.latent_p, cfg.latent_h):
            raise ContractError(f"latent shape {x_t.shape} differs from config "
                                f"({cfg.latent_p}, {cfg.latent_h})")
        b = x_t.shape[0]
        t = np.full(b, t, dtype=np.intp) if np.isscalar(t) else np.asarray(t, dtype=np.intp)
        if isinstance(cond, Condition):
            values = np.tile(cond.values, (b, 1))
            mask = np.tile(cond.mask, (b, 1))
        else:
            values, mask = cond
        c = self._condition_vector(t, values, mask)       # (B, w)
        c3 = T.reshape(c, (b, 1, cfg.width))

        h = self.token_in(x_t) + self.pos
        for layer in self.layers:
            m_attn = layer["mod_attn"](c3)
            eta, zeta = m_attn[:, :, : cfg.width] + 1.0, m_attn[:, :, cfg.width :]
            hn = adaln(h, eta, zeta)
            h = h + layer["out"](attention(layer["q"](hn), layer["k"](hn), layer["v"](hn), cfg.heads))
            m_ffn = layer["mod_ffn"](c3)
            eta2, zeta2 = m_ffn[:, :, : cfg.width] + 1.0, m_ffn[:, :, cfg.width :]
            h = h + layer["ffn"](adaln(h, eta2, zeta2))
        return self.head(self.ln_final(h))

    def predict_noise_np(self, x_t: np.ndarray, t, cond) -> np.ndarray:
        return self.predict_noise(Tensor(x_t), t, cond).data

    def state(self) -> dict:
        return {"kind": "dit", "config": asdict(self.config),
                "arrays": {n: t.data for n, t in self.store.items()}}

    @classmethod
    def from_state(cls, state: dict) -> "DiT":
        model = cls(DiTConfig(**state["config"]))
        model.store.load_arrays(state["arrays"])
        return model


def _sinusoidal(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    enc = np.zeros((length, dim))
    enc[:, 0::2] = np.sin(angle[:, 0::2])
    enc[:, 1::2] = np.cos(angle[:, 1::2])
    return enc
