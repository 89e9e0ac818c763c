"""Graph-to-sequence autoencoder.

The encoder updates node features with edge-biased multi-head attention and
gated transitions, refreshes pairwise edge features through a low-rank
outer-product update, and reads the virtual-node rows out as an L2-row-
normalized latent matrix. The decoder is a causal transformer over the
token sequence with the latent rows prepended as prefix positions.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import tensor as T
from ..errors import ContractError
from ..nn import Dense, GatedTransition, LayerNorm, ParamStore, attention
from ..rng import substream
from ..tensor import Tensor
from .featurize import (
    N_AROM_KINDS,
    N_BOND_KINDS,
    N_CHARGE_KINDS,
    N_ELEMENT_KINDS,
    N_H_KINDS,
    GraphBatch,
    featurize_molecules,
)
from .tokenizer import BOS, EOS, PAD, Vocabulary

NEG_INF = -1e9


@dataclass
class AutoencoderConfig:
    d: int = 64            # node feature width
    edge_dim: int = 16
    c: int = 16            # outer-product intermediate width
    p: int = 8             # virtual node count
    h: int = 16            # latent width per virtual node
    n_enc: int = 2
    heads: int = 4
    d_dec: int = 64
    n_dec: int = 2
    dec_heads: int = 4
    max_atoms: int = 128
    max_len: int = 96      # token positions, excluding the latent prefix
    latent_reg: float = 1e-4

    @classmethod
    def full_scale(cls) -> "AutoencoderConfig":
        return cls(d=256, edge_dim=128, c=32, p=16, h=32, n_enc=3, heads=8,
                   d_dec=384, n_dec=8, dec_heads=12)


class Autoencoder:
    def __init__(self, config: AutoencoderConfig, vocab: Vocabulary, seed: int = 0):
        if config.p < 1 or config.h < 1:
            raise ContractError("latent dims must be positive")
        if config.d % config.heads or config.d_dec % config.dec_heads:
            raise ContractError("width must divide head count")
        self.config = config
        self.vocab = vocab
        self.store = ParamStore()
        rng = substream(seed, "autoencoder-init")
        s, cfg = self.store, config

        self.emb_elem = s.add("enc.emb_elem", 0.1 * rng.standard_normal((N_ELEMENT_KINDS, cfg.d)))
        self.emb_charge = s.add("enc.emb_charge", 0.1 * rng.standard_normal((N_CHARGE_KINDS, cfg.d)))
        self.emb_arom = s.add("enc.emb_arom", 0.1 * rng.standard_normal((N_AROM_KINDS, cfg.d)))
        self.emb_h = s.add("enc.emb_h", 0.1 * rng.standard_normal((N_H_KINDS, cfg.d)))
        self.emb_virt = s.add("enc.emb_virt", 0.1 * rng.standard_normal((cfg.p, cfg.d)))
        self.emb_bond = s.add("enc.emb_bond", 0.1 * rng.standard_normal((N_BOND_KINDS, cfg.edge_dim)))

        self.enc_layers = []
        for l in range(cfg.n_enc):
            pre = f"enc.layer{l}"
            self.enc_layers.append({
                "ln_attn": LayerNorm(s, f"{pre}.ln_attn", cfg.d),
                "q": Dense(s, f"{pre}.q", cfg.d, cfg.d, rng),
                "k": Dense(s, f"{pre}.k", cfg.d, cfg.d, rng),
                "v": Dense(s, f"{pre}.v", cfg.d, cfg.d, rng),
                "edge_bias": Dense(s, f"{pre}.edge_bias", cfg.edge_dim, cfg.heads, rng),
                "out": Dense(s, f"{pre}.out", cfg.d, cfg.d, rng),
                "ln_ffn": LayerNorm(s, f"{pre}.ln_ffn", cfg.d),
                "ffn": GatedTransition(s, f"{pre}.ffn", cfg.d, 2 * cfg.d, rng),
                "ln_edge_src": LayerNorm(s, f"{pre}.ln_edge_src", cfg.d),
                "in_i": Dense(s, f"{pre}.in_i", cfg.d, cfg.c, rng),
                "in_j": Dense(s, f"{pre}.in_j", cfg.d, cfg.c, rng),
                "outer": Dense(s, f"{pre}.outer", cfg.c, cfg.c * cfg.edge_dim, rng, bias=False),
                "ln_edge": LayerNorm(s, f"{pre}.ln_edge", cfg.edge_dim),
                "edge_ffn": GatedTransition(s, f"{pre}.edge_ffn", cfg.edge_dim, cfg.edge_dim, rng),
            })
        self.enc_ln_final = LayerNorm(s, "enc.ln_final", cfg.d)
        self.proj = Dense(s, "enc.proj", cfg.d, cfg.h, rng)

        v = len(vocab)
        self.emb_tok = s.add("dec.emb_tok", 0.1 * rng.standard_normal((v, cfg.d_dec)))
        self.prefix_in = Dense(s, "dec.prefix_in", cfg.h, cfg.d_dec, rng)
        self.prefix_pos = s.add("dec.prefix_pos", 0.1 * rng.standard_normal((cfg.p, cfg.d_dec)))
        self.posenc = _sinusoidal(cfg.max_len + 1, cfg.d_dec)
        self.dec_layers = []
        for l in range(cfg.n_dec):
            pre = f"dec.layer{l}"
            self.dec_layers.append({
                "ln_attn": LayerNorm(s, f"{pre}.ln_attn", cfg.d_dec),
                "q": Dense(s, f"{pre}.q", cfg.d_dec, cfg.d_dec, rng),
                "k": Dense(s, f"{pre}.k", cfg.d_dec, cfg.d_dec, rng),
                "v": Dense(s, f"{pre}.v", cfg.d_dec, cfg.d_dec, rng),
                "out": Dense(s, f"{pre}.out", cfg.d_dec, cfg.d_dec, rng),
                "ln_ffn": LayerNorm(s, f"{pre}.ln_ffn", cfg.d_dec),
                "ffn": GatedTransition(s, f"{pre}.ffn", cfg.d_dec, 2 * cfg.d_dec, rng),
            })
        self.dec_ln_final = LayerNorm(s, "dec.ln_final", cfg.d_dec)
        self.dec_out = Dense(s, "dec.out", cfg.d_dec, v, rng)

    # ------------------------------------------------------------------ encoder

    def encode_batch(self, batch: GraphBatch) -> tuple[Tensor, Tensor]:
        """Latent matrices for a featurized batch: (X with unit rows, pre-norm projection)."""
        cfg = self.config
        if batch.p != cfg.p:
            raise ContractError("batch virtual-node count differs from model config")
        b, n = batch.batch_size, batch.n_nodes

        nodes = (T.embedding(self.emb_elem, batch.elem)
                 + T.embedding(self.emb_charge, batch.charge)
                 + T.embedding(self.emb_arom, batch.arom)
                 + T.embedding(self.emb_h, batch.hcount))
        virt = T.broadcast_to(T.reshape(self.emb_virt, (1, cfg.p, cfg.d)), (b, cfg.p, cfg.d))
        h = T.concat([nodes, virt], axis=1)
        e = T.embedding(self.emb_bond, batch.bond_type)

        key_bias = ((batch.node_mask - 1.0) * -NEG_INF).reshape(b, 1, 1, n)

        for li, layer in enumerate(self.enc_layers):
            hn = layer["ln_attn"](h)
            bias_t = T.transpose(layer["edge_bias"](e), (0, 3, 1, 2))
            bias = bias_t + Tensor(key_bias)
            att = attention(layer["q"](hn), layer["k"](hn), layer["v"](hn), cfg.heads, bias=bias)
            h = h + layer["out"](att)
            h = h + layer["ffn"](layer["ln_ffn"](h))

            if li == len(self.enc_layers) - 1:
                break  # the final layer's edge state has no consumer
            hs = layer["ln_edge_src"](h)
            ci = layer["in_i"](hs)                          # (b, n, c)
            cj = layer["in_j"](hs)
            t_full = layer["outer"](cj)                     # (b, n, c * edge_dim)
            t_full = T.reshape(t_full, (b, n, cfg.c, cfg.edge_dim))
            t_full = T.reshape(T.transpose(t_full, (0, 2, 1, 3)), (b, cfg.c, n * cfg.edge_dim))
            outer = T.reshape(T.matmul(ci, t_full), (b, n, n, cfg.edge_dim))
            e = e + outer
            e = e + layer["edge_ffn"](layer["ln_edge"](e))

        virt_rows = self.enc_ln_final(h)[:, batch.n_real :, :]
        prenorm = self.proj(virt_rows)
        norm = T.sqrt(T.sum_(prenorm * prenorm, axis=-1, keepdims=True) + 1e-24)
        return prenorm / norm, prenorm

    def encode(self, mol) -> np.ndarray:
        """Latent matrix (P, h) for one molecule; rows unit-norm."""
        batch = featurize_molecules([mol], self.config.p, self.config.max_atoms)
        x, _ = self.encode_batch(batch)
        return x.data[0]

    # ------------------------------------------------------------------ decoder

    def _decoder_forward(self, x: Tensor, inputs: np.ndarray) -> Tensor:
        """Logits (B, M, V) for input token ids (already shifted right)."""
        cfg = self.config
        b, m = inputs.shape
        if m > cfg.max_len:
            raise ContractError(f"sequence length {m} exceeds max_len {cfg.max_len}")
        if inputs.max(initial=0) >= len(self.vocab):
            raise ContractError("token id outside vocabulary")
        prefix = self.prefix_in(x) + self.prefix_pos
        tok = T.embedding(self.emb_tok, inputs) + Tensor(self.posenc[:m])
        seq = T.concat([prefix, tok], axis=1)

        n = cfg.p + m
        allowed = np.zeros((n, n))
        allowed[:, : cfg.p] = 1.0
        token_rows = np.tril(np.ones((m, m)))
        allowed[cfg.p :, cfg.p :] = token_rows
        causal = ((1.0 - allowed) * NEG_INF).reshape(1, 1, n, n)

        hseq = seq
        for layer in self.dec_layers:
            hn = layer["ln_attn"](hseq)
            att = attention(layer["q"](hn), layer["k"](hn), layer["v"](hn), cfg.dec_heads, bias=Tensor(causal))
            hseq = hseq + layer["out"](att)
            hseq = hseq + layer["ffn"](layer["ln_ffn"](hseq))
        out = self.dec_out(self.dec_ln_final(hseq))
        return out[:, cfg.p :, :]

    def decode_teacher_forced(self, x: Tensor, targets: np.ndarray) -> tuple[Tensor, Tensor, Tensor]:
        """(logits, summed cross-entropy, per-token mean loss) against target ids.

        targets end with EOS and are PAD-padded; position i sees the latent
        prefix plus targets < i.
        """
        targets = np.asarray(targets, dtype=np.intp)
        b, m = targets.shape
        inputs = np.concatenate([np.full((b, 1), BOS, dtype=np.intp), targets[:, :-1]], axis=1)
        logits = self._decoder_forward(x, inputs)
        mask = (targets != PAD).astype(np.float64)
        nll = -T.take_last(T.log_softmax(logits, axis=-1), targets)
        total = T.sum_(nll * Tensor(mask))
        per_token = total * (1.0 / max(mask.sum(), 1.0))
        return logits, total, per_token

    def decode_beam(self, x_latent: np.ndarray, beam_size: int = 4) -> tuple[str, float, bool]:
        """Beam-search decode one latent matrix (P, h).

        Returns (smiles, accumulated log-likelihood, completed flag); an
        uncompleted sequence at max_len is returned truncated with
        completed=False. Ties break lexicographically on token ids.
        """
        if beam_size < 1:
            raise ContractError("beam_size must be >= 1")
        cfg = self.config
        live = [((), 0.0)]
        finished: list[tuple[float, tuple]] = []
        for _ in range(cfg.max_len):
            inputs = np.array([(BOS,) + ids for ids, _ in live], dtype=np.intp)
            x = Tensor(np.repeat(x_latent[None], len(live), axis=0))
            logits = self._decoder_forward(x, inputs)
            last = logits.data[:, -1, :]
            shifted = last - last.max(axis=-1, keepdims=True)
            logprobs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
            candidates: list[tuple[float, tuple]] = []
            for (ids, lp), row in zip(live, logprobs):
                top = np.argsort(-row, kind="stable")[: beam_size + 2]
                for tok in top:
                    tok = int(tok)
                    if tok in (PAD, BOS):
                        continue
                    candidates.append((lp + float(row[tok]), ids + (tok,)))
            candidates.sort(key=lambda c: (-c[0], c[1]))
            live = []
            for lp, ids in candidates:
                if ids[-1] == EOS:
                    finished.append((lp, ids))
                else:
                    live.append((ids, lp))
                if len(live) >= beam_size:
                    break
            if not live:
                break
        if finished:
            finished.sort(key=lambda c: (-c[0], c[1]))
            lp, ids = finished[0]
            return self.vocab.decode(ids), lp, True
        ids, lp = min(live, key=lambda c: (-c[1], c[0])) if live else ((), float("-inf"))
        return self.vocab.decode(ids), lp, False

    # ------------------------------------------------------------------ state

    def state(self) -> dict:
        return {
            "kind": "autoencoder",
            "config": asdict(self.config),
            "vocab": list(self.vocab.tokens),
            "arrays": {name: t.data for name, t in self.store.items()},
        }

    @classmethod
    def from_state(cls, state: dict) -> "Autoencoder":
        model = cls(AutoencoderConfig(**state["config"]), Vocabulary(state["vocab"]))
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
