"""Autoencoder training and reconstruction evaluation."""

from __future__ import annotations

import math

import numpy as np

from .. import tensor as T
from ..chem.mol import isomorphic
from ..chem.smiles import parse_smiles
from ..errors import ContractError, NumericError, ParseError
from ..nn import AdamW, cosine_lr
from ..rng import substream
from .featurize import featurize_molecules
from .model import Autoencoder, AutoencoderConfig
from .tokenizer import EOS, PAD, Vocabulary


def _pad_targets(vocab: Vocabulary, corpus: list[str], max_len: int) -> np.ndarray:
    rows = []
    for smiles in corpus:
        ids = vocab.encode(smiles) + [EOS]
        if len(ids) > max_len:
            raise ContractError(f"{smiles!r} needs {len(ids)} tokens, max_len is {max_len}")
        rows.append(ids)
    width = max(len(r) for r in rows)
    out = np.full((len(rows), width), PAD, dtype=np.intp)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def train_autoencoder(corpus: list[str], config: AutoencoderConfig | None = None, *,
                      steps: int = 2000, batch_size: int = 25, lr: float = 2e-3,
                      lr_end: float = 2e-4, weight_decay: float = 1e-4, seed: int = 0,
                      log_every: int = 0) -> tuple[Autoencoder, dict]:
    """Fit the autoencoder on a SMILES corpus.

    Minimizes per-token cross-entropy plus latent_reg * mean squared
    pre-normalization latent magnitude. Aborts with NumericError if the
    loss goes non-finite.
    """
    if not corpus:
        raise ContractError("empty training corpus")
    config = config or AutoencoderConfig()
    mols = [parse_smiles(s) for s in corpus]
    vocab = Vocabulary.from_corpus(corpus)
    model = Autoencoder(config, vocab, seed=seed)
    targets_all = _pad_targets(vocab, corpus, config.max_len)

    opt = AdamW(model.store, lr=lr, weight_decay=weight_decay)
    rng = substream(seed, "autoencoder-train")
    n = len(corpus)
    history = {"loss": [], "ce": [], "reg": []}

    for step in range(steps):
        idx = rng.choice(n, size=min(batch_size, n), replace=False)
        batch_mols = [mols[i] for i in idx]
        targets = targets_all[idx]
        width = int(max((targets != PAD).sum(axis=1).max(), 1))
        targets = targets[:, :width]
        graph = featurize_molecules(batch_mols, config.p, config.max_atoms)
        with T.tape() as tp:
            x, prenorm = model.encode_batch(graph)
            _, _, per_token = model.decode_teacher_forced(x, targets)
            reg = T.mean(T.sum_(prenorm * prenorm, axis=(-2, -1)))
            loss = per_token + config.latent_reg * reg
            if not math.isfinite(loss.item()):
                raise NumericError(f"training loss became non-finite at step {step}")
            grads = tp.backward(loss)
        opt.step(grads, lr=cosine_lr(step, steps, lr, lr_end))
        history["loss"].append(loss.item())
        history["ce"].append(per_token.item())
        history["reg"].append(reg.item())
        if log_every and step % log_every == 0:
            print(f"step {step}: loss {loss.item():.4f} ce {per_token.item():.4f}")
    return model, history


def reconstruction_report(corpus: list[str], model: Autoencoder, beam_size: int = 4) -> dict:
    """Counts of Success / Valid / Invalid round-trips through the latent space.

    Success: decoded graph is isomorphic to the input. Valid: decoded string
    parses but differs. Invalid: decode failed to parse or to terminate.
    """
    counts = {"Success": 0, "Valid": 0, "Invalid": 0}
    decoded: list[str] = []
    for smiles in corpus:
        mol = parse_smiles(smiles)
        latent = model.encode(mol)
        out, _, completed = model.decode_beam(latent, beam_size=beam_size)
        decoded.append(out)
        if not completed:
            counts["Invalid"] += 1
            continue
        try:
            out_mol = parse_smiles(out)
        except ParseError:
            counts["Invalid"] += 1
            continue
        if isomorphic(mol, out_mol):
            counts["Success"] += 1
        else:
            counts["Valid"] += 1
    counts["total"] = len(corpus)
    counts["decoded"] = decoded
    return counts
