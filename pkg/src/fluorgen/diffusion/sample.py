"""Prompt-conditioned latent sampling and generation metrics."""

from __future__ import annotations

import numpy as np

from ..autoencoder.model import Autoencoder
from ..chem.smiles import parse_smiles, write_smiles
from ..errors import ContractError, ParseError
from ..rng import substream
from .conditioning import Condition
from .dit import DiT
from .schedule import NoiseSchedule, reverse_mean


def sample_latents(dit: DiT, schedule: NoiseSchedule, cond: Condition, n: int, seed: int,
                   guided_step=None) -> np.ndarray:
    """Draw n latent chains; per-chain RNG streams keyed by (seed, chain index).

    guided_step, when given, replaces the plain reverse update with
    guided_step(x_t, t, eps_hat_fn, rngs) and is responsible for its own
    noise draws (used by the guidance module).
    """
    if n < 1:
        raise ContractError("need n >= 1 chains")
    cfg = dit.config
    rngs = [substream(seed, "chain", i) for i in range(n)]
    x = np.stack([r.standard_normal((cfg.latent_p, cfg.latent_h)) for r in rngs])
    for t in range(schedule.t_max, 0, -1):
        eps_hat = dit.predict_noise_np(x, t, cond)
        mu = reverse_mean(x, t, eps_hat, schedule)
        sigma = schedule.sigma[t]
        if sigma == 0.0:
            x = mu
        else:
            z = np.stack([r.standard_normal((cfg.latent_p, cfg.latent_h)) for r in rngs])
            x = mu + sigma * z
    return x


def decode_latents(latents: np.ndarray, autoencoder: Autoencoder, beam_size: int = 4):
    """(smiles, completed) per latent via beam search."""
    out = []
    for x in latents:
        smiles, _, completed = autoencoder.decode_beam(x, beam_size=beam_size)
        out.append((smiles, completed))
    return out


def generation_records(decoded, cond: Condition, seed: int,
                       training_canonical: set[str]) -> list[dict]:
    """Per-sample JSONL records with validity / uniqueness / novelty flags.

    Valid: the decode completed and parses. Unique: first occurrence of a
    canonical structure among the valid ones. Novel: unique and its
    canonical string is absent from the training set.
    """
    prompt = cond.prompt_dict()
    seen: set[str] = set()
    records = []
    for chain, (smiles, completed) in enumerate(decoded):
        canonical = None
        valid = False
        if completed and smiles:
            try:
                canonical = write_smiles(parse_smiles(smiles))
                valid = True
            except ParseError:
                canonical = None
        unique = bool(valid and canonical not in seen)
        if valid:
            seen.add(canonical)
        novel = bool(unique and canonical not in training_canonical)
        records.append({
            "smiles": smiles,
            "valid": valid,
            "unique": unique,
            "novel": novel,
            "prompt": prompt,
            "seed": seed,
            "chain": chain,
        })
    return records


def generation_metrics(records: list[dict]) -> dict:
    """validity / uniqueness / novelty fractions over a sample batch."""
    n = len(records)
    n_valid = sum(r["valid"] for r in records)
    n_unique = sum(r["unique"] for r in records)
    n_novel = sum(r["novel"] for r in records)
    return {
        "n": n,
        "validity": n_valid / n if n else 0.0,
        "uniqueness": n_unique / n_valid if n_valid else 0.0,
        "novelty": n_novel / n_unique if n_unique else 0.0,
    }
