"""Session fixtures: toy-scale trained models shared by the acceptance gate."""

import time

import numpy as np
import pytest

from toydata import TOY_CORPUS

TIMINGS: dict[str, float] = {}


def record_timing(name: str, seconds: float):
    TIMINGS[name] = TIMINGS.get(name, 0.0) + seconds


@pytest.fixture(scope="session")
def toy_corpus():
    return list(TOY_CORPUS)


@pytest.fixture(scope="session")
def trained_ae(toy_corpus):
    from fluorgen.autoencoder import train_autoencoder

    t0 = time.monotonic()
    model, history = train_autoencoder(toy_corpus, steps=2000, batch_size=25,
                                       lr=2e-3, lr_end=2e-4, seed=0)
    record_timing("train_ae", time.monotonic() - t0)
    return model, history


@pytest.fixture(scope="session")
def corpus_latents(trained_ae, toy_corpus):
    from fluorgen.chem import parse_smiles

    model, _ = trained_ae
    t0 = time.monotonic()
    latents = np.stack([model.encode(parse_smiles(s)) for s in toy_corpus])
    record_timing("encode_corpus", time.monotonic() - t0)
    return latents


@pytest.fixture(scope="session")
def property_oracle():
    from fluorgen.prediction import SyntheticOracle

    return SyntheticOracle(seed=17, bias="zero", noise_nm=0.0)


@pytest.fixture(scope="session")
def corpus_emissions(toy_corpus, property_oracle):
    from fluorgen.chem import parse_smiles

    return np.array([property_oracle.true_properties(parse_smiles(s), 78.0)[1]
                     for s in toy_corpus])


@pytest.fixture(scope="session")
def trained_dit(corpus_latents, corpus_emissions):
    from fluorgen.diffusion import DiTConfig, NoiseSchedule, train_dit
    from fluorgen.normalization import normalize_wavelength

    n, p, h = corpus_latents.shape
    values = np.zeros((n, 5))
    mask = np.zeros((n, 5))
    values[:, 1] = normalize_wavelength(corpus_emissions)
    mask[:, 1] = 1.0
    values[:, 4] = 0.78
    mask[:, 4] = 1.0
    schedule = NoiseSchedule.linear(200)
    config = DiTConfig(latent_p=p, latent_h=h, width=128, layers=4, heads=4,
                       k_rbf=64, t_max=200)
    t0 = time.monotonic()
    model, history = train_dit(corpus_latents, values, mask, config, schedule,
                               steps=3000, batch_size=32, lr=2e-3, lr_end=2e-4, seed=0)
    record_timing("train_dit", time.monotonic() - t0)
    return model, history, schedule
