from .featurize import GraphBatch, featurize_molecules
from .model import Autoencoder, AutoencoderConfig
from .tokenizer import BOS, EOS, PAD, Vocabulary, tokenize
from .train import reconstruction_report, train_autoencoder

__all__ = [
    "Autoencoder", "AutoencoderConfig", "GraphBatch", "featurize_molecules",
    "Vocabulary", "tokenize", "PAD", "BOS", "EOS",
    "train_autoencoder", "reconstruction_report",
]
