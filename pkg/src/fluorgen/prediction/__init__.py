from .heads import AGP, LSP, PredictorConfig, solvent_molecule
from .hybrid import BiasNet, BiasNetConfig, train_bias_net
from .metrics import calibrate, multitask_loss, rmse_per_property, stokes_error_rate
from .mpnn import MPNN, featurize_plain
from .oracle import SyntheticOracle, fingerprint_features
from .properties import PropertyVector
from .train import record_targets, train_predictor

__all__ = [
    "AGP", "LSP", "PredictorConfig", "solvent_molecule",
    "BiasNet", "BiasNetConfig", "train_bias_net",
    "calibrate", "multitask_loss", "rmse_per_property", "stokes_error_rate",
    "MPNN", "featurize_plain",
    "SyntheticOracle", "fingerprint_features",
    "PropertyVector", "record_targets", "train_predictor",
]
