from .conditioning import (
    CONDITION_FIELDS,
    Condition,
    denormalize_condition,
    normalize_condition,
    rbf_embed,
)
from .dit import DiT, DiTConfig, adaln
from .sample import decode_latents, generation_metrics, generation_records, sample_latents
from .schedule import NoiseSchedule, forward_diffuse, reverse_mean, reverse_step
from .train import CONDITION_DROPOUT, train_dit

__all__ = [
    "CONDITION_FIELDS", "Condition", "normalize_condition", "denormalize_condition", "rbf_embed",
    "DiT", "DiTConfig", "adaln",
    "NoiseSchedule", "forward_diffuse", "reverse_mean", "reverse_step",
    "train_dit", "CONDITION_DROPOUT",
    "sample_latents", "decode_latents", "generation_records", "generation_metrics",
]
