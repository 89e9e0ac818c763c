"""Prompt conditioning: min-max normalization and radial-basis embeddings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from ..normalization import (
    denormalize_dielectric,
    denormalize_loge,
    denormalize_wavelength,
    normalize_dielectric,
    normalize_loge,
    normalize_wavelength,
)

CONDITION_FIELDS = ("abs_nm", "emi_nm", "loge", "plqy", "dielectric")

_NORMALIZERS = {
    "abs_nm": normalize_wavelength,
    "emi_nm": normalize_wavelength,
    "loge": normalize_loge,
    "plqy": lambda v: float(v),
    "dielectric": normalize_dielectric,
}

_DENORMALIZERS = {
    "abs_nm": denormalize_wavelength,
    "emi_nm": denormalize_wavelength,
    "loge": denormalize_loge,
    "plqy": lambda v: float(v),
    "dielectric": denormalize_dielectric,
}


def normalize_condition(raw: dict) -> tuple[dict, dict]:
    """Normalized copy of a raw prompt dict plus out-of-range flags.

    Unknown keys are rejected; missing keys stay missing. Values outside
    [0, 1] after normalization are allowed but flagged.
    """
    unknown = set(raw) - set(CONDITION_FIELDS)
    if unknown:
        raise ContractError(f"unknown condition fields {sorted(unknown)}")
    normalized, flags = {}, {}
    for name, value in raw.items():
        if value is None:
            continue
        v = float(_NORMALIZERS[name](value))
        normalized[name] = v
        flags[name] = not (0.0 <= v <= 1.0)
    return normalized, flags


def denormalize_condition(normalized: dict) -> dict:
    return {name: float(_DENORMALIZERS[name](v)) for name, v in normalized.items()}


def rbf_embed(p: float, k: int) -> np.ndarray:
    """e_j = exp(-(1/K)(p - j/K)^2) for j = 1..K; e_j = 1 iff p = j/K."""
    if k < 1:
        raise ContractError("rbf_embed needs K >= 1")
    centers = np.arange(1, k + 1, dtype=np.float64) / k
    return np.exp(-((p - centers) ** 2) / k)


@dataclass
class Condition:
    """Normalized prompt values with a per-field presence mask."""

    values: np.ndarray = field(default_factory=lambda: np.zeros(len(CONDITION_FIELDS)))
    mask: np.ndarray = field(default_factory=lambda: np.zeros(len(CONDITION_FIELDS)))
    flags: dict = field(default_factory=dict)

    @classmethod
    def from_raw(cls, **raw) -> "Condition":
        normalized, flags = normalize_condition({k: v for k, v in raw.items() if v is not None})
        values = np.zeros(len(CONDITION_FIELDS))
        mask = np.zeros(len(CONDITION_FIELDS))
        for i, name in enumerate(CONDITION_FIELDS):
            if name in normalized:
                values[i] = normalized[name]
                mask[i] = 1.0
        return cls(values, mask, flags)

    @classmethod
    def unconditional(cls) -> "Condition":
        return cls()

    def prompt_dict(self) -> dict:
        out = {}
        for i, name in enumerate(CONDITION_FIELDS):
            if self.mask[i]:
                out[name] = float(_DENORMALIZERS[name](self.values[i]))
        return out
