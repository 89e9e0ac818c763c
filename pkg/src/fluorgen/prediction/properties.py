"""Property vectors with per-entry presence masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..normalization import PROPERTY_NAMES


@dataclass
class PropertyVector:
    abs_nm: float | None = None
    emi_nm: float | None = None
    loge: float | None = None
    plqy: float | None = None

    def __post_init__(self):
        if self.abs_nm is not None and self.abs_nm <= 0:
            raise ContractError(f"abs_nm must be positive, got {self.abs_nm}")
        if self.emi_nm is not None and self.emi_nm <= 0:
            raise ContractError(f"emi_nm must be positive, got {self.emi_nm}")
        if self.plqy is not None and not (0.0 <= self.plqy <= 1.0):
            raise ContractError(f"plqy must lie in [0, 1], got {self.plqy}")

    def mask(self) -> np.ndarray:
        return np.array([getattr(self, f) is not None for f in PROPERTY_NAMES], dtype=np.float64)

    def values(self, fill: float = 0.0) -> np.ndarray:
        return np.array([fill if getattr(self, f) is None else getattr(self, f) for f in PROPERTY_NAMES])

    @property
    def stokes_shift(self) -> float:
        if self.abs_nm is None or self.emi_nm is None:
            raise ContractError("Stokes shift needs both wavelengths")
        return self.emi_nm - self.abs_nm

    @classmethod
    def from_array(cls, values, mask=None) -> "PropertyVector":
        values = np.asarray(values, dtype=np.float64)
        if mask is None:
            mask = np.ones(4)
        kwargs = {}
        for i, f in enumerate(PROPERTY_NAMES):
            kwargs[f] = float(values[i]) if mask[i] else None
        return cls(**kwargs)
