"""Min-max property normalization shared by predictors, conditioning, and losses.

Wavelengths map as (nm - 200) / 900, log extinction as (loge - 0.5) / 8.0,
solvent dielectric as eps / 100, and quantum yield passes through unchanged.
In-range prompts land in [0, 1]; out-of-range values are allowed and flagged
by the caller where relevant.
"""

from __future__ import annotations

import numpy as np

PROPERTY_NAMES = ("abs_nm", "emi_nm", "loge", "plqy")


def normalize_wavelength(nm):
    return (np.asarray(nm, dtype=np.float64) - 200.0) / 900.0


def denormalize_wavelength(x):
    return np.asarray(x, dtype=np.float64) * 900.0 + 200.0


def normalize_loge(loge):
    return (np.asarray(loge, dtype=np.float64) - 0.5) / 8.0


def denormalize_loge(x):
    return np.asarray(x, dtype=np.float64) * 8.0 + 0.5


def normalize_dielectric(eps):
    return np.asarray(eps, dtype=np.float64) / 100.0


def denormalize_dielectric(x):
    return np.asarray(x, dtype=np.float64) * 100.0


_FORWARD = {
    "abs_nm": normalize_wavelength,
    "emi_nm": normalize_wavelength,
    "loge": normalize_loge,
    "plqy": lambda v: np.asarray(v, dtype=np.float64),
}

_INVERSE = {
    "abs_nm": denormalize_wavelength,
    "emi_nm": denormalize_wavelength,
    "loge": denormalize_loge,
    "plqy": lambda v: np.asarray(v, dtype=np.float64),
}

# scale factors d(normalized)/d(raw), used to push gradients between scales
PROPERTY_SCALE = {"abs_nm": 1.0 / 900.0, "emi_nm": 1.0 / 900.0, "loge": 1.0 / 8.0, "plqy": 1.0}


def normalize_property(name: str, value):
    return _FORWARD[name](value)


def denormalize_property(name: str, value):
    return _INVERSE[name](value)


def normalize_vector(values):
    """Normalize a (..., 4) array ordered (abs_nm, emi_nm, loge, plqy)."""
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    for i, name in enumerate(PROPERTY_NAMES):
        out[..., i] = _FORWARD[name](values[..., i])
    return out


def denormalize_vector(values):
    values = np.asarray(values, dtype=np.float64)
    out = np.empty_like(values)
    for i, name in enumerate(PROPERTY_NAMES):
        out[..., i] = _INVERSE[name](values[..., i])
    return out
