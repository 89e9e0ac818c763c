"""Loss and evaluation metrics for the property predictors."""

from __future__ import annotations

import numpy as np

from .. import tensor as T
from ..errors import ContractError
from ..normalization import PROPERTY_NAMES
from ..tensor import Tensor
from .properties import PropertyVector


def multitask_loss(pred: Tensor, labels: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean squared error over present label entries only (normalized units)."""
    mask = np.asarray(mask, dtype=np.float64)
    total = mask.sum()
    if total <= 0:
        raise ContractError("multitask_loss needs at least one labeled entry")
    diff = pred - Tensor(np.asarray(labels, dtype=np.float64))
    return T.sum_(diff * diff * Tensor(mask)) * (1.0 / total)


def _sign(x: float) -> int:
    # zero shift counts as a regular (positive) Stokes shift
    return 1 if x >= 0 else -1


def stokes_error_rate(preds: list[PropertyVector], truths: list[PropertyVector]) -> float:
    """Fraction of records whose predicted Stokes-shift sign disagrees with truth."""
    if not preds:
        raise ContractError("stokes_error_rate needs at least one record")
    if len(preds) != len(truths):
        raise ContractError("prediction/truth length mismatch")
    wrong = 0
    for p, t in zip(preds, truths):
        wrong += _sign(p.stokes_shift) != _sign(t.stokes_shift)
    return wrong / len(preds)


def rmse_per_property(pred: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> dict[str, float]:
    """RMSE per property over present entries; absent properties map to None."""
    pred, labels, mask = (np.asarray(a, dtype=np.float64) for a in (pred, labels, mask))
    out = {}
    for i, name in enumerate(PROPERTY_NAMES):
        m = mask[:, i] > 0
        if not m.any():
            out[name] = None
            continue
        err = pred[m, i] - labels[m, i]
        out[name] = float(np.sqrt(np.mean(err * err)))
    return out


def calibrate(raw, w, b):
    """Affine calibration of a raw oracle value."""
    return w * raw + b
