"""Noise schedules and the forward/reverse diffusion kernels."""

from __future__ import annotations

import numpy as np

from ..errors import ContractError


class NoiseSchedule:
    """Tables beta_t, alpha_t, alpha_bar_t, sigma_t for t = 1..T.

    Arrays are 1-indexed by timestep with a leading slot so that
    alpha_bar[0] == 1. sigma_t^2 = beta_t with sigma_1 forced to 0 (the
    final reverse step is deterministic).
    """

    def __init__(self, betas: np.ndarray):
        betas = np.asarray(betas, dtype=np.float64)
        if betas.ndim != 1 or betas.size < 1:
            raise ContractError("betas must be a non-empty vector")
        if np.any(betas <= 0.0) or np.any(betas >= 1.0):
            raise ContractError("betas must lie strictly inside (0, 1)")
        self.t_max = betas.size
        self.beta = np.concatenate([[np.nan], betas])
        self.alpha = np.concatenate([[1.0], 1.0 - betas])
        self.alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        sigma = np.sqrt(self.beta.copy())
        sigma[1] = 0.0
        self.sigma = sigma

    REFERENCE_T = 1000
    REFERENCE_BETA_END = 0.02

    @classmethod
    def linear(cls, t_max: int = 200, beta_start: float = 1e-4,
               beta_end: float | None = None) -> "NoiseSchedule":
        """Linear betas; beta_end defaults to 0.02 scaled by 1000/t_max so the
        terminal marginal stays near N(0, I) for shortened schedules."""
        if beta_end is None:
            beta_end = cls.REFERENCE_BETA_END * cls.REFERENCE_T / t_max
        return cls(np.linspace(beta_start, beta_end, t_max))

    def check_t(self, t: int):
        if not (1 <= t <= self.t_max):
            raise ContractError(f"timestep {t} outside [1, {self.t_max}]")


def forward_diffuse(x0: np.ndarray, t: int, noise: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    """x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise."""
    schedule.check_t(t)
    x0 = np.asarray(x0, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if x0.shape != noise.shape:
        raise ContractError(f"shape mismatch {x0.shape} vs {noise.shape}")
    ab = schedule.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise


def reverse_mean(x_t: np.ndarray, t: int, eps_hat: np.ndarray, schedule: NoiseSchedule) -> np.ndarray:
    schedule.check_t(t)
    beta = schedule.beta[t]
    return (x_t - beta / np.sqrt(1.0 - schedule.alpha_bar[t]) * eps_hat) / np.sqrt(schedule.alpha[t])


def reverse_step(x_t: np.ndarray, t: int, eps_hat: np.ndarray, schedule: NoiseSchedule,
                 rng: np.random.Generator | None = None, z: np.ndarray | None = None) -> np.ndarray:
    """One reverse kernel draw; pass z explicitly to share a noise stream."""
    mu = reverse_mean(x_t, t, eps_hat, schedule)
    sigma = schedule.sigma[t]
    if sigma == 0.0:
        return mu
    if z is None:
        if rng is None:
            raise ContractError("reverse_step needs an rng or an explicit z")
        z = rng.standard_normal(x_t.shape)
    return mu + sigma * z
