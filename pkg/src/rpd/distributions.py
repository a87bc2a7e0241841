"""Diagonal Gaussian action distributions: density, entropy, sampling, KL.

Functions accept either a single distribution (1-D mean/log_std) or a
batch (2-D arrays with one row per distribution); results follow the
leading shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .nn import LOG_STD_MAX, LOG_STD_MIN

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GaussianDist:
    """Mean/log-std pair; log-std is clamped at construction."""

    mean: np.ndarray
    log_std: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        if self.log_std is None:
            self.log_std = np.zeros_like(self.mean)
        self.log_std = np.clip(np.asarray(self.log_std, dtype=np.float64),
                               LOG_STD_MIN, LOG_STD_MAX)
        if self.mean.shape != self.log_std.shape:
            raise ConfigError("mean and log_std must have identical shape")
        if not np.all(np.isfinite(self.mean)):
            raise ConfigError("non-finite distribution mean")

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)


def log_prob(mean: np.ndarray, log_std: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Sum over action dims of the diagonal-Gaussian log density."""
    mean = np.asarray(mean, dtype=np.float64)
    log_std = np.asarray(log_std, dtype=np.float64)
    action = np.asarray(action, dtype=np.float64)
    var = np.exp(2.0 * log_std)
    terms = -((action - mean) ** 2) / (2.0 * var) - log_std - 0.5 * LOG_2PI
    return terms.sum(axis=-1)


def entropy(log_std: np.ndarray) -> np.ndarray:
    """Sum over dims of 0.5 + 0.5*log(2*pi) + log_std."""
    log_std = np.asarray(log_std, dtype=np.float64)
    return (0.5 + 0.5 * LOG_2PI + log_std).sum(axis=-1)


def sample(mean: np.ndarray, log_std: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """mean + std * z with z standard normal from `rng`."""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.exp(np.asarray(log_std, dtype=np.float64))
    return mean + std * rng.standard_normal(mean.shape)


def kl_divergence(p_mean, p_log_std, q_mean, q_log_std) -> np.ndarray:
    """Closed-form KL(p || q) for diagonal Gaussians, summed over dims."""
    p_mean = np.asarray(p_mean, dtype=np.float64)
    q_mean = np.asarray(q_mean, dtype=np.float64)
    p_log_std = np.asarray(p_log_std, dtype=np.float64)
    q_log_std = np.asarray(q_log_std, dtype=np.float64)
    p_var = np.exp(2.0 * p_log_std)
    q_var = np.exp(2.0 * q_log_std)
    terms = (q_log_std - p_log_std
             + (p_var + (p_mean - q_mean) ** 2) / (2.0 * q_var)
             - 0.5)
    return terms.sum(axis=-1)


# single-distribution conveniences ------------------------------------------

def gaussian_log_prob(dist: GaussianDist, action: np.ndarray) -> float:
    action = np.asarray(action, dtype=np.float64)
    if action.shape != dist.mean.shape:
        raise ConfigError("action and distribution dimensions differ")
    return float(log_prob(dist.mean, dist.log_std, action))


def gaussian_entropy(dist: GaussianDist) -> float:
    return float(entropy(dist.log_std))


def gaussian_sample(dist: GaussianDist, rng: np.random.Generator) -> np.ndarray:
    return sample(dist.mean, dist.log_std, rng)


def gaussian_kl(p: GaussianDist, q: GaussianDist) -> float:
    if p.mean.shape != q.mean.shape:
        raise ConfigError("distribution dimensions differ")
    return float(kl_divergence(p.mean, p.log_std, q.mean, q.log_std))
