"""Autoregressive Gaussian chain: kernel, exact importance weights, drift set.

The chain X_t = rho X_{t-1} + sqrt(1 - rho^2) xi_t has the standard normal
as its invariant law, so every estimate has a known target; this makes the
model the workhorse for statistical validation of the engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import ar_drift_constants
from .engine import DriftSpec, ModelBundle
from .rng import RngStream

__all__ = ["ArConfig", "ArModel", "ar_kernel_step", "ar_log_weight", "ar_in_C"]


@dataclass(frozen=True)
class ArConfig:
    """rho: AR coefficient; d: dimension; h: proposal variance is 1/2 + h;
    r: drift-set radius factor (the set is {|x|^2 <= r d})."""

    rho: float
    d: int
    h: float
    r: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if not self.h > 0.0:
            raise ValueError("h must be positive")
        if not self.r > 1.0:
            raise ValueError("r must exceed 1")


def ar_kernel_step(stream: RngStream, x: np.ndarray, config: ArConfig) -> np.ndarray:
    """One transition: rho x + sqrt(1 - rho^2) xi, xi standard normal."""
    noise = math.sqrt(1.0 - config.rho**2)
    return config.rho * x + noise * stream.gen.standard_normal(config.d)


def ar_log_weight(x: np.ndarray, config: ArConfig) -> float:
    """Exact log density ratio of N(0, I) over N(0, (1/2+h) I) at x,
    normalizing constants included (both densities are fully known)."""
    s = 0.5 + config.h
    sq = float(x @ x)
    return 0.5 * config.d * math.log(s) - 0.5 * sq * (1.0 - 1.0 / s)


def ar_in_C(x: np.ndarray, config: ArConfig) -> bool:
    """Membership in the closed ball {|x|^2 <= r d}."""
    return float(x @ x) <= config.r * config.d


class ArModel(ModelBundle):
    """Engine bundle for the autoregressive chain."""

    def __init__(self, config: ArConfig):
        self.config = config
        gamma, K, R, w2, _ = ar_drift_constants(config.rho, config.d, config.h, config.r)
        self.drift = DriftSpec(gamma=gamma, K=K, R=R, geometric=True)
        self.weight_second_moment = w2  # closed form, for cross-checks
        self._prop_scale = math.sqrt(0.5 + config.h)
        self._noise_scale = math.sqrt(1.0 - config.rho**2)

    def propose(self, stream: RngStream) -> np.ndarray:
        return self._prop_scale * stream.gen.standard_normal(self.config.d)

    def log_weight(self, state: np.ndarray) -> float:
        return ar_log_weight(state, self.config)

    def kernel_step(self, stream: RngStream, state: np.ndarray) -> np.ndarray:
        return self.config.rho * state + self._noise_scale * stream.gen.standard_normal(
            self.config.d
        )

    def f_value(self, state: np.ndarray) -> float:
        return 1.0 + float(state @ state)
