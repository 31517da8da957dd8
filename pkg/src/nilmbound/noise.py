"""I.i.d. additive measurement noise.

Two location-zero families are supported, Gaussian (``scale`` = standard
deviation) and Laplace (``scale`` = diversity ``b``).  Both have continuously
differentiable densities in the sense needed by the Cramer-Rao argument; the
Laplace score ``-sign(w)/b`` is undefined at the single point ``w = 0``, a
null set that does not affect the Fisher information ``E[score^2] = 1/b^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ValidationError

__all__ = ["NoiseKind", "NoiseModel", "fisher_information", "sample"]


class NoiseKind(str, Enum):
    GAUSSIAN = "gaussian"
    LAPLACE = "laplace"


@dataclass(frozen=True)
class NoiseModel:
    kind: NoiseKind
    scale: float

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", NoiseKind(self.kind))
        except ValueError:
            raise ValidationError(f"unknown noise kind {self.kind!r}") from None
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ValidationError(f"noise scale must be finite and positive, got {self.scale!r}")

    @classmethod
    def gaussian(cls, sigma):
        return cls(NoiseKind.GAUSSIAN, sigma)

    @classmethod
    def laplace(cls, b):
        return cls(NoiseKind.LAPLACE, b)

    @property
    def variance(self) -> float:
        if self.kind is NoiseKind.GAUSSIAN:
            return self.scale**2
        return 2.0 * self.scale**2

    def fisher_information(self) -> float:
        # location-family Fisher information: 1/sigma^2 and 1/b^2 respectively.
        # Squaring the reciprocal keeps sigma = 0.1 at exactly 100.
        return (1.0 / self.scale) ** 2

    def pdf(self, w):
        w = np.asarray(w, dtype=float)
        s = self.scale
        if self.kind is NoiseKind.GAUSSIAN:
            return np.exp(-0.5 * (w / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
        return np.exp(-np.abs(w) / s) / (2.0 * s)

    def score(self, w):
        """``p'(w) / p(w)``; zero is returned for the Laplace kink at ``w = 0``."""
        w = np.asarray(w, dtype=float)
        if self.kind is NoiseKind.GAUSSIAN:
            return -w / self.scale**2
        return -np.sign(w) / self.scale

    def neg_log_likelihood(self, residuals, axis=-1):
        """Negative log-likelihood of i.i.d. residuals, up to an additive constant."""
        r = np.asarray(residuals, dtype=float)
        if self.kind is NoiseKind.GAUSSIAN:
            return 0.5 * np.sum(r * r, axis=axis) / self.scale**2
        return np.sum(np.abs(r), axis=axis) / self.scale

    def sample(self, seed: int, count: int) -> np.ndarray:
        """``count`` i.i.d. draws from a PCG64 stream seeded with ``seed``."""
        if count < 0:
            raise ValidationError(f"count must be non-negative, got {count}")
        rng = np.random.default_rng(seed)
        if self.kind is NoiseKind.GAUSSIAN:
            return rng.normal(0.0, self.scale, size=count)
        return rng.laplace(0.0, self.scale, size=count)

    def to_record(self) -> dict:
        return {"kind": self.kind.value, "scale": self.scale}


def fisher_information(model: NoiseModel) -> float:
    return model.fisher_information()


def sample(model: NoiseModel, seed: int, count: int) -> np.ndarray:
    return model.sample(seed, count)
