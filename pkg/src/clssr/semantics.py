"""Closed-form surrogate of the semantic codec.

The learned encoder/codebook/decoders are replaced by a distortion model
driven by three effects: codebook quantization (``kappa * 2**-b``), codeword
index errors on the link, and the semantic noise level ``delta_z``. The
user's decoder knows the noise and only pays a residual ``rho * delta_z``;
the eavesdropper shares the pretrained decoder but not the noise key, so
every correctly received index is still confused with weight ``delta_z``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class SemanticConfig:
    n: int = 16
    b: int = 8
    b_min: int = 2
    b_max: int = 10
    delta_z: float = 0.0
    rho: float = 0.0
    kappa: float = 1.0
    epsilon: float = 0.01

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 1 <= self.b_min <= self.b <= self.b_max:
            raise ValueError(f"need 1 <= b_min <= b <= b_max, got {self.b_min}, {self.b}, {self.b_max}")
        if not 0.0 <= self.delta_z <= 1.0:
            raise ValueError("delta_z must lie in [0, 1]")
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")

    @property
    def codebook_size(self) -> int:
        return 2 ** self.b

    @property
    def bit_choices(self) -> tuple[int, ...]:
        return tuple(range(self.b_min, self.b_max + 1))

    def with_noise(self, delta_z: float) -> "SemanticConfig":
        return replace(self, delta_z=float(delta_z))


@dataclass(frozen=True)
class DistortionPair:
    g_user: float
    g_eve: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "g_user", float(np.clip(self.g_user, 0.0, 1.0)))
        object.__setattr__(
            self, "g_eve", tuple(float(np.clip(g, 0.0, 1.0)) for g in self.g_eve)
        )


def _quantization(cfg: SemanticConfig, b):
    b = cfg.b if b is None else b
    return cfg.kappa * np.exp2(-np.asarray(b, dtype=float))


def _out(x):
    x = np.clip(x, 0.0, 1.0)
    return float(x) if np.ndim(x) == 0 else x


def distortion_user(p_cw_u, cfg: SemanticConfig, b=None, delta_z=None):
    """Normalized goal distortion at the noise-aware user decoder."""
    dz = cfg.delta_z if delta_z is None else delta_z
    p = np.asarray(p_cw_u, dtype=float)
    return _out(_quantization(cfg, b) + p + cfg.rho * dz)


def distortion_eve(p_cw_e, cfg: SemanticConfig, b=None, delta_z=None):
    """Normalized goal distortion at an eavesdropper using the shared decoder."""
    dz = cfg.delta_z if delta_z is None else delta_z
    p = np.asarray(p_cw_e, dtype=float)
    return _out(_quantization(cfg, b) + p + dz * (1.0 - p))


def distortions(p_cw_u: float, p_cw_e, cfg: SemanticConfig) -> DistortionPair:
    return DistortionPair(
        distortion_user(p_cw_u, cfg),
        tuple(distortion_eve(p, cfg) for p in np.atleast_1d(p_cw_e)),
    )
