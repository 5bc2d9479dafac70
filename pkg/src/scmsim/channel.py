"""Complex AWGN broadcast channel with a degradedness check.

SNR is defined against the nominal transmit power P, so the noise variance
per complex sample is sigma^2 = P / 10^(snr_db/10); each receiver draws its
noise independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constellation import SuperConstellation
from .errors import ContractError


def sigma2_from_snr(p: float, snr_db: float) -> float:
    """Noise variance per complex sample for a given SNR in dB."""
    if p <= 0:
        raise ContractError(f"power must be positive, got {p}")
    return p / 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class ChannelConfig:
    power: float
    snr1_db: float
    snr2_db: float
    sigma2_1: float = field(init=False)
    sigma2_2: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sigma2_1", sigma2_from_snr(self.power, self.snr1_db))
        object.__setattr__(self, "sigma2_2", sigma2_from_snr(self.power, self.snr2_db))


def validate_degraded(cfg: ChannelConfig):
    """Receiver 2 must have the strictly better channel (snr2 > snr1)."""
    if not cfg.snr2_db > cfg.snr1_db:
        raise ContractError(
            f"degradedness violated: snr2_db={cfg.snr2_db} must exceed snr1_db={cfg.snr1_db}"
        )


def awgn(y: np.ndarray, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """y + circularly symmetric complex Gaussian noise of variance sigma2."""
    if sigma2 < 0:
        raise ContractError(f"noise variance must be >= 0, got {sigma2}")
    if sigma2 == 0:
        return np.array(y, copy=True)
    sd = np.sqrt(sigma2 / 2.0)
    noise = rng.normal(0.0, sd, size=y.shape) + 1j * rng.normal(0.0, sd, size=y.shape)
    return y + noise


def noise_components(shape, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Real-valued noise for the [..., 2] I/Q layout, N(0, sigma2/2) per part."""
    if sigma2 < 0:
        raise ContractError(f"noise variance must be >= 0, got {sigma2}")
    if sigma2 == 0:
        return np.zeros(shape)
    return rng.normal(0.0, np.sqrt(sigma2 / 2.0), size=shape)


def nearest_index(z: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Index of the closest constellation point for each received sample."""
    return np.abs(z[..., None] - points[None, :]).argmin(axis=-1)


def uncoded_inner_ser(sc: SuperConstellation, sigma2: float, n_symbols: int,
                      rng: np.random.Generator) -> float:
    """Symbol error rate of nearest-point demodulation of the inner layer.

    Uniform inner and outer symbols are superposed; the receiver demodulates
    the inner layer only, treating the outer layer as interference.
    """
    inner_pts = np.sqrt(sc.paf * sc.power) * sc.inner.points
    outer_pts = np.sqrt((1.0 - sc.paf) * sc.power) * sc.outer.points
    i_idx = rng.integers(0, len(inner_pts), size=n_symbols)
    o_idx = rng.integers(0, len(outer_pts), size=n_symbols)
    z = awgn(inner_pts[i_idx] + outer_pts[o_idx], sigma2, rng)
    decided = nearest_index(z, inner_pts)
    return float(np.mean(decided != i_idx))
