"""FIR channel descriptions and the embedded Pedestrian-B tap profile."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidDimensionError, SingularChannelError

# ITU-R M.1225 Pedestrian B: relative delays (ns) and average powers (dB).
PEDESTRIAN_B_DELAYS_NS = (0.0, 200.0, 800.0, 1200.0, 2300.0, 3700.0)
PEDESTRIAN_B_POWERS_DB = (0.0, -0.9, -4.9, -8.0, -7.8, -23.9)

#: Default sample rate used to place the Pedestrian-B taps (3.84 Mchip/s).
DEFAULT_CHIP_RATE = 3.84e6


@dataclass(frozen=True)
class ChannelSpec:
    """Circular FIR channel with taps ``h`` (first column of ``H``)."""

    h: np.ndarray

    def __post_init__(self):
        h = np.array(self.h, dtype=complex).ravel()
        if h.size == 0:
            raise InvalidDimensionError("channel needs at least one tap")
        h.setflags(write=False)
        object.__setattr__(self, "h", h)

    @classmethod
    def awgn(cls) -> "ChannelSpec":
        return cls(np.array([1.0]))

    def eigenvalues(self, N: int) -> np.ndarray:
        """Diagonal of ``W_N H W_N^H``, i.e. the N-point DFT of ``h``."""
        if self.h.size > N:
            raise InvalidDimensionError(f"{self.h.size} taps do not fit in N={N}")
        lam = np.fft.fft(self.h, N)
        return lam

    def circulant(self, N: int) -> np.ndarray:
        from scipy.linalg import circulant

        col = np.zeros(N, dtype=complex)
        col[: self.h.size] = self.h
        return circulant(col)

    def checked_eigenvalues(self, N: int, tol: float = 1e-12) -> np.ndarray:
        lam = self.eigenvalues(N)
        if np.min(np.abs(lam)) < tol:
            raise SingularChannelError("channel has a (numerically) zero frequency response")
        return lam


def pedestrian_b_power_profile(sample_rate: float = DEFAULT_CHIP_RATE) -> np.ndarray:
    """Average tap powers after rounding each path delay to the nearest sample.

    Paths that land on the same sample are merged; total power is 1.
    """
    delays = np.rint(np.asarray(PEDESTRIAN_B_DELAYS_NS) * 1e-9 * sample_rate).astype(int)
    powers = 10.0 ** (np.asarray(PEDESTRIAN_B_POWERS_DB) / 10.0)
    profile = np.zeros(delays.max() + 1)
    np.add.at(profile, delays, powers)
    return profile / profile.sum()


def pedestrian_b(rng: np.random.Generator, sample_rate: float = DEFAULT_CHIP_RATE) -> ChannelSpec:
    """One Rayleigh realization of the Pedestrian-B profile."""
    profile = pedestrian_b_power_profile(sample_rate)
    g = (rng.standard_normal(profile.size) + 1j * rng.standard_normal(profile.size)) / np.sqrt(2)
    return ChannelSpec(np.sqrt(profile) * g * (profile > 0))
