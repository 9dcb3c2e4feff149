"""GFDM signal model: configuration, frequency-domain filters and the
modulation matrix ``Phi = W_N^H P diag(F, ..., F)``.

Indexing follows the usual GFDM convention: data symbol ``s[k*M + m]`` is
subsymbol ``m`` of subcarrier ``k``. The filter is given by its ``2*M``
frequency-domain coefficients ``gamma``; the first ``M`` sit on the
subcarrier's own DFT bins ``k*M .. k*M+M-1`` and the last ``M`` on the bins
of the previous subcarrier ``(k-1)*M .. k*M-1`` (repetition factor 2).
All DFT matrices are unitary.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import ConfigurationError, DomainError, InvalidDimensionError

#: Relative tolerance used when checking the filter power constraint.
POWER_RTOL = 1e-12


@dataclass(frozen=True)
class GfdmConfig:
    """System dimensions of one GFDM symbol.

    ``Ts`` is the subsymbol duration (``K`` samples), so one symbol lasts
    ``Tb = M * Ts`` and one sample ``Ts / K``.
    """

    K: int
    M: int
    Ncp: int = 0
    Nw: int = 0
    Ts: float = 1.0
    L: int = field(default=2, init=False)

    def __post_init__(self):
        for name in ("K", "M"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvalidDimensionError(f"{name} must be a positive integer, got {v!r}")
        if self.Ncp < 0 or self.Nw < 0:
            raise ConfigurationError("Ncp and Nw must be nonnegative")
        if self.Ncp > self.N:
            raise ConfigurationError(f"Ncp={self.Ncp} exceeds N={self.N}")
        if self.Nw > 0 and self.Nw >= self.Ncp:
            raise ConfigurationError(f"window taper Nw={self.Nw} must be shorter than Ncp={self.Ncp}")
        if not self.Ts > 0:
            raise ConfigurationError("Ts must be positive")

    @property
    def N(self) -> int:
        return self.K * self.M

    @property
    def Tb(self) -> float:
        return self.M * self.Ts

    @property
    def dt(self) -> float:
        """Sample period."""
        return self.Ts / self.K

    def digest(self) -> str:
        key = f"{self.K},{self.M},{self.Ncp},{self.Nw},{self.Ts!r}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class FilterSpec:
    """Frequency-domain GFDM filter ``gamma`` of length ``2*M``."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=complex).ravel()
        if g.size < 2 or g.size % 2:
            raise InvalidDimensionError(f"filter length must be even and >= 2, got {g.size}")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def M(self) -> int:
        return self.gamma.size // 2

    @property
    def forward(self) -> np.ndarray:
        """Coefficients on the subcarrier's own bins (diagonal of Gamma^(f))."""
        return self.gamma[: self.M]

    @property
    def reverse(self) -> np.ndarray:
        """Coefficients on the preceding subcarrier's bins (Gamma^(r))."""
        return self.gamma[self.M:]

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.gamma) ** 2))

    def is_normalized(self, rtol: float = POWER_RTOL) -> bool:
        return abs(self.power - self.M) <= rtol * self.M

    def digest(self) -> str:
        return hashlib.sha256(self.gamma.tobytes()).hexdigest()[:16]

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "gamma_re": [float(v) for v in self.gamma.real],
            "gamma_im": [float(v) for v in self.gamma.imag],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterSpec":
        re = np.asarray(d["gamma_re"], float)
        g = re + 1j * np.asarray(d.get("gamma_im", np.zeros_like(re)), float)
        f = cls(g)
        if "M" in d and d["M"] != f.M:
            raise InvalidDimensionError(f"M={d['M']} does not match {g.size} coefficients")
        return f


@dataclass(frozen=True)
class ModulationMatrix:
    Phi: np.ndarray
    F: np.ndarray
    P: List[np.ndarray]
    W_M: np.ndarray
    W_N: np.ndarray


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT matrix, ``[W]_{i,j} = exp(-2j*pi*i*j/n) / sqrt(n)``."""
    idx = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def _check_match(config: GfdmConfig, filt: FilterSpec):
    if filt.M != config.M:
        raise InvalidDimensionError(
            f"filter has 2M={filt.gamma.size} coefficients but config has M={config.M}"
        )


def build_filter_dirichlet(M: int) -> FilterSpec:
    """Dirichlet filter (SC-FDM): ones on the own bins, zeros elsewhere."""
    if int(M) != M or M < 1:
        raise InvalidDimensionError(f"M must be a positive integer, got {M!r}")
    g = np.zeros(2 * M, dtype=complex)
    g[:M] = 1.0
    return FilterSpec(g)


def raised_cosine_response(u, alpha: float) -> np.ndarray:
    """Raised-cosine magnitude response at normalized frequency ``u = f*Ts``."""
    u = np.abs(np.asarray(u, dtype=float))
    edge = (1.0 - alpha) / 2.0
    out = np.zeros_like(u)
    out[u <= edge] = 1.0
    if alpha > 0:
        band = (u > edge) & (u <= (1.0 + alpha) / 2.0)
        out[band] = 0.5 * (1.0 + np.cos(np.pi / alpha * (u[band] - edge)))
    return out


def filter_bins(M: int) -> np.ndarray:
    """Signed DFT-bin offset of each coefficient relative to ``k*M``."""
    j = np.arange(2 * M)
    return np.where(j < M, j, j - 2 * M)


def build_filter_rrc(M: int, alpha: float, sqrt_flag: bool = True) -> FilterSpec:
    """(Root) raised-cosine filter sampled on the ``2*M`` filter bins.

    The RC response with period ``Ts`` is centred on the middle of the
    subcarrier's own bins, ``(M-1)/2``, so ``alpha=0`` gives the Dirichlet
    filter. The result is renormalized to unit average power per subsymbol.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"roll-off must lie in [0, 1], got {alpha!r}")
    if int(M) != M or M < 1:
        raise InvalidDimensionError(f"M must be a positive integer, got {M!r}")
    u = (filter_bins(M) - (M - 1) / 2.0) / M
    a = raised_cosine_response(u, alpha)
    if sqrt_flag:
        a = np.sqrt(a)
    a = a * np.sqrt(M / np.sum(a ** 2))
    return FilterSpec(a.astype(complex))


def mapping_matrices(config: GfdmConfig) -> List[np.ndarray]:
    """The ``N x 2M`` subcarrier mapping matrices ``P_k``."""
    K, M, N = config.K, config.M, config.N
    eye = np.eye(M)
    out = []
    for k in range(K):
        Pk = np.zeros((N, 2 * M))
        Pk[k * M:(k + 1) * M, :M] += eye
        kp = (k - 1) % K
        Pk[kp * M:(kp + 1) * M, M:] += eye
        out.append(Pk)
    return out


def modulation_matrix(config: GfdmConfig, filt: FilterSpec) -> ModulationMatrix:
    _check_match(config, filt)
    M = config.M
    W_M = dft_matrix(M)
    W_N = dft_matrix(config.N)
    R = np.vstack([np.eye(M), np.eye(M)])
    F = filt.gamma[:, None] * (R @ W_M)
    P = mapping_matrices(config)
    Phi = np.hstack([W_N.conj().T @ (Pk @ F) for Pk in P])
    return ModulationMatrix(Phi=Phi, F=F, P=P, W_M=W_M, W_N=W_N)


def subcarrier_spectrum(config: GfdmConfig, filt: FilterSpec, s) -> np.ndarray:
    """N-bin spectrum ``P diag(F, ..., F) s`` of the symbol (before the IDFT)."""
    _check_match(config, filt)
    K, M, N = config.K, config.M, config.N
    s = np.asarray(s, dtype=complex)
    if s.shape != (N,):
        raise InvalidDimensionError(f"expected {N} data symbols, got shape {s.shape}")
    S = np.fft.fft(s.reshape(K, M), axis=1) / np.sqrt(M)
    X = (filt.forward * S).ravel()
    X = X + np.roll((filt.reverse * S).ravel(), -M)
    return X


def modulate(config: GfdmConfig, filt: FilterSpec, s) -> np.ndarray:
    """Time-domain GFDM symbol ``x = Phi s`` computed with FFTs."""
    X = subcarrier_spectrum(config, filt, s)
    return np.fft.ifft(X) * np.sqrt(config.N)


def time_domain_filter(config: GfdmConfig, filt: FilterSpec) -> np.ndarray:
    """Prototype pulse ``g[n]``, n = 0..N-1, such that column ``k*M+m`` of
    ``Phi`` is ``g[(n - m*K) mod N] exp(2j*pi*k*n/K)``."""
    _check_match(config, filt)
    K, M, N = config.K, config.M, config.N
    n = np.arange(N)[:, None]
    q = np.arange(M)[None, :]
    e = np.exp(2j * np.pi * n * q / N)
    inner = filt.forward[None, :] + np.exp(-2j * np.pi * n / K) * filt.reverse[None, :]
    return (e * inner).sum(axis=1) / (np.sqrt(K) * M)


def add_cp_suffix(x, config: GfdmConfig) -> np.ndarray:
    """Prepend the last ``Ncp`` samples and append the first ``Nw`` samples."""
    x = np.asarray(x)
    if x.shape != (config.N,):
        raise InvalidDimensionError(f"expected {config.N} samples, got shape {x.shape}")
    N, Ncp, Nw = config.N, config.Ncp, config.Nw
    return np.concatenate([x[N - Ncp:], x, x[:Nw]])


def remove_cp(y, config: GfdmConfig) -> np.ndarray:
    y = np.asarray(y)
    if y.shape[0] < config.Ncp + config.N:
        raise InvalidDimensionError("received block shorter than Ncp + N")
    return y[config.Ncp:config.Ncp + config.N]
