"""Sum-rate analysis of GFDM under MF, ideal MF/SIC, ZF and MMSE receivers.

Closed forms are evaluated on the filter coefficients directly; ``rate_oracle``
builds the dense matrices and serves as the reference for all of them.
Rates are in bits per GFDM symbol.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .channels import ChannelSpec
from .errors import DomainError, InvalidDimensionError, SingularChannelError, SingularFilterError
from .model import FilterSpec, GfdmConfig, _check_match, modulation_matrix

RECEIVERS = ("MF", "MF_SIC", "ZF", "MMSE")


@dataclass(frozen=True)
class SnrPoint:
    Ps: float
    sigma2: float = 1.0

    def __post_init__(self):
        if not (self.Ps > 0 and self.sigma2 > 0):
            raise DomainError("Ps and sigma2 must be strictly positive")

    @property
    def snr(self) -> float:
        return self.Ps / self.sigma2

    @classmethod
    def from_db(cls, snr_db: float, sigma2: float = 1.0) -> "SnrPoint":
        return cls(Ps=sigma2 * 10.0 ** (snr_db / 10.0), sigma2=sigma2)


Snr = Union[SnrPoint, float]


def _snr(snr: Snr) -> float:
    v = snr.snr if isinstance(snr, SnrPoint) else float(snr)
    if not v > 0:
        raise DomainError(f"SNR must be positive, got {v!r}")
    return v


@dataclass(frozen=True)
class RateReport:
    receiver: str
    sinr: np.ndarray  # K x M, linear
    sum_rate: float

    @classmethod
    def from_sinr(cls, receiver: str, sinr) -> "RateReport":
        sinr = np.asarray(sinr, dtype=float)
        return cls(receiver, sinr, float(np.sum(np.log2(1.0 + sinr))))

    def to_dict(self) -> dict:
        return {
            "receiver": self.receiver,
            "sum_rate_bits": self.sum_rate,
            "sinr": self.sinr.tolist(),
        }

    def csv_row(self, snr_db: float) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([_fmt(snr_db), self.receiver, _fmt(self.sum_rate)])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return format(float(v), ".10g")


def rate_upper_bound(config: GfdmConfig, snr: Snr) -> float:
    """Sum capacity bound ``N log2(1 + Ps/sigma2)``."""
    return config.N * float(np.log2(1.0 + _snr(snr)))


def mf_sic_rate(config: GfdmConfig, snr: Snr) -> float:
    # ideal SIC removes all interference; any normalized filter reaches the bound
    return rate_upper_bound(config, snr)


def mf_interference(filt: FilterSpec, K: Optional[int] = None) -> float:
    """Interference coefficient ``a(gamma)`` of the MF receiver in AWGN.

    The two-neighbour form holds for ``K >= 3``. With ``K = 2`` both
    neighbours are the same subcarrier and their leakage adds coherently.
    """
    if K is not None and K < 2:
        raise DomainError("MF closed form needs K >= 2; use rate_oracle for K = 1")
    gf, gr = filt.forward, filt.reverse
    own = np.fft.ifft(np.abs(gf) ** 2 + np.abs(gr) ** 2)
    intra = float(np.sum(np.abs(own[1:]) ** 2))
    cross = gf * np.conj(gr)
    if K == 2:
        inter = float(np.sum(np.abs(np.fft.ifft(2.0 * cross.real)) ** 2))
    else:
        inter = 2.0 * float(np.sum(np.abs(np.fft.ifft(cross)) ** 2))
    return intra + inter


def mf_sinr(filt: FilterSpec, snr: Snr, K: Optional[int] = None):
    """Per-subsymbol MF SINR in AWGN; returns ``(a_gamma, sinr)``.

    ``snr`` is ``Ps/sigma2``; the SINR is the same for every subsymbol.
    """
    a = mf_interference(filt, K)
    s = _snr(snr)
    return a, s / (a * s + 1.0)


def mf_rate_awgn(config: GfdmConfig, filt: FilterSpec, snr: Snr) -> RateReport:
    _check_match(config, filt)
    _, sinr = mf_sinr(filt, snr, config.K)
    return RateReport.from_sinr("MF", np.full((config.K, config.M), sinr))


def subchannel_gains(filt: FilterSpec, K: int) -> np.ndarray:
    """``gamma_q + d_l gamma_{M+q}`` as a K x M array, ``d_l = exp(2j*pi*l/K)``.

    These are the eigenvalues of the block-circulant filtering matrix.
    """
    d = np.exp(2j * np.pi * np.arange(K) / K)
    return filt.forward[None, :] + d[:, None] * filt.reverse[None, :]


def _checked_gains(filt: FilterSpec, K: int) -> np.ndarray:
    z = subchannel_gains(filt, K)
    if np.min(np.abs(z)) < 1e-12 * np.sqrt(filt.M):
        raise SingularFilterError("gamma_q + d_l gamma_{M+q} vanishes; ZF receiver does not exist")
    return z


def zf_noise_enhancement(filt: FilterSpec, K: int) -> float:
    """Mean of ``1/|gamma_q + d_l gamma_{M+q}|^2`` (equals 1 for Dirichlet)."""
    z = _checked_gains(filt, K)
    return float(np.mean(1.0 / np.abs(z) ** 2))


def zf_rate_awgn(config: GfdmConfig, filt: FilterSpec, snr: Snr) -> RateReport:
    _check_match(config, filt)
    sinr = _snr(snr) / zf_noise_enhancement(filt, config.K)
    return RateReport.from_sinr("ZF", np.full((config.K, config.M), sinr))


def zf_rate_general(config: GfdmConfig, filt: FilterSpec, channel: ChannelSpec, snr: Snr) -> RateReport:
    """ZF rate over a circular FIR channel.

    Subcarrier ``k`` has noise enhancement
    ``(1/M) sum_{p,q} |E[(k-p) mod K, q]|^2 / |lambda_{pM+q}|^2`` where ``E`` is
    the inverse DFT over ``l`` of ``1/(gamma_q + d_l gamma_{M+q})``.
    """
    _check_match(config, filt)
    K, M = config.K, config.M
    z = _checked_gains(filt, K)
    lam = channel.checked_eigenvalues(config.N).reshape(K, M)
    E2 = np.abs(np.fft.ifft(1.0 / z, axis=0)) ** 2
    L2 = 1.0 / np.abs(lam) ** 2
    idx = (np.arange(K)[:, None] - np.arange(K)[None, :]) % K
    denom = np.einsum("kpq,pq->k", E2[idx], L2) / M
    sinr = _snr(snr) / denom
    return RateReport.from_sinr("ZF", np.repeat(sinr[:, None], M, axis=1))


def mmse_rate_awgn(config: GfdmConfig, filt: FilterSpec, snr: Snr) -> RateReport:
    _check_match(config, filt)
    s = _snr(snr)
    z = subchannel_gains(filt, config.K)
    D = float(np.mean(1.0 / (np.abs(z) ** 2 + 1.0 / s)))
    sinr = max(s / D - 1.0, 0.0)
    return RateReport.from_sinr("MMSE", np.full((config.K, config.M), sinr))


def zf_scaling_factors(filt: FilterSpec, K: int) -> np.ndarray:
    """Per-bin factors ``1/d_l`` applied between the block DFTs (K x M)."""
    return 1.0 / _checked_gains(filt, K)


def zf_equalize_fast(config: GfdmConfig, filt: FilterSpec, channel: ChannelSpec, y) -> np.ndarray:
    """Zero-forcing equalization without forming any N x N matrix.

    N-point DFT, division by the channel response, block DFT across
    subcarriers, division by ``gamma_q + d_l gamma_{M+q}``, block IDFT, then
    an M-point IDFT per subcarrier.
    """
    _check_match(config, filt)
    K, M, N = config.K, config.M, config.N
    y = np.asarray(y, dtype=complex)
    if y.shape != (N,):
        raise InvalidDimensionError(f"expected {N} received samples, got shape {y.shape}")
    scale = zf_scaling_factors(filt, K)
    lam = channel.checked_eigenvalues(N)
    Y = (np.fft.fft(y) / np.sqrt(N)) / lam
    V = np.fft.fft(Y.reshape(K, M), axis=0) / np.sqrt(K)
    V = V * scale
    V = np.fft.ifft(V, axis=0) * np.sqrt(K)
    return (np.fft.ifft(V, axis=1) * np.sqrt(M)).ravel()


def rate_oracle(
    config: GfdmConfig,
    filt: FilterSpec,
    channel: Optional[ChannelSpec],
    snr: Snr,
    receiver: str,
) -> RateReport:
    """Brute-force rates from the explicit matrices ``Phi`` and ``H``.

    Meant for small systems (``N`` up to a few hundred).
    """
    if receiver not in ("MF", "ZF", "MMSE"):
        raise DomainError(f"unknown receiver {receiver!r}")
    s = _snr(snr)
    K, M, N = config.K, config.M, config.N
    channel = channel or ChannelSpec.awgn()
    Phi = modulation_matrix(config, filt).Phi
    H = channel.circulant(N)
    G = H @ Phi
    if receiver == "MF":
        Z = Phi.conj().T @ G
        sig = np.abs(np.diag(Z)) ** 2
        interf = np.sum(np.abs(Z) ** 2, axis=1) - sig
        noise = np.real(np.diag(Phi.conj().T @ Phi))
        sinr = s * sig / (s * interf + noise)
    elif receiver == "ZF":
        if np.min(np.abs(channel.eigenvalues(N))) < 1e-12:
            raise SingularChannelError("channel has a zero frequency response")
        if np.linalg.cond(G) > 1e12:
            raise SingularFilterError("H Phi is numerically singular")
        B = np.linalg.inv(G)
        sinr = s / np.sum(np.abs(B) ** 2, axis=1)
    else:
        Q = np.linalg.inv(G.conj().T @ G + np.eye(N) / s)
        sinr = s / np.real(np.diag(Q)) - 1.0
    return RateReport.from_sinr(receiver, np.maximum(sinr, 0.0).reshape(K, M))


def rate_sweep(config, filt, snr_db_list, receivers=("ZF",), channel=None):
    """Evaluate several receivers over an SNR sweep; yields (snr_db, RateReport)."""
    awgn = channel is None or (channel.h.size == 1 and channel.h[0] == 1)
    for snr_db in snr_db_list:
        pt = SnrPoint.from_db(snr_db)
        for rx in receivers:
            if rx == "MF_SIC":
                r = mf_sic_rate(config, pt)
                rep = RateReport("MF_SIC", np.full((config.K, config.M), pt.snr), r)
            elif rx == "MF":
                rep = mf_rate_awgn(config, filt, pt) if awgn and config.K >= 2 else rate_oracle(config, filt, channel, pt, "MF")
            elif rx == "ZF":
                rep = zf_rate_awgn(config, filt, pt) if awgn else zf_rate_general(config, filt, channel, pt)
            elif rx == "MMSE":
                rep = mmse_rate_awgn(config, filt, pt) if awgn else rate_oracle(config, filt, channel, pt, "MMSE")
            else:
                raise DomainError(f"unknown receiver {rx!r}")
            yield snr_db, rep
