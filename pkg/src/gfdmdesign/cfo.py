"""Uplink GFDM with one subcarrier per user, per-user FIR channels and
carrier frequency offsets (CFO).

User ``k`` sends ``s_k`` on subcarrier ``k``; after CP removal the receiver
sees ``sum_k Pi_k H_k Phi_k s_k`` where ``Phi_k`` are the columns of the
modulation matrix belonging to subcarrier ``k``, ``H_k`` is circulant and
``Pi_k`` is the CFO phase ramp. The frequency-domain effective matrix is
``Psi = W_N [Pi_k H_k Phi_k]_k``; the nominal receiver assumes ``Pi_k = I``.

CFO values are in units of the subcarrier spacing ``1/Ts``. One sample
lasts ``Ts/K`` so the phase advances by ``2*pi*eps/K`` per sample.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .channels import ChannelSpec, pedestrian_b
from .errors import (
    ConfigurationError,
    DomainError,
    InvalidDimensionError,
    SingularEffectiveMatrixError,
)
from .model import FilterSpec, GfdmConfig, _check_match, dft_matrix, modulation_matrix
from .rates import RateReport, Snr, _snr

CONVENTIONS = ("normalized", "literal")
NOISE_MODELS = ("row_norm", "literal")
COND_LIMIT = 1e12


@dataclass(frozen=True)
class CfoProfile:
    """Per-user CFO ``eps_k`` in subcarrier spacings.

    ``convention="normalized"`` advances the phase by ``2*pi*eps/K`` per
    sample; ``"literal"`` by ``2*pi*eps`` (no normalization).
    """

    eps: np.ndarray
    convention: str = "normalized"

    def __post_init__(self):
        e = np.array(self.eps, dtype=float).ravel()
        if self.convention not in CONVENTIONS:
            raise ConfigurationError(f"unknown CFO convention {self.convention!r}")
        if np.any(np.abs(e) >= 0.5):
            raise DomainError("CFO values must satisfy |eps| < 0.5")
        e.setflags(write=False)
        object.__setattr__(self, "eps", e)

    @classmethod
    def zeros(cls, K: int) -> "CfoProfile":
        return cls(np.zeros(K))

    def phase_steps(self, K: int) -> np.ndarray:
        """Phase increment per sample for each user."""
        scale = 1.0 / K if self.convention == "normalized" else 1.0
        return 2.0 * np.pi * self.eps * scale


def sample_cfo(K: int, half_width: float, seed, convention: str = "normalized") -> CfoProfile:
    """``K`` independent draws from ``Unif[-half_width, half_width]``."""
    if not 0.0 <= half_width < 0.5:
        raise DomainError(f"half_width must lie in [0, 0.5), got {half_width!r}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return CfoProfile(rng.uniform(-half_width, half_width, size=K), convention)


def phase_ramp(N: int, step: float) -> np.ndarray:
    """Diagonal of the core-sample CFO matrix, ``exp(1j*step*n)`` for n = 0..N-1."""
    return np.exp(1j * step * np.arange(N))


def cfo_mixing_matrix(N: int, Ncp: int, eps: float, K: Optional[int] = None,
                      convention: str = "normalized") -> np.ndarray:
    """Frequency-domain CFO mixing matrix ``D = W_N Pi W_N^H``.

    ``K`` is the number of subcarriers, so one subcarrier spacing spans
    ``N/K`` DFT bins. It defaults to ``N`` (one bin per subcarrier, the
    OFDM case), which gives a phase step of ``2*pi*eps/N``. ``Ncp`` only
    fixes the phase reference: the CP samples precede the core, so the
    core ramp starts at phase 0.
    """
    if N < 1 or Ncp < 0:
        raise InvalidDimensionError("N must be positive and Ncp nonnegative")
    prof = CfoProfile([eps], convention)
    step = prof.phase_steps(N if K is None else K)[0]
    # D[i, j] depends on (i - j) mod N only: it is circulant with first
    # column equal to the DFT of the ramp.
    col = np.fft.fft(phase_ramp(N, step)) / N
    idx = (np.arange(N)[:, None] - np.arange(N)[None, :]) % N
    return col[idx]


@dataclass(frozen=True)
class UplinkChannelSet:
    """Per-user FIR channels; all must fit in the cyclic prefix."""

    channels: tuple

    def __post_init__(self):
        chans = tuple(c if isinstance(c, ChannelSpec) else ChannelSpec(c) for c in self.channels)
        if not chans:
            raise InvalidDimensionError("need at least one user channel")
        object.__setattr__(self, "channels", chans)

    @classmethod
    def awgn(cls, K: int) -> "UplinkChannelSet":
        return cls(tuple(ChannelSpec.awgn() for _ in range(K)))

    @classmethod
    def shared(cls, channel: ChannelSpec, K: int) -> "UplinkChannelSet":
        return cls(tuple(channel for _ in range(K)))

    @classmethod
    def pedestrian_b(cls, K: int, rng: np.random.Generator, **kw) -> "UplinkChannelSet":
        return cls(tuple(pedestrian_b(rng, **kw) for _ in range(K)))

    @property
    def K(self) -> int:
        return len(self.channels)

    @property
    def max_taps(self) -> int:
        return max(c.h.size for c in self.channels)

    def is_shared(self) -> bool:
        first = self.channels[0].h
        return all(c.h.shape == first.shape and np.array_equal(c.h, first) for c in self.channels)

    def eigenvalues(self, N: int) -> np.ndarray:
        """K x N array of per-user frequency responses (diagonals of ``Lambda_k``)."""
        return np.stack([c.eigenvalues(N) for c in self.channels])

    def check(self, config: GfdmConfig):
        if self.K != config.K:
            raise InvalidDimensionError(f"{self.K} user channels for K={config.K} subcarriers")
        if self.max_taps > config.Ncp + 1:
            raise ConfigurationError(
                f"channel with {self.max_taps} taps needs Ncp >= {self.max_taps - 1}, got {config.Ncp}"
            )


@dataclass(frozen=True)
class EffectiveMatrix:
    """True (``Psi``) and nominal (``Psi_hat``) frequency-domain effective matrices."""

    Psi: np.ndarray
    Psi_hat: np.ndarray


def _time_blocks(config: GfdmConfig, filt: FilterSpec, lam: np.ndarray) -> np.ndarray:
    """Time-domain nominal matrix ``[H_k Phi_k]_k`` from per-user responses ``lam`` (K x N)."""
    Phi = modulation_matrix(config, filt).Phi
    K, M, N = config.K, config.M, config.N
    out = np.empty((N, N), complex)
    for k in range(K):
        blk = Phi[:, k * M:(k + 1) * M]
        out[:, k * M:(k + 1) * M] = np.fft.ifft(lam[k][:, None] * np.fft.fft(blk, axis=0), axis=0)
    return out


def _apply_cfo(config: GfdmConfig, A: np.ndarray, cfo: CfoProfile) -> np.ndarray:
    K, M, N = config.K, config.M, config.N
    steps = cfo.phase_steps(K)
    B = A.copy()
    for k in range(K):
        B[:, k * M:(k + 1) * M] *= phase_ramp(N, steps[k])[:, None]
    return B


def build_uplink_matrices(config: GfdmConfig, filt: FilterSpec, channels: UplinkChannelSet,
                          cfo: CfoProfile) -> EffectiveMatrix:
    _check_match(config, filt)
    channels.check(config)
    if cfo.eps.size != config.K:
        raise InvalidDimensionError(f"{cfo.eps.size} CFO values for K={config.K} users")
    A = _time_blocks(config, filt, channels.eigenvalues(config.N))
    B = _apply_cfo(config, A, cfo)
    W = dft_matrix(config.N)
    return EffectiveMatrix(Psi=W @ B, Psi_hat=W @ A)


def _check_cond(X: np.ndarray, what: str):
    c = np.linalg.cond(X)
    if not np.isfinite(c) or c > COND_LIMIT:
        raise SingularEffectiveMatrixError(f"{what} is numerically singular (cond={c:.3g})")


def zf_rate_cfo_known(effective: EffectiveMatrix, snr: Snr, K: Optional[int] = None) -> RateReport:
    """ZF rate when the receiver inverts the true ``Psi``."""
    s = _snr(snr)
    Psi = effective.Psi
    _check_cond(Psi, "Psi")
    Q = np.linalg.inv(Psi.conj().T @ Psi)
    sinr = s / np.real(np.diag(Q))
    return RateReport.from_sinr("ZF", _shape(sinr, K))


def _shape(sinr, K):
    return sinr.reshape(K, -1) if K else sinr[None, :]


def nominal_sinr(T: np.ndarray, noise: np.ndarray, snr: float) -> np.ndarray:
    """SINR per row of ``T = Psi_hat^{-1} Psi`` with per-row noise gains."""
    p = np.abs(T) ** 2
    sig = np.diag(p)
    interf = p.sum(axis=1) - sig
    return sig / (interf + noise / snr)


def zf_rate_cfo_nominal(effective: EffectiveMatrix, snr: Snr, noise_model: str = "row_norm",
                        K: Optional[int] = None) -> RateReport:
    """Rate of the nominal ZF receiver ``Psi_hat^{-1}`` under CFO.

    ``noise_model="row_norm"`` uses the exact output noise variance (squared
    row norm of ``Psi_hat^{-1}``); ``"literal"`` uses only its diagonal entry.
    """
    if noise_model not in NOISE_MODELS:
        raise ConfigurationError(f"unknown noise model {noise_model!r}")
    s = _snr(snr)
    _check_cond(effective.Psi_hat, "Psi_hat")
    Vinv = np.linalg.inv(effective.Psi_hat)
    T = Vinv @ effective.Psi
    if noise_model == "row_norm":
        noise = np.sum(np.abs(Vinv) ** 2, axis=1)
    else:
        noise = np.abs(np.diag(Vinv)) ** 2
    return RateReport.from_sinr("ZF", _shape(np.maximum(nominal_sinr(T, noise, s), 0.0), K))


# ---------------------------------------------------------------------------
# Monte Carlo objective with analytic gradient


@dataclass(frozen=True)
class CfoDraws:
    """Frozen Monte Carlo draws: CFO per user and, optionally, channels."""

    eps: np.ndarray  # n_draws x K
    channels: Optional[List[UplinkChannelSet]] = None
    convention: str = "normalized"

    @property
    def n(self) -> int:
        return self.eps.shape[0]


def draw_cfo_set(K: int, half_width: float, n_draws: int, seed, channel_profile: str = "awgn",
                 convention: str = "normalized", **channel_kw) -> CfoDraws:
    """Generate ``n_draws`` indexed draws from one seeded stream."""
    if n_draws < 1:
        raise ConfigurationError("need at least one Monte Carlo draw")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    eps = np.stack([sample_cfo(K, half_width, rng, convention).eps for _ in range(n_draws)])
    chans = None
    if channel_profile == "pedestrian_b":
        chans = [UplinkChannelSet.pedestrian_b(K, rng, **channel_kw) for _ in range(n_draws)]
    elif channel_profile != "awgn":
        raise ConfigurationError(f"unknown channel profile {channel_profile!r}")
    return CfoDraws(eps, chans, convention)


def screen_draws(config: GfdmConfig, filt: FilterSpec, draws: CfoDraws, rng: np.random.Generator,
                 **channel_kw) -> CfoDraws:
    """Replace any channel draw whose nominal matrix is singular for ``filt``.

    The nominal matrix does not involve the offsets, so only fading draws can
    be singular. Each offending draw is redrawn once from ``rng``; a second
    failure raises.
    """
    if draws.channels is None:
        return draws
    chans = list(draws.channels)
    for d, ch in enumerate(chans):
        try:
            _check_cond(_time_blocks(config, filt, ch.eigenvalues(config.N)), f"nominal matrix of draw {d}")
        except SingularEffectiveMatrixError:
            chans[d] = UplinkChannelSet.pedestrian_b(config.K, rng, **channel_kw)
            _check_cond(_time_blocks(config, filt, chans[d].eigenvalues(config.N)),
                        f"nominal matrix of redrawn draw {d}")
    return CfoDraws(draws.eps, chans, draws.convention)


def _phi_blocks_adjoint(config: GfdmConfig, G_Phi: np.ndarray) -> np.ndarray:
    """Map ``df/dconj(Phi)`` to ``df/dconj(gamma)`` through ``Phi_k = W^H P_k F``."""
    K, M, N = config.K, config.M, config.N
    X = np.fft.fft(G_Phi, axis=0) / np.sqrt(N)  # W G_Phi
    G_F = np.zeros((2 * M, M), complex)
    for k in range(K):
        blk = X[:, k * M:(k + 1) * M]
        kp = (k - 1) % K
        G_F[:M] += blk[k * M:(k + 1) * M]
        G_F[M:] += blk[kp * M:(kp + 1) * M]
    RW = np.vstack([dft_matrix(M)] * 2)
    return np.sum(G_F * np.conj(RW), axis=1)


class CfoRateObjective:
    """Sample-mean nominal-ZF sum rate over frozen CFO draws.

    ``value_and_grad`` returns the mean rate and its gradient as a complex
    array ``G`` (``d/dRe(gamma) = G.real``, ``d/dIm(gamma) = G.imag``).

    With a channel shared by every user and every draw, the per-draw
    products are expanded in a Taylor series of the phase ramp so that each
    evaluation needs a fixed number of N x N products regardless of the
    number of draws. Otherwise every draw is solved directly.
    """

    def __init__(self, config: GfdmConfig, snr: Snr, draws: CfoDraws, noise_model: str = "row_norm",
                 channel: Optional[ChannelSpec] = None, method: str = "auto", taylor_tol: float = 1e-15):
        if noise_model not in NOISE_MODELS:
            raise ConfigurationError(f"unknown noise model {noise_model!r}")
        if draws.eps.shape[1] != config.K:
            raise InvalidDimensionError("draws do not match K")
        self.config = config
        self.snr = _snr(snr)
        self.draws = draws
        self.noise_model = noise_model
        K, N = config.K, config.N
        self.steps = np.stack([CfoProfile(e, draws.convention).phase_steps(K) for e in draws.eps])
        if draws.channels is None:
            ch = channel or ChannelSpec.awgn()
            self.shared_lam = ch.eigenvalues(N)
        else:
            for c in draws.channels:
                c.check(config)
            self.shared_lam = None
        centre = (N - 1) / 2.0
        self._centre = centre
        xmax = float(np.max(np.abs(self.steps))) * centre if self.steps.size else 0.0
        self.order = _taylor_order(xmax, taylor_tol)
        if method == "auto":
            method = "taylor" if (self.shared_lam is not None and self.order <= 30) else "direct"
        if method == "taylor" and self.shared_lam is None:
            raise ConfigurationError("Taylor evaluation needs a channel shared across draws")
        if method not in ("taylor", "direct"):
            raise ConfigurationError(f"unknown method {method!r}")
        self.method = method
        self.W = dft_matrix(N) if noise_model == "literal" else None

    # -- helpers -----------------------------------------------------------
    def _blocks(self, filt, lam_users):
        return _time_blocks(self.config, filt, lam_users)

    def _noise(self, Y):
        if self.noise_model == "row_norm":
            return np.sum(np.abs(Y) ** 2, axis=1)
        Z = np.einsum("ij,ji->i", Y, self.W.conj().T)
        return np.abs(Z) ** 2

    def _noise_adjoint(self, Y, wv):
        # wv = df/dV_n; returns df/dconj(Y)
        if self.noise_model == "row_norm":
            return wv[:, None] * Y
        Z = np.einsum("ij,ji->i", Y, self.W.conj().T)
        return (wv * Z)[:, None] * self.W

    def _rate_terms(self, D2, U, V):
        """Per (n, d) rates and their sensitivities to U, |D|^2 and V."""
        den = U - D2 + V / self.snr
        tot = U + V / self.snr
        rate = np.log2(tot / den)
        a = (1.0 / tot - 1.0 / den) / math.log(2)
        b = 1.0 / den / math.log(2)
        return rate, a, b

    # -- public ------------------------------------------------------------
    def value(self, gamma) -> float:
        return self._run(gamma, grad=False)[0]

    def value_and_grad(self, gamma):
        return self._run(gamma, grad=True)

    def per_draw(self, gamma) -> np.ndarray:
        """Sum rate of each draw (bits per symbol)."""
        return self._run(gamma, grad=False, per_draw=True)

    def _run(self, gamma, grad: bool, per_draw: bool = False):
        filt = FilterSpec(gamma)
        _check_match(self.config, filt)
        if self.method == "taylor":
            return self._taylor(filt, grad, per_draw)
        return self._direct(filt, grad, per_draw)

    def _direct(self, filt, grad, per_draw):
        cfg = self.config
        K, M, N = cfg.K, cfg.M, cfg.N
        nd = self.draws.n
        Phi = modulation_matrix(cfg, filt).Phi if grad else None
        total = 0.0
        rates = np.zeros(nd)
        G_Phi = np.zeros((N, N), complex)
        shared_A = None
        for d in range(nd):
            if self.shared_lam is not None:
                lam = np.broadcast_to(self.shared_lam, (K, N))
                if shared_A is None:
                    shared_A = self._blocks(filt, lam)
                    _check_cond(shared_A, "Psi_hat")
                    shared_Y = np.linalg.inv(shared_A)
                A, Y = shared_A, shared_Y
            else:
                lam = self.draws.channels[d].eigenvalues(N)
                A = self._blocks(filt, lam)
                _check_cond(A, "Psi_hat")
                Y = np.linalg.inv(A)
            ramps = np.stack([phase_ramp(N, s) for s in self.steps[d]])  # K x N
            B = A * np.repeat(ramps, M, axis=0).T
            T = Y @ B
            P2 = np.abs(T) ** 2
            D2 = np.diag(P2).copy()
            U = P2.sum(axis=1)
            V = self._noise(Y)
            r, a, b = self._rate_terms(D2, U, V)
            rates[d] = r.sum()
            if not grad:
                continue
            a, b = a / nd, b / nd
            G_T = a[:, None] * T
            G_T[np.diag_indices(N)] += b * np.diag(T)
            G_B = Y.conj().T @ G_T
            G_Y = G_T @ B.conj().T + self._noise_adjoint(Y, a / self.snr)
            G_A = -Y.conj().T @ G_Y @ Y.conj().T
            # B = Pi A blockwise; A_k = H_k Phi_k
            G_A = G_A + np.repeat(ramps, M, axis=0).T.conj() * G_B
            for k in range(K):
                sl = slice(k * M, (k + 1) * M)
                G_Phi[:, sl] += np.fft.ifft(np.conj(lam[k])[:, None] * np.fft.fft(G_A[:, sl], axis=0), axis=0)
        if per_draw:
            return rates
        total = float(np.mean(rates))
        if not grad:
            return total, None
        return total, 2.0 * _phi_blocks_adjoint(cfg, G_Phi)

    def _taylor(self, filt, grad, per_draw):
        cfg = self.config
        K, M, N = cfg.K, cfg.M, cfg.N
        nd, P = self.draws.n, self.order
        lam = np.broadcast_to(self.shared_lam, (K, N))
        A = self._blocks(filt, lam)
        _check_cond(A, "Psi_hat")
        Y = np.linalg.inv(A)
        s = (np.arange(N) - self._centre) / self._centre if N > 1 else np.zeros(1)
        # Q_p = Y diag(s^p) A; the common phase exp(1j*step*centre) per user
        # block does not change any magnitude and is dropped.
        powers = s[None, :] ** np.arange(P)[:, None]  # P x N
        SA = (powers[:, :, None] * A[None, :, :]).transpose(1, 0, 2).reshape(N, P * N)
        Q = (Y @ SA).reshape(N, P, N).transpose(1, 0, 2)
        x = self.steps * self._centre  # nd x K
        fact = np.array([math.factorial(p) for p in range(P)], float)
        c = (1j * x[..., None]) ** np.arange(P) / fact  # nd x K x P
        # Gram of row segments: R[k, p, q, n] = sum_{i in block k} conj(Q_p[n,i]) Q_q[n,i]
        Qb = Q.reshape(P, N, K, M)
        R = np.einsum("pnkm,qnkm->kpqn", Qb.conj(), Qb)
        E = np.einsum("dkp,dkq->kdpq", c.conj(), c).reshape(K, nd, P * P)
        U = np.zeros((N, nd))
        for k in range(K):
            U += R[k].reshape(P * P, N).T.real @ E[k].T.real - R[k].reshape(P * P, N).T.imag @ E[k].T.imag
        own = np.arange(N) // M
        Qdiag = Q[:, np.arange(N), np.arange(N)]  # P x N
        Dv = np.einsum("dnp,pn->nd", c[:, own, :], Qdiag)
        D2 = np.abs(Dv) ** 2
        V = self._noise(Y)
        r, a, b = self._rate_terms(D2, U, V[:, None])
        rates = r.sum(axis=0)
        if per_draw:
            return rates
        total = float(np.mean(rates))
        if not grad:
            return total, None
        a, b = a / nd, b / nd
        # dU/dconj(Q_p[n,i]) = sum_q Omega_k[p,q,n] Q_q[n,i]
        G_Q = np.empty_like(Q)
        for k in range(K):
            Om = (a @ E[k]).reshape(N, P, P)  # n, p, q (E already holds conj(c_p) c_q)
            sl = slice(k * M, (k + 1) * M)
            G_Q[:, :, sl] = np.einsum("npq,qnm->pnm", Om, Q[:, :, sl])
        # diagonal term: b * conj(c_p) * D
        G_Q[:, np.arange(N), np.arange(N)] += np.einsum("nd,dnp->pn", b * Dv, c[:, own, :].conj())
        G_Y = self._noise_adjoint(Y, a.sum(axis=1) / self.snr)
        G_A = -Y.conj().T @ G_Y @ Y.conj().T
        # sum_p S^p Y^H G_p - Y^H (sum_p G_p Q_p^H), each as one wide product
        YhG = (Y.conj().T @ G_Q.transpose(1, 0, 2).reshape(N, P * N)).reshape(N, P, N)
        G_A += np.einsum("pn,npm->nm", powers, YhG)
        GQ = G_Q.transpose(1, 0, 2).reshape(N, P * N) @ Q.transpose(1, 0, 2).reshape(N, P * N).conj().T
        G_A -= Y.conj().T @ GQ
        G_Phi = np.empty_like(G_A)
        for k in range(K):
            sl = slice(k * M, (k + 1) * M)
            G_Phi[:, sl] = np.fft.ifft(np.conj(lam[k])[:, None] * np.fft.fft(G_A[:, sl], axis=0), axis=0)
        return total, 2.0 * _phi_blocks_adjoint(cfg, G_Phi)


def _taylor_order(xmax: float, tol: float) -> int:
    """Smallest order whose series remainder bound for exp(1j*x) is below ``tol``."""
    p, term = 1, 1.0
    while True:
        term *= xmax / p
        if term * (1.0 + xmax) < tol or xmax == 0.0:
            return max(p, 1)
        p += 1
        if p > 400:
            return p
