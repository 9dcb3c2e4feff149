"""Power spectral density of the continuous-time GFDM signal.

Each subsymbol pulse ``g_m(t)`` is a trigonometric polynomial confined to the
symbol interval (or to the CP/suffix-extended interval when windowing is
used). Its Fourier transform is therefore a sum of shifted copies of the
window transform ``W(f)``, one per filter coefficient, which is what every
function here evaluates. All PSD values are linear; dB conversion is left to
the caller.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigurationError, DomainError, InvalidDimensionError
from .model import FilterSpec, GfdmConfig, _check_match


@dataclass(frozen=True)
class WindowSpec:
    """Symmetric prefix/suffix taper ``w_1..w_Nw`` (outermost sample first)."""

    taper: np.ndarray

    def __post_init__(self):
        t = np.array(self.taper, dtype=float).ravel()
        if np.any(t < 0) or np.any(t > 1) or not np.all(np.isfinite(t)):
            raise DomainError("taper values must lie in [0, 1]")
        t.setflags(write=False)
        object.__setattr__(self, "taper", t)

    @property
    def Nw(self) -> int:
        return self.taper.size

    @classmethod
    def rectangular(cls, Nw: int) -> "WindowSpec":
        return cls(np.ones(Nw))

    @classmethod
    def raised_cosine(cls, Nw: int) -> "WindowSpec":
        """Raised-cosine ramp, a common fixed choice for prefix/suffix windowing."""
        i = np.arange(1, Nw + 1)
        return cls(0.5 * (1.0 - np.cos(np.pi * i / (Nw + 1))))

    def full(self, config: GfdmConfig) -> np.ndarray:
        """Unnormalized window over the ``Ncp + N + Nw`` transmitted samples."""
        self._check(config)
        w = np.ones(config.Ncp + config.N + config.Nw)
        if self.Nw:
            w[: self.Nw] = self.taper
            w[-self.Nw:] = self.taper[::-1]
        return w

    def unit_norm(self, config: GfdmConfig) -> np.ndarray:
        w = self.full(config)
        return w / np.linalg.norm(w)

    def gain(self, config: GfdmConfig) -> float:
        """Factor making the applied window RMS-normalized (unit-norm shape
        scaled by ``sqrt(Ncp + N + Nw)``), so a rectangular window is all ones."""
        w = self.full(config)
        return float(np.sqrt(w.size) / np.linalg.norm(w))

    def _check(self, config: GfdmConfig):
        if self.Nw != config.Nw:
            raise InvalidDimensionError(f"taper has {self.Nw} samples but config has Nw={config.Nw}")

    def to_dict(self) -> dict:
        return {"taper": [float(v) for v in self.taper]}


@dataclass(frozen=True)
class PsdGrid:
    f: np.ndarray
    p: np.ndarray
    config_digest: str = ""
    filter_digest: str = ""
    windowed: bool = False

    def __post_init__(self):
        if self.f.shape != self.p.shape:
            raise InvalidDimensionError("frequency and PSD arrays differ in length")

    @property
    def p_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.p)

    def to_csv(self, header: Optional[str] = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(header)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f", "p_linear", "p_db"])
        for f, p, d in zip(self.f, self.p, self.p_db):
            w.writerow([format(f, ".10g"), format(p, ".10g"), format(d, ".10g")])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "f": self.f.tolist(),
            "p": self.p.tolist(),
            "config_digest": self.config_digest,
            "filter_digest": self.filter_digest,
            "windowed": self.windowed,
        }


def _span(config: GfdmConfig, windowed: bool):
    """First sample index and sample count of the (extended) pulse support."""
    if windowed:
        return -config.Ncp, config.Ncp + config.N + config.Nw
    return 0, config.N


def period(config: GfdmConfig, windowed: bool) -> float:
    """Cyclostationarity period: ``Tb`` without windowing, ``Tcp + Tb`` with."""
    return (config.N + (config.Ncp if windowed else 0)) * config.dt


def _window_parts(config: GfdmConfig, nu, windowed: bool):
    """Rectangle transform over the pulse support plus, for windowed
    signals, one correction term per taper sample pair.

    The unnormalized windowed transform is ``rect + sum_i (w_i - 1) terms[i]``.
    """
    dt = config.dt
    n0, n = _span(config, windowed)
    T = n * dt
    rect = T * np.exp(-2j * np.pi * nu * (n0 * dt + T / 2)) * np.sinc(nu * T)
    terms = []
    if windowed and config.Nw:
        cell = dt * np.sinc(nu * dt)
        for i in range(config.Nw):
            first, last = n0 + i, n0 + n - 1 - i
            terms.append(cell * (np.exp(-2j * np.pi * nu * (first + 0.5) * dt)
                                 + np.exp(-2j * np.pi * nu * (last + 0.5) * dt)))
    return rect, terms


def window_transform(config: GfdmConfig, nu, window: Optional[WindowSpec] = None):
    """Fourier transform of the continuous window ``w(t)``.

    ``w(t)`` is piecewise constant over sample intervals. Without a window
    it is the indicator of ``[0, Tb]``; with one it spans ``[-Tcp, Tb + Tw]``
    with the RMS-normalized taper on the outer ``Nw`` samples at each end.
    The sinc form stays accurate at the removable singularities ``nu = 0``.
    """
    nu = np.asarray(nu, dtype=float)
    rect, terms = _window_parts(config, nu, window is not None)
    if window is None:
        return rect
    window._check(config)
    for wi, t in zip(window.taper, terms):
        rect = rect + (wi - 1.0) * t
    return window.gain(config) * rect


def _component_freqs(config: GfdmConfig) -> np.ndarray:
    """Frequencies of the 2M exponentials making up ``g_m(t)``."""
    M = config.M
    j = np.arange(2 * M)
    return np.where(j < M, j, j - 2 * M) / config.Tb


def gm_fourier(config: GfdmConfig, filt: FilterSpec, m: int, f, window: Optional[WindowSpec] = None):
    """Fourier transform ``G_m(f)`` of subsymbol pulse ``m`` (windowed if a
    window is given)."""
    _check_match(config, filt)
    if not 0 <= m < config.M:
        raise InvalidDimensionError(f"subsymbol index {m} outside 0..{config.M - 1}")
    f = np.asarray(f, dtype=float)
    M, N = config.M, config.N
    q = np.arange(M)
    phase = np.tile(np.exp(-2j * np.pi * m * q / M), 2)
    a = _component_freqs(config)
    W = window_transform(config, f[..., None] - a, window)
    return (W * (filt.gamma * phase)).sum(axis=-1) / np.sqrt(N * M)


def _baseband(config, filt, Ps, f, window):
    # sum_m |G_m|^2 collapses to (1/N) sum_q |c_q|^2 by Parseval over m
    M = config.M
    a = _component_freqs(config)
    W = window_transform(config, f[..., None] - a, window)
    c = filt.forward * W[..., :M] + filt.reverse * W[..., M:]
    T = period(config, window is not None)
    return Ps / (T * config.N) * np.sum(np.abs(c) ** 2, axis=-1)


def _grid(config, filt, f, p, windowed):
    return PsdGrid(np.asarray(f, float), p, config.digest(), filt.digest(), windowed)


def psd_baseband(config: GfdmConfig, filt: FilterSpec, Ps: float, f_grid) -> PsdGrid:
    """PSD of one subcarrier's baseband signal, ``(Ps/Tb) sum_m |G_m(f)|^2``."""
    _check_match(config, filt)
    f = np.asarray(f_grid, dtype=float)
    return _grid(config, filt, f, _baseband(config, filt, Ps, f, None), False)


def _shifted_sum(config, filt, Ps, f, window):
    shifts = np.arange(config.K) / config.Ts
    out = np.zeros(f.shape)
    for s in shifts:
        out += _baseband(config, filt, Ps, f - s, window)
    return out


def psd_total(config: GfdmConfig, filt: FilterSpec, Ps: float, f_grid) -> PsdGrid:
    """Overall PSD ``sum_k P_BB(f - k/Ts)`` without CP or windowing."""
    _check_match(config, filt)
    f = np.asarray(f_grid, dtype=float)
    return _grid(config, filt, f, _shifted_sum(config, filt, Ps, f, None), False)


def psd_windowed(config: GfdmConfig, filt: FilterSpec, window: Optional[WindowSpec], Ps: float, f_grid) -> PsdGrid:
    """PSD with CP, suffix and taper; power is measured per period ``Tcp + Tb``."""
    _check_match(config, filt)
    window = window if window is not None else WindowSpec.rectangular(config.Nw)
    f = np.asarray(f_grid, dtype=float)
    return _grid(config, filt, f, _shifted_sum(config, filt, Ps, f, window), True)


def psd_evaluator(config: GfdmConfig, filt: FilterSpec, Ps: float = 1.0, window: Optional[WindowSpec] = None) -> Callable:
    """Callable ``f -> P(f)`` for use with :func:`oob_objective`."""
    _check_match(config, filt)

    def evaluate(f):
        return _shifted_sum(config, filt, Ps, np.asarray(f, float), window)

    return evaluate


def stopband_offsets(config: GfdmConfig, guard: float, density: int = 8, span: float = 2.0) -> np.ndarray:
    """Offsets ``f`` from ``guard`` to ``guard + span*K/Ts`` spaced ``1/(density*Tb)``."""
    if density < 1 or span <= 0:
        raise ConfigurationError("stopband grid needs density >= 1 and span > 0")
    step = 1.0 / (density * config.Tb)
    count = int(round(span * config.K / config.Ts / step))
    if count < 1:
        raise ConfigurationError("empty stopband grid")
    return guard + step * np.arange(count + 1)


def skirt_frequencies(config: GfdmConfig, offsets):
    """Left and right stopband frequencies ``-1/Ts - f`` and ``K/Ts + f``."""
    offsets = np.asarray(offsets, float)
    return -1.0 / config.Ts - offsets, config.K / config.Ts + offsets


def oob_objective(
    config: GfdmConfig,
    psd: Union[Callable, PsdGrid],
    guard: float,
    density: int = 8,
    span: float = 2.0,
) -> float:
    """Worst-case stopband emission ``max_f P(-1/Ts - f) + P(K/Ts + f)``.

    ``psd`` is either a callable evaluator or a :class:`PsdGrid` (linearly
    interpolated). ``guard`` is the transition width, usually ``1/Ts``.
    """
    offs = stopband_offsets(config, guard, density, span)
    left, right = skirt_frequencies(config, offs)
    if isinstance(psd, PsdGrid):
        if left.min() < psd.f[0] or right.max() > psd.f[-1]:
            raise ConfigurationError("PSD grid does not cover the stopband")
        vals = np.interp(left, psd.f, psd.p) + np.interp(right, psd.f, psd.p)
    else:
        vals = np.asarray(psd(left)) + np.asarray(psd(right))
    return float(np.max(vals))


class StopbandModel:
    """Stopband emission as a quadratic form in the filter coefficients.

    For every grid offset ``f_j`` the summed skirt power is
    ``sum_q A[j,q]|g_q|^2 + B[j,q]|g_{M+q}|^2 + 2 Re(conj(g_q) g_{M+q} C[j,q])``.
    The window transform is sampled once on a frequency lattice so that the
    coefficients can be rebuilt cheaply when the taper changes.
    """

    def __init__(self, config: GfdmConfig, guard: float, Ps: float = 1.0,
                 window: Optional[WindowSpec] = None, windowed: Optional[bool] = None,
                 density: int = 8, span: float = 2.0):
        self.config = config
        self.guard = guard
        self.Ps = Ps
        self.density = density
        self.windowed = window is not None if windowed is None else windowed
        self.offsets = stopband_offsets(config, guard, density, span)
        K, M = config.K, config.M
        J = self.offsets.size
        step = 1.0 / (density * config.Tb)
        shifts = np.arange(-M, K * M)  # DFT-bin offsets of all components
        self._lattices = []
        for f0, sign in ((-1.0 / config.Ts - guard, -1), (K / config.Ts + guard, 1)):
            raw = sign * np.arange(J)[:, None] - density * shifts[None, :]
            lo = raw.min()
            nu = f0 + (np.arange(raw.max() - lo + 1) + lo) * step
            self._lattices.append((raw - lo, nu))
        # bins used by subcarrier k: own block starts at kM, reverse block at (k-1)M
        self._own = (np.arange(K)[:, None] * M + np.arange(M)[None, :]) + M
        self._rev = self._own - M
        self.set_window(window)

    def set_window(self, window: Optional[WindowSpec]):
        if window is not None and not self.windowed:
            raise ConfigurationError("window given for an unwindowed model")
        if self.windowed:
            window = window if window is not None else WindowSpec.rectangular(self.config.Nw)
            window._check(self.config)
        self.window = window
        if not hasattr(self, "_basis"):
            self._basis = [_window_parts(self.config, nu, self.windowed) for _, nu in self._lattices]
        self._update()

    def _update(self):
        M = self.config.M
        kappa = self.Ps / (period(self.config, self.windowed) * self.config.N)
        A = np.zeros((self.offsets.size, M))
        B = np.zeros_like(A)
        C = np.zeros((self.offsets.size, M), complex)
        for (idx, _), (rect, terms) in zip(self._lattices, self._basis):
            W = rect
            if self.window is not None:
                for wi, t in zip(self.window.taper, terms):
                    W = W + (wi - 1.0) * t
                W = W * self.window.gain(self.config)
            Wjs = W[idx]
            own = Wjs[:, self._own]  # J x K x M
            rev = Wjs[:, self._rev]
            A += np.sum(np.abs(own) ** 2, axis=1)
            B += np.sum(np.abs(rev) ** 2, axis=1)
            C += np.sum(np.conj(own) * rev, axis=1)
        self.A, self.B, self.C = kappa * A, kappa * B, kappa * C

    def set_taper(self, taper):
        self.set_window(WindowSpec(taper))

    def values(self, gamma) -> np.ndarray:
        g = np.asarray(gamma, complex)
        M = self.config.M
        gf, gr = g[:M], g[M:]
        return self.A @ np.abs(gf) ** 2 + self.B @ np.abs(gr) ** 2 + 2.0 * np.real(self.C @ (np.conj(gf) * gr))

    def objective(self, gamma) -> float:
        return float(np.max(self.values(gamma)))

    def smoothed(self, gamma, p: float):
        """p-norm of the stopband values and its gradient.

        The gradient is returned as a complex array ``G`` with
        ``d/dRe(gamma) = G.real`` and ``d/dIm(gamma) = G.imag``.
        """
        g = np.asarray(gamma, complex)
        M = self.config.M
        v = self.values(g)
        top = np.max(v)
        r = v / top
        S = top * np.sum(r ** p) ** (1.0 / p)
        wts = (v / S) ** (p - 1)
        gf, gr = g[:M], g[M:]
        Aw, Bw, Cw = wts @ self.A, wts @ self.B, wts @ self.C
        grad = np.concatenate([gf * Aw + gr * Cw, gr * Bw + gf * np.conj(Cw)])
        return float(S), 2.0 * grad
