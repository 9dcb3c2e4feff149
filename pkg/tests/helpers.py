"""Brute-force references shared by the test modules.

These are written from the defining sums, pulse by pulse, and do not reuse
the library's factorized constructions.
"""
import cmath
import math

import numpy as np

from gfdmdesign.model import FilterSpec


def random_filter(rng, M, complex_=True) -> FilterSpec:
    g = rng.standard_normal(2 * M) + (1j * rng.standard_normal(2 * M) if complex_ else 0)
    return FilterSpec(g * math.sqrt(M / np.sum(np.abs(g) ** 2)))


def pulse_loop(gamma, K, M):
    """g[n] from the closed sum over the 2M frequency-domain coefficients."""
    N = K * M
    g = np.zeros(N, complex)
    for n in range(N):
        acc = 0j
        for q in range(M):
            acc += cmath.exp(2j * math.pi * n * q / N) * (gamma[q] + cmath.exp(-2j * math.pi * n / K) * gamma[M + q])
        g[n] = acc / (math.sqrt(K) * M)
    return g


def dense_phi(gamma, K, M):
    """Modulation matrix assembled column by column from shifted, modulated pulses."""
    N = K * M
    g = pulse_loop(gamma, K, M)
    n = np.arange(N)
    Phi = np.empty((N, N), complex)
    for k in range(K):
        for m in range(M):
            Phi[:, k * M + m] = g[(n - m * K) % N] * np.exp(2j * np.pi * k * n / K)
    return Phi


def modulate_loop(gamma, K, M, s):
    """x[n] = sum_k sum_m s[kM+m] g[(n - mK) mod N] e^{i 2 pi k n / K}, one sample at a time."""
    N = K * M
    g = pulse_loop(gamma, K, M)
    x = np.zeros(N, complex)
    for n in range(N):
        for k in range(K):
            for m in range(M):
                x[n] += s[k * M + m] * g[(n - m * K) % N] * cmath.exp(2j * math.pi * k * n / K)
    return x


def circulant_from_taps(h, N):
    H = np.zeros((N, N), complex)
    for i in range(N):
        for j, t in enumerate(h):
            H[(i + j) % N, i] += t
    return H


def random_taps(rng, L):
    h = rng.standard_normal(L) + 1j * rng.standard_normal(L)
    return h / np.linalg.norm(h)


# ---------------------------------------------------------------------------
# continuous-time references


def pulse_ct(gamma, K, M, m, t, Ts=1.0):
    """g_m(t) as the trigonometric sum over the 2M coefficients (no support cut)."""
    N = K * M
    t = np.asarray(t, float)
    acc = np.zeros(t.shape, complex)
    for q in range(M):
        ph = np.exp(-2j * np.pi * m * q / M) * np.exp(2j * np.pi * q * t / (M * Ts))
        acc += ph * (gamma[q] + np.exp(-2j * np.pi * t / Ts) * gamma[M + q])
    return acc / math.sqrt(N * M)


def gm_closed_form(gamma, K, M, m, f, Ts=1.0):
    """Transform of g_m over [0, Tb] from the sum of shifted rectangle transforms (generic f only)."""
    N, Tb = K * M, M * Ts
    f = np.asarray(f, float)
    out = np.zeros(f.shape, complex)
    for q in range(M):
        c = np.exp(-2j * np.pi * m * q / M)
        out += c * (np.exp(-2j * np.pi * Tb * f) - 1) * (
            gamma[q] / (2j * np.pi * (q / Tb - f)) + gamma[M + q] / (2j * np.pi * (q / Tb - f - 1 / Ts)))
    return out / math.sqrt(N * M)


def gm_quadrature(gamma, K, M, m, f, Ts=1.0, window=None, Ncp=0, oversample=64):
    """Fourier integral of g_m(t) w(t) by composite Gauss-Legendre quadrature.

    Each sample interval of length Ts/K is split into ``oversample // 16``
    cells with 16 nodes each; ``window`` lists the piecewise-constant window
    value of every sample interval starting at ``-Ncp``.
    """
    dt = Ts / K
    n_int = K * M if window is None else len(window)
    x, wq = np.polynomial.legendre.leggauss(16)
    cells = oversample // 16
    h = dt / cells
    starts = (-Ncp + np.arange(n_int * cells) / cells) * dt
    t = (starts[:, None] + (x[None, :] + 1) * h / 2).ravel()
    wts = np.tile(wq * h / 2, starts.size)
    if window is not None:
        wts = wts * np.repeat(np.asarray(window, float), cells * 16)
    g = pulse_ct(gamma, K, M, m, t, Ts) * wts
    f = np.atleast_1d(np.asarray(f, float))
    out = np.empty(f.size, complex)
    for i in range(0, f.size, 64):
        out[i:i + 64] = np.exp(-2j * np.pi * np.outer(f[i:i + 64], t)) @ g
    return out


def periodogram(gamma, K, M, n_symbols, rng, Ts=1.0, Ncp=0, window=None, R=32, batch=100):
    """Averaged periodogram of independently modulated symbols.

    Every symbol is synthesized as the band-limited continuous-time signal
    sampled R times per sample interval (midpoints), extended cyclically by
    the prefix/suffix, multiplied by the piecewise-constant ``window`` (one
    value per sample interval, or None for the bare symbol) and Fourier
    transformed by a zero-padded FFT. Power is divided by the repetition
    period (Ncp + N) Ts/K. Returns frequencies spaced 1/(2 Tb) and the
    estimate.
    """
    N, Tb = K * M, M * Ts
    dt = Ts / K
    h = dt / R
    n_int = N if window is None else len(window)
    t = (-Ncp + (np.arange(n_int * R) + 0.5) / R) * dt
    nfft = 2 * N * R
    # every symbol is a trigonometric polynomial on bins b/Tb, b = -M .. KM-1
    bins = np.arange(-M, K * M)
    E = np.exp(2j * np.pi * np.outer(t, bins) / Tb)
    if window is not None:
        E = E * np.repeat(np.asarray(window, float), R)[:, None]
    acc = np.zeros(nfft)
    q = np.arange(M)
    for start in range(0, n_symbols, batch):
        nb = min(batch, n_symbols - start)
        s = (rng.standard_normal((nb, K, M)) + 1j * rng.standard_normal((nb, K, M))) / math.sqrt(2)
        S = np.fft.fft(s, axis=2) / 1.0  # sum_m s_{k,m} e^{-i 2 pi m q / M}
        c = np.zeros((nb, bins.size), complex)
        for k in range(K):
            c[:, k * M + M + q] += gamma[q] * S[:, k, q]
            c[:, k * M + q] += gamma[M + q] * S[:, k, q]
        x = (c @ E.T) / math.sqrt(N * M)
        X = np.fft.fft(x, n=nfft, axis=1) * h
        acc += np.sum(np.abs(X) ** 2, axis=0)
    f = np.fft.fftfreq(nfft, d=h)
    order = np.argsort(f)
    return f[order], (acc / n_symbols / ((N + Ncp) * dt))[order]
