"""Regenerate golden.json from scratch.

Nothing here imports gfdmdesign: the raised-cosine samples come from scalar
``math`` calls, and the interference and MMSE references are read off a
modulation matrix assembled pulse by pulse from the time-domain filter
formula. Run from the repository root:

    python3 tests/data/generate_golden.py
"""
import cmath
import json
import math
from pathlib import Path

import numpy as np


def rc(u, alpha):
    u = abs(u)
    lo, hi = (1 - alpha) / 2, (1 + alpha) / 2
    if u <= lo:
        return 1.0
    if u > hi:
        return 0.0
    return 0.5 * (1 + math.cos(math.pi / alpha * (u - lo)))


def rrc_gamma(M, alpha):
    vals = []
    for j in range(2 * M):
        k = j if j < M else j - 2 * M
        vals.append(math.sqrt(rc((k - (M - 1) / 2) / M, alpha)))
    scale = math.sqrt(M / sum(v * v for v in vals))
    return [v * scale for v in vals]


def pulse(gamma, K, M, n):
    N = K * M
    acc = 0j
    for q in range(M):
        acc += cmath.exp(2j * math.pi * n * q / N) * (gamma[q] + cmath.exp(-2j * math.pi * n / K) * gamma[M + q])
    return acc / (math.sqrt(K) * M)


def dense_phi(gamma, K, M):
    N = K * M
    g = [pulse(gamma, K, M, n) for n in range(N)]
    Phi = np.empty((N, N), complex)
    for k in range(K):
        for m in range(M):
            for n in range(N):
                Phi[n, k * M + m] = g[(n - m * K) % N] * cmath.exp(2j * math.pi * k * n / K)
    return Phi


def mf_interference(gamma, K, M):
    G = dense_phi(gamma, K, M)
    G = G.conj().T @ G
    off = np.abs(G) ** 2
    np.fill_diagonal(off, 0.0)
    return float(off[0].sum())  # every row carries the same interference


def mmse_rate(gamma, K, M, snr):
    Phi = dense_phi(gamma, K, M)
    inv = np.linalg.inv(Phi.conj().T @ Phi + np.eye(K * M) / snr)
    d = np.real(np.diag(inv))
    return float(np.sum(np.log2(snr / d)))


def main():
    r9 = rrc_gamma(9, 0.9)
    r9h = rrc_gamma(9, 0.5)
    r5h = rrc_gamma(5, 0.5)
    a = mf_interference(r9h, 30, 9)
    out = {
        "rrc_M9_alpha0.9": r9,
        "mf_rrc_K30_M9_alpha0.5": {"a_gamma": a, "sinr_0dB": 1.0 / (a + 1.0)},
        "mmse_rrc_K6_M5_alpha0.5_10dB": mmse_rate(r5h, 6, 5, 10.0),
    }
    path = Path(__file__).with_name("golden.json")
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
