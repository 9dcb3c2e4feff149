"""GFDM filter and window design: signal model, rate analysis, PSD and
out-of-band emission, uplink CFO model, and the numerical design solvers."""

__version__ = "0.1.0"
