"""Quantum-dot single-photon source simulation and QKD key-rate analysis."""

__version__ = "0.1.0"
