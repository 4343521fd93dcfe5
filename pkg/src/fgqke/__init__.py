"""Finite-geometry LDPC codes, their entanglement-assisted CSS augmentation,
and quantum-key-expansion post-processing with Monte Carlo rate estimation."""

from __future__ import annotations

__version__ = "0.1.0"
