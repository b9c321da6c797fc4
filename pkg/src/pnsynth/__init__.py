"""Pauli Network synthesis with a learned gate-selection policy."""

__version__ = "0.1.0"
