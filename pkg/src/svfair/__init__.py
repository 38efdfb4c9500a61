"""Subgroup fairness evaluation for speaker verification scores."""

__version__ = "0.1.0"
