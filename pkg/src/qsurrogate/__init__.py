"""Hybrid quantum-classical surrogate models for inverse finite-element displacement prediction."""

__version__ = "0.1.0"
