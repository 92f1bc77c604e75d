"""Numerical toolkit for the copolymer model with pinning."""

__version__ = "0.1.0"
