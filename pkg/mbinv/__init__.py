"""Structured inversion of Markov covariance matrices."""

__version__ = "1.0.0"
