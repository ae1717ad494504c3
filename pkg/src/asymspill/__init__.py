"""Asymmetric volatility spillovers from realized semivariances."""

__version__ = "0.1.0"
