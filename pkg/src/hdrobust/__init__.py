"""Robust estimation for high-dimensional heavy-tailed time series."""

__version__ = "0.1.0"
