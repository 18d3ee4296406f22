"""Simulation of dynamic optical bistability in a double-lambda Raman oscillator."""

__version__ = "0.1.0"
