"""Driven collective spin with collective decay: steady states, dynamics and correlations."""

__version__ = "0.1.0"
