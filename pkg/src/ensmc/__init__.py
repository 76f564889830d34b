"""Ensemble MCMC for targets with fast and slow variables."""

__version__ = "0.1.0"
