"""Projections and martingale representations under information deletion."""

__version__ = "0.1.0"
