"""Robust asynchronous push-sum consensus and distributed learning simulator."""

__version__ = "0.1.0"
