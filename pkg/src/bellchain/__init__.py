"""Exact many-body Bell correlations of finite-range Ising chains."""

__version__ = "0.1.0"
