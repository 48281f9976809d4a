"""Numerical checks of additivity for entanglement-breaking quantum channels."""

__version__ = "0.1.0"
SCHEMA = "ebchan/1"
