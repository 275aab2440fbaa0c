"""Succinct population computers for Presburger predicates and their conversion to protocols."""

__version__ = "0.1.0"
