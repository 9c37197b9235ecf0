"""Bangla hate-speech classification toolkit."""

__version__ = "0.1.0"
