"""Malicious short-link detection and encoder-account profiling."""

__version__ = "0.1.0"
