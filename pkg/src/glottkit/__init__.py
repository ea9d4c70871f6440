"""Glottal inverse filtering and voice-quality analysis."""

__version__ = "0.1.0"
