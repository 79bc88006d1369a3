"""Curriculum learning for compound expression recognition."""
__version__ = "0.1.0"
