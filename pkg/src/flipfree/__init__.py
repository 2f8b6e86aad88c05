"""Flip-ambiguity-free range-based localization with bounded errors."""

__version__ = "0.1.0"
