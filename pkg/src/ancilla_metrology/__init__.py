"""Measurement-based spin-ensemble metrology with an ancillary qubit."""

__version__ = "0.1.0"
