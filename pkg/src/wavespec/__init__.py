"""Finite-dimensional toolkit for boundary control, inflation and wave spectra."""

__version__ = "0.1.0"
