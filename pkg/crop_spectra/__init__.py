# crop_spectra package
"""Crop identification from hyperspectral spectral libraries."""

__version__ = "0.1.0a1"
