# Test package for crop_spectra
