# Core data model for crop_spectra
