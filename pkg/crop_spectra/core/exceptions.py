"""Custom exceptions for crop_spectra."""


class CropSpectraError(Exception):
    """Base exception for crop_spectra."""

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(self.message)


class ConfigError(CropSpectraError):
    """Exception raised for invalid configuration or command usage."""

    pass


class DatasetError(CropSpectraError):
    """Exception raised for unreadable libraries, schema and label errors."""

    pass


class ModelError(CropSpectraError):
    """Exception raised for model misuse (wrong mode, dimension mismatch, bad model file)."""

    pass


class NumericalError(CropSpectraError):
    """Exception raised when a covariance cannot be factorized."""

    pass
