"""Exception types shared across the package."""


class SkinSimError(Exception):
    """Base class for all package errors."""


class ConfigError(SkinSimError):
    """Invalid layout, mounting, or parameter configuration."""


class DTooSmallError(SkinSimError):
    """A shifted ray origin still lies inside the indenter."""


class NoContactGeometryError(SkinSimError):
    """No ray hit the indenter at all."""


class ForceUnreachableError(SkinSimError):
    """The force equilibrium cannot be met within the penetration cap."""


class InvalidSampleError(SkinSimError):
    """A calibration sample or dataset fails validation."""


class NoOverlapError(SkinSimError):
    """No slack offset produces a nonzero simulated image for a sample."""


class NoValleyError(SkinSimError):
    """No macro grid cell reaches the loss threshold."""

    def __init__(self, message, best_cell=None):
        super().__init__(message)
        self.best_cell = best_cell


class SceneFormatError(SkinSimError):
    """Malformed scene, dataset, trajectory, or image file."""
