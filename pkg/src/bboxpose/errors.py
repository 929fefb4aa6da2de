"""Exception types raised across the package."""

__all__ = [
    "GeometryError",
    "DegenerateInput",
    "DegenerateField",
    "DegenerateModel",
    "SymmetryUnsupported",
    "MaskMismatch",
    "ShapeMismatch",
    "RowNotNormalized",
    "UnlabeledPoints",
    "NonPositiveSigma",
    "NonFinite",
    "KinkProximity",
    "EmptyInput",
    "EmptyMask",
    "NonPositiveDepth",
    "UnknownCategory",
    "ConfigError",
]


class GeometryError(ValueError):
    """Base class for invalid-input errors raised by numeric routines."""


class DegenerateInput(GeometryError):
    pass


class DegenerateField(GeometryError):
    pass


class DegenerateModel(GeometryError):
    pass


class SymmetryUnsupported(GeometryError):
    pass


class MaskMismatch(GeometryError):
    pass


class ShapeMismatch(GeometryError):
    pass


class RowNotNormalized(GeometryError):
    pass


class UnlabeledPoints(GeometryError):
    pass


class NonPositiveSigma(GeometryError):
    pass


class NonFinite(GeometryError):
    pass


class KinkProximity(GeometryError):
    pass


class EmptyInput(GeometryError):
    pass


class EmptyMask(GeometryError):
    pass


class NonPositiveDepth(GeometryError):
    pass


class UnknownCategory(GeometryError):
    pass


class ConfigError(Exception):
    """Invalid configuration. ``key`` names the offending entry."""

    def __init__(self, key, message=None):
        self.key = key
        super().__init__(f"{key}: {message}" if message else str(key))
