"""Exception types shared across the toolkit."""


class StyleDomainError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(StyleDomainError):
    """Invalid preset, resolution progression, or option combination."""


class ShapeError(StyleDomainError):
    """Tensor shape or dimension mismatch."""


class FingerprintError(StyleDomainError):
    """Architecture fingerprints of two artifacts do not match."""


class NumericError(StyleDomainError):
    """A non-finite value appeared during computation."""

    def __init__(self, message: str, layer_index: int | None = None):
        super().__init__(message)
        self.layer_index = layer_index


class DegenerateDirectionError(StyleDomainError):
    """An embedding difference vector has (near-)zero norm."""


class SerializationError(StyleDomainError):
    """Container version, checksum, or layout problem."""


class PlanError(StyleDomainError):
    """A morph plan is discontinuous or references incompatible artifacts."""
