"""Exception types, mapped to CLI exit codes and HTTP error payloads.

Mapping used by the CLI and the service:
  ConfigError, ModelDomainError -> exit 2 / HTTP 422 ("validation")
  NumericalError and subclasses -> exit 3 / HTTP 500 ("numerical")
  bad command line / missing file -> exit 1 ("usage")
"""


class NvscanError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(NvscanError):
    """Invalid configuration: bad value, unknown key, or malformed file."""

    def __init__(self, message, field_path=None, line=None):
        self.field_path = field_path
        self.line = line
        parts = [message]
        if field_path:
            parts.append(f"(field: {field_path})")
        if line is not None:
            parts.append(f"(line {line})")
        super().__init__(" ".join(parts))


class ModelDomainError(NvscanError):
    """Inputs outside the validity range of a model."""


class NumericalError(NvscanError):
    """A numerical procedure failed to meet its contract."""


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved_rtol):
        self.achieved_rtol = achieved_rtol
        super().__init__(f"{message} (achieved relative tolerance {achieved_rtol:.3e})")


class NoResonanceError(NvscanError):
    """Spectrum is flat within noise; no resonance to fit."""


class ReferenceFitError(NumericalError):
    """The reference spectrum of a scan dataset could not be fitted."""
