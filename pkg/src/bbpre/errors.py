"""Exception types shared across the package."""


class BbpreError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BbpreError):
    """Invalid model, rule, or experiment configuration."""


class DegenerateModelError(BbpreError):
    """The mating approximant vanishes at the conditional means, so its log is undefined."""


class OverflowGuardError(BbpreError):
    """A requested offspring mean exceeds the sampling guard."""


class ExcessCensoringError(BbpreError):
    """Observed censoring exceeds what the reference law plus slack can explain."""
