"""Exception taxonomy shared across the package."""


class KoobaError(Exception):
    """Base class for every error this package raises on purpose."""


class ConfigError(KoobaError):
    """Invalid configuration, flags, or construction arguments."""


class InputError(KoobaError):
    """Runtime input outside the documented contract."""


class NumericalError(KoobaError):
    """A numerical operation left its validity envelope."""


class DegenerateCoefficientsError(NumericalError):
    """Leading polynomial coefficient too small to form a companion system."""


class TrainingAbortedError(KoobaError):
    """Training produced a non-finite loss and stopped."""
