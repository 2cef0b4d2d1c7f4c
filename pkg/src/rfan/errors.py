"""Exception hierarchy shared by every module of the package."""


class RFANError(Exception):
    """Base class for all package errors."""


class InputError(RFANError, ValueError):
    """Malformed arguments: dimension mismatch, bad lengths, bad domains."""


class NumericalError(RFANError, ArithmeticError):
    """A factorization failed even after jitter escalation."""


class FitError(RFANError):
    """A model could not be fit, e.g. an arm without observations."""


class AcquisitionError(RFANError):
    """The pool cannot supply the requested batch."""


class ConfigurationError(RFANError, ValueError):
    """Inconsistent trial or experiment configuration."""


class StatTestError(RFANError):
    """A hypothesis test is undefined on the supplied samples."""


class OracleError(RFANError):
    """Invalid use of the outcome oracle (unknown id, double acquisition)."""


class ParseError(RFANError, ValueError):
    """Malformed potential-outcomes file."""


class MetricError(RFANError, ValueError):
    """A metric is undefined on the supplied data (e.g. empty subgroup)."""


class TrialError(RFANError):
    """A trial could not run to completion."""
