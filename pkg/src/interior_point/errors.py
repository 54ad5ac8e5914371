"""Exception hierarchy shared by every module in the package."""


class InteriorPointError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(InteriorPointError, ValueError):
    """A value, node or domain lies outside the supported range."""


class ParseError(InteriorPointError, ValueError):
    """A database file contains a malformed line."""


class ParamError(InteriorPointError, ValueError):
    """A mechanism or algorithm parameter is out of range."""


class InsufficientData(InteriorPointError):
    """The database is too small for the requested operation."""


class EmptyChoice(InteriorPointError, ValueError):
    """The exponential mechanism was given no candidates."""


class SessionClosed(InteriorPointError):
    """An AboveThreshold session was queried after it halted."""


class DepthError(InteriorPointError, IndexError):
    """A recursion depth beyond the produced level records was requested."""


class NoStoppingPoint(InteriorPointError):
    """Every AboveThreshold query was answered below threshold."""


class NoSolution(InteriorPointError):
    """A Choosing Mechanism call inside a solver returned no candidate."""


class AuditSetupError(InteriorPointError, ValueError):
    """The databases handed to a privacy audit are not neighbors."""


class OracleTooLarge(InteriorPointError, ValueError):
    """The explicit tree oracle was asked to materialize a huge domain."""


class ConfigError(InteriorPointError, ValueError):
    """An experiment configuration could not be parsed."""
