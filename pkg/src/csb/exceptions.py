"""Exception types raised across the package."""


class CSBError(Exception):
    """Base class for errors raised by this package."""


class ValidationError(CSBError, ValueError):
    """An input failed a structural or numerical check."""


class CapacityError(CSBError, ValueError):
    """A dense computation was requested above its configured size cap."""


class DegeneracyError(CSBError, ValueError):
    """The target spectrum offers no pair of distinct eigenphases."""


class UnsupportedCycleError(CSBError, ValueError):
    """A hard cycle admits no Pauli frame that can be pushed through it."""


class ExportError(CSBError, ValueError):
    """A circuit contains a gate with no OpenQASM 2.0 representation."""
