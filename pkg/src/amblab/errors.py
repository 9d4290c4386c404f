"""Exception hierarchy shared by all amblab modules."""


class AmblabError(Exception):
    """Base class for every error raised by the library."""


class GridMismatch(AmblabError):
    pass


class OffGridShift(AmblabError):
    pass


class ZeroWindow(AmblabError):
    pass


class ZeroSignal(AmblabError):
    pass


class InvalidDilation(AmblabError):
    pass


class DomainOutsideGrid(AmblabError):
    pass


class EmptyDomain(AmblabError):
    pass


class Unsupported(AmblabError):
    pass


class LatticeIncommensurate(AmblabError):
    pass


class TruncationLeakage(AmblabError):
    pass


class NoConvergence(AmblabError):
    pass


class NonFiniteObjective(AmblabError):
    pass


class SchemaError(AmblabError):
    """Malformed input file or configuration (CLI exit code 3)."""
