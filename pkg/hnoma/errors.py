"""Exception hierarchy shared by every hnoma module.

Invalid mathematical solutions are *data* (``EssSolution.valid``), not
exceptions: only precondition violations and plumbing failures raise.
"""

from __future__ import annotations


class HnomaError(Exception):
    """Base class for all hnoma errors."""


class DomainError(HnomaError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InfiniteCostError(DomainError):
    """The SNR-scaled average cost of action 2 diverges (x1 + x2 = 1)."""


class AmbiguousRegionError(DomainError):
    """Fixed costs sit on (or within the guard band of) a region boundary."""


class NoBracketError(HnomaError):
    """The defining function of a root find does not change sign."""


class ConfigError(HnomaError):
    """Configuration could not be parsed or validated."""


class OutputPathError(ConfigError):
    """The declared output location cannot be written."""


__all__ = [
    "HnomaError",
    "DomainError",
    "InfiniteCostError",
    "AmbiguousRegionError",
    "NoBracketError",
    "ConfigError",
    "OutputPathError",
]
