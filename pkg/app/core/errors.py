"""
Exception hierarchy for icenav
"""

from typing import Any, Optional


class IceNavError(Exception):
    """Base class for all icenav errors"""


class DegenerateInput(IceNavError, ValueError):
    """Geometry input with zero area or collinear points"""


class ConfigError(IceNavError, ValueError):
    """Invalid configuration or parameter value"""


class DomainError(IceNavError, ValueError):
    """Argument outside the domain of a physical formula"""


class PackingFailure(IceNavError, RuntimeError):
    """Ice field generation could not reach the target concentration"""


class PlanningFailure(IceNavError, RuntimeError):
    """A navigation strategy could not produce a plan"""


class NoPathFound(PlanningFailure):
    """Lattice search exhausted without reaching the goal set"""


class InfeasibleWarmStart(IceNavError, RuntimeError):
    """Warm start for the path optimizer cannot be repaired"""


class TrialTimeout(IceNavError, RuntimeError):
    """Closed-loop trial exceeded its simulated-time cap"""

    def __init__(self, message: str, record: Optional[Any] = None):
        super().__init__(message)
        self.record = record

    def __reduce__(self):
        # keep the partial record when crossing a process boundary
        return type(self), (str(self), self.record)


class CalibrationError(IceNavError, ValueError):
    """Trial records cannot be used to calibrate alpha"""
