"""Exception hierarchy.

Every error carries a ``kind`` string used by the command-line front end
when it emits machine-readable error records, and a ``category`` that maps
onto the process exit code (config, hypothesis or numerical).
"""

from __future__ import annotations


class BmKamError(Exception):
    """Base class for all library errors."""

    category = "numerical"

    @property
    def kind(self) -> str:
        return type(self).__name__


class ConfigError(BmKamError):
    category = "config"


class InvalidParams(BmKamError):
    category = "config"


class DenominatorZero(BmKamError):
    """The sum of c_j / I1^j vanishes at a nonzero I1."""


class OrderMismatch(BmKamError):
    category = "config"


class CrossedCriticalSet(BmKamError):
    """An integration step would move I1 across the critical set."""


class StepTooLarge(BmKamError):
    """Energy drift in a single step exceeded the tolerance."""


class SmallDivisor(BmKamError):
    pass


class NonResonanceViolated(BmKamError):
    category = "hypothesis"


class LieSeriesDiverges(BmKamError):
    category = "hypothesis"


class CapExceeded(BmKamError):
    pass


class HypothesisViolated(BmKamError):
    category = "hypothesis"

    def __init__(self, which: str, detail: str = ""):
        self.which = which
        super().__init__(f"{which}: {detail}" if detail else which)


class DivergenceDetected(BmKamError):
    pass


class NotInSurvivingSet(BmKamError):
    category = "hypothesis"


class DegenerateMode(BmKamError):
    pass


class EmptyShrunkDomain(BmKamError):
    category = "config"


class BadInnerSpec(BmKamError):
    category = "config"


class NotSimple(BmKamError):
    category = "config"


class BranchCrossing(BmKamError):
    pass


EXIT_CODES = {"config": 2, "hypothesis": 3, "numerical": 4}
