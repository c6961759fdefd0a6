"""Exception hierarchy shared by all stickywet modules."""


class StickyError(Exception):
    """Base class for every error raised by the package."""


# state / strata
class NonFinite(StickyError, ValueError):
    pass


class Negative(StickyError, ValueError):
    pass


class DimensionTooLarge(StickyError, ValueError):
    pass


class InvalidStickiness(StickyError, ValueError):
    pass


# lattice / potential
class UnknownSite(StickyError, KeyError):
    pass


class NotSymmetric(StickyError, ValueError):
    pass


class NotC1(StickyError, ValueError):
    pass


class KappaDiverges(StickyError, ValueError):
    pass


# numerics
class ToleranceNotMet(StickyError, RuntimeError):
    pass


class StepTooLarge(StickyError, ValueError):
    pass


class CapTooSmall(StickyError, ValueError):
    pass


class StateSpaceTooLarge(StickyError, ValueError):
    pass


class NotConverged(StickyError, RuntimeError):
    pass


# diagnostics
class InsufficientData(StickyError, ValueError):
    pass


class InsufficientReplicas(StickyError, ValueError):
    pass


# configuration
class ParseError(StickyError, ValueError):
    pass


class ValidationError(StickyError, ValueError):
    """Aggregated configuration error.

    ``errors`` holds ``(owner, message)`` pairs, one per violated constraint.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = [f"[{owner}] {msg}" for owner, msg in self.errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
