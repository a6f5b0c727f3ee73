"""Exception hierarchy.

Numerical failures derive from :class:`NumericalError` so the CLI can map
them to a single exit code; scenario problems raise :class:`ScenarioError`.
"""


class IonTwinError(Exception):
    pass


class ScenarioError(IonTwinError):
    """Scenario file failed validation. ``path`` names the offending key."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class NumericalError(IonTwinError):
    pass


# photonics
class NoGuidedMode(NumericalError):
    pass


class Evanescent(NumericalError):
    pass


class Unreachable(NumericalError):
    pass


class NonIntersecting(NumericalError):
    pass


# beams
class DegenerateFit(NumericalError):
    pass


# trap
class OnSurface(NumericalError):
    pass


class NoNull(NumericalError):
    pass


class Infeasible(NumericalError):
    def __init__(self, message, residual=None, condition_number=None, y=None):
        super().__init__(message)
        self.residual = residual
        self.condition_number = condition_number
        self.y = y


# ion
class RatioOutOfRange(NumericalError):
    pass


# coherence
class FitFailure(NumericalError):
    pass


class DegenerateTrack(NumericalError):
    pass


class InsufficientStatistics(NumericalError):
    pass
