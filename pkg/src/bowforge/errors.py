"""Named numerical failures.

Every failure a module can signal is a subclass of :class:`BowforgeError`;
the class name is the error string the CLI reports.
"""


class BowforgeError(Exception):
    """Base class for all numerical failures raised by bowforge."""

    @property
    def name(self):
        return type(self).__name__


class IdenticallySingular(BowforgeError):
    pass


class DegenerateSpectrum(BowforgeError):
    pass


class GeneralPositionViolated(BowforgeError):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class FactorizationFailed(BowforgeError):
    pass


class StepOverflow(BowforgeError):
    pass


class NonConstantBeta(BowforgeError):
    pass


class CoincidentPoints(BowforgeError):
    pass


class SingularPhi(BowforgeError):
    pass


class OnDiracString(BowforgeError):
    pass


class CoincidentSections(BowforgeError):
    pass


class BranchAtZero(BowforgeError):
    pass


class SheetCollision(BowforgeError):
    pass


class PathThroughPole(BowforgeError):
    pass


class ConstraintSolveFailed(BowforgeError):
    pass


class IndefiniteMetric(BowforgeError):
    pass
