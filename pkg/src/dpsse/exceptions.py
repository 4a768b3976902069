"""Exception hierarchy for the dpsse package."""


class DPSSEError(Exception):
    """Base class for all errors raised by dpsse."""


class ValidationError(DPSSEError, ValueError):
    """Input data violates a structural invariant."""


class DuplicateBus(ValidationError):
    pass


class DanglingBranch(ValidationError):
    pass


class NoSlack(ValidationError):
    pass


class MultipleSlack(ValidationError):
    pass


class DisconnectedGraph(ValidationError):
    pass


class UnknownArea(ValidationError, KeyError):
    pass


class UnknownBus(ValidationError, KeyError):
    pass


class UnknownBranch(ValidationError, KeyError):
    pass


class NonPositiveSigma(ValidationError):
    pass


class DimensionMismatch(DPSSEError, ValueError):
    pass


class SingularSystem(DPSSEError, ArithmeticError):
    """Gain matrix is singular, i.e. the measurement set is unobservable."""


class SingularLocalSystem(SingularSystem):
    """An area subproblem has a singular local gain matrix."""


class NonSymmetricInput(DPSSEError, ValueError):
    pass


class NonAdjacentPair(DPSSEError, ValueError):
    pass


class UnassignableMeasurement(DPSSEError, ValueError):
    pass


class NotConvergent(DPSSEError, ArithmeticError):
    """Iteration matrix has spectral radius >= 1."""


class DivergenceGuard(DPSSEError, ArithmeticError):
    """Iterate norm blew past the divergence threshold.

    The partially completed run is attached as ``run`` when available.
    """

    def __init__(self, message, run=None):
        super().__init__(message)
        self.run = run


class ParseError(DPSSEError, ValueError):
    pass


class UnsupportedFormat(ParseError):
    pass
