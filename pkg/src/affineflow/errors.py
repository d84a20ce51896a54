"""Exception hierarchy shared by every module of the package."""


class FlowError(Exception):
    """Base class for all package errors."""


class InvalidProfile(FlowError, ValueError):
    """A support profile is not the support function of a body in K_0."""


class NonConvex(InvalidProfile):
    """The radius of curvature is not strictly positive somewhere."""


class Singular(FlowError, ValueError):
    pass


class Extinct(FlowError, ValueError):
    """Requested time is at or beyond the extinction time of a closed-form solution."""


class StepUnderflow(FlowError):
    pass


class OptimFail(FlowError):
    """The John-ellipse barrier solver did not converge."""


class SandwichViolation(FlowError):
    """A John-normalized body escaped the 1/sqrt(2) <= s <= sqrt(2) annulus."""


class UnsupportedExponent(FlowError, ValueError):
    pass
