"""Exceptions raised by qotkit.

All domain errors derive from :class:`QotkitError`, which is a ``ValueError`` so
that callers catching ``ValueError`` keep working. The management commands map
:class:`SolverError` to exit code 3 and every other :class:`QotkitError` to
exit code 2.
"""


class QotkitError(ValueError):
    """Base class for all qotkit domain errors."""


class NotHermitian(QotkitError):
    """The matrix deviates from its adjoint by more than the tolerance."""


class NegativeEigenvalue(QotkitError):
    """A matrix function needed a PSD argument and got a negative eigenvalue."""


class DomainError(QotkitError):
    """A scalar function is undefined at some eigenvalue or parameter."""


class ShapeMismatch(QotkitError):
    """Dimensions or tensor factor shapes are inconsistent."""


class NotADensityOperator(QotkitError):
    """The operator is not PSD with unit trace."""


class InvalidChannel(QotkitError):
    """The Kraus family is not trace preserving or has bad dimensions."""


class InvalidDistribution(QotkitError):
    """The vector is not a probability distribution."""


class NonMetricCost(QotkitError):
    """The cost matrix is not a metric."""


class MarginalMismatch(QotkitError):
    """A state or coupling does not have the expected marginals."""


class SingularSigma(QotkitError):
    """The source state is singular and pseudo-inverse mode is off."""


class NotATransportPlan(QotkitError):
    """The channel does not map the source state to the target state."""


class InputFormatError(QotkitError):
    """A state, channel or distribution file could not be parsed."""


class SolverError(QotkitError):
    """The conic solver did not return an optimal solution.

    Parameters
    ----------
    message : str
        Description of the failure.
    solution : ConicSolution, optional
        The solution object returned by the solver, if any.
    """

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution
