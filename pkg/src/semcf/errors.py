"""Exception hierarchy.

Every error raised by the library derives from :class:`SEMError`.  The CLI
maps error classes to exit codes, so new errors should subclass the closest
existing category rather than ``SEMError`` directly.
"""


class SEMError(Exception):
    """Base class for all library errors."""


class ModelError(SEMError, ValueError):
    """Invalid graph, model, or query input."""


class CycleError(ModelError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("CycleError: directed cycle " + " -> ".join(map(str, self.cycle)))


class DuplicateEdge(ModelError):
    pass


class UnknownVertex(ModelError):
    pass


class NonfiniteCoefficient(ModelError):
    pass


class ZeroCoefficient(ModelError):
    pass


class OverlappingSets(ModelError):
    pass


class MissingEdge(ModelError):
    pass


class ResponseNotDescendant(ModelError):
    pass


class PlanCovariateIsDescendant(ModelError):
    pass


class EmptyPlanCovariates(ModelError):
    pass


class NotPositiveSemidefinite(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class PartitionMismatch(ModelError):
    pass


class InvalidEvidence(ModelError):
    pass


class ParseError(ModelError):
    pass


class NumericalError(SEMError, ArithmeticError):
    """A computation is ill-posed for the supplied numbers."""


class SingularSystem(NumericalError):
    pass


class SingularEvidenceCovariance(NumericalError):
    pass


class SingularRegressorCovariance(NumericalError):
    pass


class SingularPlanCovariance(NumericalError):
    pass


class ZeroInstrumentCovariance(NumericalError):
    pass


class ZeroMassBox(NumericalError):
    pass


class NumericalTargetMissed(NumericalError):
    pass


class DegenerateTreatment(NumericalError):
    pass


class ZeroTotalEffect(NumericalError):
    pass


class NegativeVarianceBeyondTolerance(NumericalError):
    pass


class Unidentified(SEMError):
    """No graphical criterion identifies the total effect from the observed set."""


class RejectionBudgetExceeded(SEMError):
    """The rejection sampler's acceptance rate is below the configured floor."""
