"""Error hierarchy shared by every layer.

Everything subclasses ``ValueError`` so route handlers written as
``except ValueError`` keep translating domain failures into 400 responses.
"""


class MiBootError(ValueError):
    """Base class for all domain errors"""


class DatasetValidationError(MiBootError):
    """A dataset violates one of its structural invariants"""


class SamplerError(MiBootError):
    """Invalid arguments to a random sampler"""


class ImputationError(MiBootError):
    """An imputation engine could not complete a dataset"""


class SingularCovarianceError(ImputationError):
    def __init__(self, iteration: int, condition: float):
        self.iteration = iteration
        self.condition = condition
        super().__init__(
            f"covariance update numerically singular at iteration {iteration} "
            f"(condition number {condition:.3g})"
        )


class MissingDonorError(ImputationError):
    def __init__(self, stratum: int, column: str):
        self.stratum = stratum
        self.column = column
        super().__init__(f"stratum {stratum} has no donor for column '{column}'")


class EstimationError(MiBootError):
    """An analysis estimator failed on a complete dataset"""


class RankDeficiencyError(EstimationError):
    pass


class SeparationError(EstimationError):
    pass


class NonConvergenceError(EstimationError):
    pass


class PositivityError(EstimationError):
    def __init__(self, t: int, assignment: int):
        self.t = t
        self.assignment = assignment
        super().__init__(f"no subjects with A={assignment} available for fitting at t={t}")


class CombiningError(MiBootError):
    pass


class InvalidPlanError(MiBootError):
    pass


class ReplicateFailureError(MiBootError):
    def __init__(self, failed: int, total: int):
        self.failed = failed
        self.total = total
        super().__init__(
            f"{failed} of {total} replicates failed, above the 1% tolerance"
        )


class IncompatibleConfigError(MiBootError):
    pass


class ConvergenceWarning(RuntimeWarning):
    """Iterative fit stopped before meeting its tolerance"""
