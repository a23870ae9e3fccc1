"""Exception hierarchy.

Every error carries a stable ``code`` string so the command line front end can
emit machine-readable failures.
"""


class MvlogitError(Exception):
    code = "error"


class ValidationError(MvlogitError, ValueError):
    code = "validation"


class ConfigurationError(MvlogitError, ValueError):
    code = "configuration"


class ChainError(MvlogitError, RuntimeError):
    """A Gibbs sweep failed (e.g. a non positive-definite posterior covariance)."""

    code = "chain"

    def __init__(self, message, iteration=None, chain=None):
        super().__init__(message)
        self.iteration = iteration
        self.chain = chain


class ImproperPosteriorError(MvlogitError, ValueError):
    code = "improper_posterior"


class EmptySubpopulationError(MvlogitError, ValueError):
    code = "empty_subpopulation"


class InfeasibleDesignError(MvlogitError, RuntimeError):
    code = "infeasible_design"

    def __init__(self, message, achieved_power=None, n=None):
        super().__init__(message)
        self.achieved_power = achieved_power
        self.n = n


class ElicitationError(MvlogitError, ValueError):
    code = "elicitation"


class UnsupportedScopeError(MvlogitError, ValueError):
    code = "unsupported"


class IngestionError(MvlogitError, ValueError):
    code = "ingestion"

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ConsistencyError(MvlogitError, AssertionError):
    code = "consistency"
