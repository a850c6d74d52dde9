"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: data problems (schema, ingest,
configuration) exit 3, numerical/estimation problems exit 4.
"""


class CrowdCdrError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(CrowdCdrError):
    """A required column is missing or a file header cannot be interpreted."""


class IngestError(CrowdCdrError):
    """Too many malformed rows, or an input file cannot be read."""


class ConfigurationError(CrowdCdrError):
    """Invalid configuration: bad factors, missing market share, bad towers."""


class EstimationError(CrowdCdrError):
    """An estimator was given inputs it cannot produce an estimate from."""


class AnalysisError(CrowdCdrError):
    """A model fit failed (separation, non-convergence, undefined statistic)."""


class SeparationError(AnalysisError):
    """Complete separation: the logistic MLE does not exist."""


class ConvergenceError(AnalysisError):
    """Newton iteration did not converge; carries the iteration trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []
