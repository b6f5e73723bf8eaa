"""Exception types shared across the package."""


class LsgridError(Exception):
    """Base class for all package errors."""


class FeederDefinitionError(LsgridError):
    """Raised when a feeder definition cannot be resolved into a model."""


class ProfileDataError(LsgridError):
    """Raised for malformed, gapped, or missing time-series data."""


class ScenarioError(LsgridError):
    """Raised for inconsistent scenario configuration."""


class ModelBuildError(LsgridError):
    """Raised when the optimization model cannot be assembled."""


class SolveError(LsgridError):
    """Raised when a solver backend fails outright (not mere infeasibility)."""


class SolutionFormatError(LsgridError):
    """Raised when solution values are inconsistent with the model."""
