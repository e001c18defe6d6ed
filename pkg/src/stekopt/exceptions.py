"""Exception hierarchy used across the package."""

import numpy as np


class StekoptError(Exception):
    """Base class for all package errors."""


class DimensionError(StekoptError, ValueError):
    """A point or matrix does not match the dimension of the problem."""


class CapabilityError(StekoptError, NotImplementedError):
    """The requested estimator cannot handle this (objective, domain) pair."""


class DegenerateDomainError(StekoptError, ValueError):
    """The averaging domain is too small for a stable estimate."""


class EstimatorFailure(StekoptError, FloatingPointError):
    """An estimate contains non-finite entries."""


class IndefiniteHessianError(StekoptError, np.linalg.LinAlgError):
    """Cholesky factorization failed even after one jitter retry."""


class LineSearchExhausted(StekoptError, RuntimeError):
    """No halving count up to the cap satisfied the decrease inequality."""


class ConfigError(StekoptError, ValueError):
    """Invalid run configuration (unknown problem, bad flag value, ...)."""


class InsufficientDataError(StekoptError, ValueError):
    """Too few iteration records for a rate estimate."""
