"""Exceptions raised by the solver library.

Configuration files are validated differently: problems are collected as
``ConfigIssue`` records (see :mod:`vpinn_bench.config`) and raised together.
"""


class VpinnError(Exception):
    """Base class for all library errors."""


class ConfigurationError(VpinnError, ValueError):
    """Invalid shapes, out-of-range indices or incompatible options."""


class SingularFrequencyError(VpinnError, ArithmeticError):
    """A closed-form denominator (w^2 - k^2 pi^2) is too close to zero."""

    def __init__(self, neuron, k, partner=None, denominator=None):
        self.neuron = neuron
        self.partner = partner
        self.k = k
        self.denominator = denominator
        where = f"neuron {neuron}" if partner is None else f"neurons ({neuron}, {partner})"
        super().__init__(
            f"near-singular denominator {denominator!r} for {where} and test index k={k}"
        )


class NonFiniteGradientError(VpinnError, FloatingPointError):
    """A gradient entry is NaN or infinite.

    ``parameter_index`` counts entries of the flattened parameter vector;
    ``tensor_index`` names the parameter tensor holding it.
    """

    def __init__(self, parameter_index, tensor_index=None, message=None):
        self.parameter_index = parameter_index
        self.tensor_index = tensor_index
        where = "" if tensor_index is None else f" (tensor {tensor_index})"
        super().__init__(message or f"non-finite gradient at parameter {parameter_index}{where}")


class QuadratureConvergenceError(VpinnError, ArithmeticError):
    """Newton iteration for quadrature nodes did not converge."""


class MetricUnavailableError(VpinnError):
    """Error metrics were requested for a problem without an exact solution."""


class ProblemConsistencyError(VpinnError):
    """The fabricated forcing does not match the operator applied to the exact solution."""


class AllSeedsDivergedError(VpinnError):
    """Every training run of a multi-seed experiment diverged."""
