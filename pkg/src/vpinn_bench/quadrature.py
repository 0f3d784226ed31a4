"""
Gauss-type quadrature rules on [-1, 1].

Gauss-Legendre nodes are the roots of P_Q, Gauss-Lobatto nodes are the roots
of (1 - x^2) P'_{Q-1}. Both are found by Newton iteration on the three-term
Legendre recursion, starting from Chebyshev-type initial guesses. Rules are
symmetrized after convergence so that nodes and weights are exactly
symmetric about 0.

2D integrals use the tensor product of two 1D rules, see ``tensor_rule``.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from vpinn_bench.errors import ConfigurationError, QuadratureConvergenceError

NEWTON_TOLERANCE = 1e-14
NEWTON_MAX_ITERATIONS = 100
MAX_ORDER = 512


class RuleKind(Enum):
    GAUSS_LEGENDRE = "gauss-legendre"
    GAUSS_LOBATTO = "gauss-lobatto"


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Nodes and weights of a Q-point rule on [-1, 1]."""

    kind: RuleKind
    order: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def exact_degree(self):
        """Highest polynomial degree integrated exactly."""
        if self.kind is RuleKind.GAUSS_LEGENDRE:
            return 2 * self.order - 1
        return 2 * self.order - 3


def _legendre_pair(n, x):
    """Return (P_n(x), P_{n-1}(x)) by the three-term recursion."""
    p_prev = np.ones_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p_prev, p = p, ((2 * k - 1) * x * p - (k - 1) * p_prev) / k
    return p, p_prev


def _gauss_legendre(order):
    i = np.arange(1, order + 1)
    x = np.cos(np.pi * (i - 0.25) / (order + 0.5))
    for _ in range(NEWTON_MAX_ITERATIONS):
        p, p_prev = _legendre_pair(order, x)
        dp = order * (x * p - p_prev) / (x * x - 1.0)
        step = p / dp
        x = x - step
        if np.max(np.abs(step)) < NEWTON_TOLERANCE:
            break
    else:
        raise QuadratureConvergenceError(
            f"Gauss-Legendre nodes did not converge for Q={order}"
        )
    p, p_prev = _legendre_pair(order, x)
    dp = order * (x * p - p_prev) / (x * x - 1.0)
    weights = 2.0 / ((1.0 - x * x) * dp * dp)
    return x, weights


def _gauss_lobatto(order):
    n = order - 1
    x = np.cos(np.pi * np.arange(order) / n)
    for _ in range(NEWTON_MAX_ITERATIONS):
        p, p_prev = _legendre_pair(n, x)
        step = (x * p - p_prev) / ((n + 1) * p)
        x = x - step
        if np.max(np.abs(step)) < NEWTON_TOLERANCE:
            break
    else:
        raise QuadratureConvergenceError(
            f"Gauss-Lobatto nodes did not converge for Q={order}"
        )
    x[0], x[-1] = 1.0, -1.0
    p, _ = _legendre_pair(n, x)
    weights = 2.0 / (n * (n + 1) * p * p)
    return x, weights


def gauss_rule(kind, order):
    """Build a Gauss-Legendre or Gauss-Lobatto rule with ``order`` nodes.

    Args:
      kind: A RuleKind (or its string value).
      order: Number of nodes Q, 2 <= Q <= 512.
    Returns:
      A QuadratureRule with nodes sorted increasingly.
    """
    kind = RuleKind(kind)
    if not isinstance(order, (int, np.integer)) or order < 2:
        raise ConfigurationError(f"quadrature order must be an integer >= 2, got {order!r}")
    if order > MAX_ORDER:
        raise ConfigurationError(f"quadrature order {order} exceeds {MAX_ORDER}")

    if kind is RuleKind.GAUSS_LEGENDRE:
        nodes, weights = _gauss_legendre(int(order))
    else:
        nodes, weights = _gauss_lobatto(int(order))

    order_idx = np.argsort(nodes)
    nodes, weights = nodes[order_idx], weights[order_idx]
    # exact symmetry about 0
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(kind, int(order), nodes, weights)


def integrate(rule, f):
    """Return sum_q W_q f(x_q) for a function accepting an array of nodes."""
    return float(np.dot(rule.weights, f(rule.nodes)))


def tensor_rule(rule_x, rule_y):
    """Flatten the tensor product of two rules.

    Returns:
      A tuple (points, weights) where points has shape (Qx * Qy, 2) and the
      y index varies fastest (row-major in x).
    """
    xx, yy = np.meshgrid(rule_x.nodes, rule_y.nodes, indexing="ij")
    points = np.stack([xx.ravel(), yy.ravel()], axis=1)
    weights = np.outer(rule_x.weights, rule_y.weights).ravel()
    return points, weights
