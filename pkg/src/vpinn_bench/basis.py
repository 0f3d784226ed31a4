"""
Test-function families and Legendre polynomial kernels.

Two families are available:

- ``BasisKind.SINE``: v_k(x) = sin(k pi x)
- ``BasisKind.LEGENDRE``: v_k(x) = P_{k+1}(x) - P_{k-1}(x), which vanishes at
  x = -1 and x = 1 and satisfies v_k'(x) = (2k + 1) P_k(x)

Legendre values and derivatives come from the three-term recursion and its
differentiated form. In 2D the test space is the tensor product of two 1D
families.
"""

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from vpinn_bench.errors import ConfigurationError

MAX_DEGREE = 200


class BasisKind(Enum):
    SINE = "sine"
    LEGENDRE = "legendre"


@dataclass(frozen=True)
class TestBasis:
    """A 1D family of K test functions."""

    __test__ = False  # not a pytest class

    kind: BasisKind
    count: int

    def __post_init__(self):
        object.__setattr__(self, "kind", BasisKind(self.kind))
        if not isinstance(self.count, (int, np.integer)) or self.count < 1:
            raise ConfigurationError(f"test function count must be >= 1, got {self.count!r}")
        if self.count > MAX_DEGREE:
            raise ConfigurationError(
                f"test function count {self.count} exceeds the cap of {MAX_DEGREE}"
            )
        if self.kind is BasisKind.LEGENDRE and self.count + 1 > MAX_DEGREE:
            raise ConfigurationError(
                f"Legendre test functions need degree {self.count + 1} > {MAX_DEGREE}"
            )


@dataclass(frozen=True)
class TensorTestBasis:
    """Tensor product v(x, y) = phi_kx(x) * phi_ky(y) of two 1D families."""

    __test__ = False

    basis_x: TestBasis
    basis_y: TestBasis

    @property
    def count(self):
        return self.basis_x.count * self.basis_y.count

    @property
    def shape(self):
        return (self.basis_x.count, self.basis_y.count)


class TestJet(NamedTuple):
    __test__ = False

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


class TestJet2D(NamedTuple):
    __test__ = False

    value: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dxx: np.ndarray
    dyy: np.ndarray


def legendre_table(degree, x):
    """Tabulate P_k, P_k', P_k'' for k = 0..degree.

    Returns:
      Three arrays of shape (degree + 1,) + x.shape.
    """
    if degree < 0 or degree > MAX_DEGREE + 1:
        raise ConfigurationError(f"Legendre degree {degree} out of range")
    x = np.asarray(x, dtype=float)
    p = np.zeros((degree + 1,) + x.shape)
    dp = np.zeros_like(p)
    d2p = np.zeros_like(p)
    p[0] = 1.0
    if degree >= 1:
        p[1] = x
        dp[1] = 1.0
    for k in range(2, degree + 1):
        a, b = (2 * k - 1) / k, (k - 1) / k
        p[k] = a * x * p[k - 1] - b * p[k - 2]
        dp[k] = a * (p[k - 1] + x * dp[k - 1]) - b * dp[k - 2]
        d2p[k] = a * (2.0 * dp[k - 1] + x * d2p[k - 1]) - b * d2p[k - 2]
    return p, dp, d2p


def legendre_eval(k, x):
    """Return (P_k(x), P_k'(x), P_k''(x))."""
    p, dp, d2p = legendre_table(k, x)
    return p[k], dp[k], d2p[k]


def _check_index(basis, k):
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= basis.count:
        raise ConfigurationError(f"test index {k!r} outside 1..{basis.count}")


def test_table(basis, x):
    """Tabulate v_k, v_k', v_k'' for k = 1..K on the points x.

    Returns:
      A TestJet whose arrays have shape (K,) + x.shape.
    """
    x = np.asarray(x, dtype=float)
    ks = np.arange(1, basis.count + 1).reshape((-1,) + (1,) * x.ndim)
    if basis.kind is BasisKind.SINE:
        arg = np.pi * ks * x
        return TestJet(
            np.sin(arg),
            np.pi * ks * np.cos(arg),
            -((np.pi * ks) ** 2) * np.sin(arg),
        )
    p, dp, d2p = legendre_table(basis.count + 1, x)
    return TestJet(p[2:] - p[:-2], dp[2:] - dp[:-2], d2p[2:] - d2p[:-2])


test_table.__test__ = False


def test_fn(basis, k, x):
    """Evaluate the k-th test function and its first two derivatives."""
    _check_index(basis, k)
    x = np.asarray(x, dtype=float)
    if basis.kind is BasisKind.SINE:
        arg = k * np.pi * x
        return TestJet(
            np.sin(arg), k * np.pi * np.cos(arg), -((k * np.pi) ** 2) * np.sin(arg)
        )
    p, dp, d2p = legendre_table(k + 1, x)
    return TestJet(p[k + 1] - p[k - 1], dp[k + 1] - dp[k - 1], d2p[k + 1] - d2p[k - 1])


test_fn.__test__ = False


def test_fn_2d(basis, index, point):
    """Evaluate v(x, y) = phi_kx(x) phi_ky(y) and its partial derivatives."""
    kx, ky = index
    x, y = point
    fx = test_fn(basis.basis_x, kx, x)
    fy = test_fn(basis.basis_y, ky, y)
    return TestJet2D(
        fx.value * fy.value,
        fx.d1 * fy.value,
        fx.value * fy.d1,
        fx.d2 * fy.value,
        fx.value * fy.d2,
    )


test_fn_2d.__test__ = False


def bump_test_fn(center, width, x):
    """Unit-mass smooth bump supported on (center - width, center + width).

    phi(s) = exp(-1 / (1 - s^2)) for |s| < 1 with s = (x - center) / width,
    scaled so that its integral is 1. As the width shrinks the bump tends to a
    Dirac delta at ``center``.
    """
    x = np.asarray(x, dtype=float)
    s = (x - center) / width
    inside = np.abs(s) < 1.0
    value = np.zeros_like(s)
    d1 = np.zeros_like(s)
    d2 = np.zeros_like(s)
    si = s[inside]
    q = 1.0 - si * si
    phi = np.exp(-1.0 / q)
    g1 = -2.0 * si / (q * q)
    g2 = -2.0 / (q * q) - 8.0 * si * si / q**3
    value[inside] = phi
    d1[inside] = g1 * phi / width
    d2[inside] = (g2 + g1 * g1) * phi / width**2
    mass = _BUMP_MASS * width
    return TestJet(value / mass, d1 / mass, d2 / mass)


# integral of exp(-1/(1-s^2)) over (-1, 1)
_BUMP_MASS = 0.44399381616807943
