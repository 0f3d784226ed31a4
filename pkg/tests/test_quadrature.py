import numpy as np
import pytest

from vpinn_bench.basis import legendre_table
from vpinn_bench.errors import ConfigurationError
from vpinn_bench.quadrature import RuleKind, gauss_rule, integrate, tensor_rule


def _monomial_integral(degree):
    return 0.0 if degree % 2 else 2.0 / (degree + 1)


@pytest.mark.parametrize("order", list(range(2, 65)))
def test_gauss_legendre_exactness(order):
    rule = gauss_rule(RuleKind.GAUSS_LEGENDRE, order)
    assert rule.exact_degree == 2 * order - 1
    # Legendre polynomials avoid the cancellation of plain monomials
    p, _, _ = legendre_table(rule.exact_degree, rule.nodes)
    integrals = p @ rule.weights
    expected = np.zeros(rule.exact_degree + 1)
    expected[0] = 2.0
    np.testing.assert_allclose(integrals, expected, atol=1e-12)


@pytest.mark.parametrize("order", list(range(2, 65)))
def test_gauss_lobatto_exactness(order):
    rule = gauss_rule("gauss-lobatto", order)
    assert rule.nodes[0] == -1.0 and rule.nodes[-1] == 1.0
    degree = rule.exact_degree
    assert degree == 2 * order - 3
    p, _, _ = legendre_table(degree, rule.nodes)
    expected = np.zeros(degree + 1)
    expected[0] = 2.0
    np.testing.assert_allclose(p @ rule.weights, expected, atol=1e-12)


@pytest.mark.parametrize("kind", list(RuleKind))
def test_rules_are_sorted_and_symmetric(kind):
    rule = gauss_rule(kind, 17)
    assert np.all(np.diff(rule.nodes) > 0)
    np.testing.assert_array_equal(rule.nodes, -rule.nodes[::-1])
    np.testing.assert_array_equal(rule.weights, rule.weights[::-1])
    assert np.all(rule.weights > 0)
    assert rule.weights.sum() == pytest.approx(2.0, abs=1e-14)


def test_monomials_low_order():
    rule = gauss_rule("gauss-legendre", 3)
    for degree in range(6):
        assert integrate(rule, lambda x: x**degree) == pytest.approx(
            _monomial_integral(degree), abs=1e-14
        )


def test_two_point_rule():
    rule = gauss_rule("gauss-legendre", 2)
    np.testing.assert_allclose(rule.nodes, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(rule.weights, [1.0, 1.0], atol=1e-15)
    lobatto = gauss_rule("gauss-lobatto", 3)
    np.testing.assert_allclose(lobatto.nodes, [-1.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(lobatto.weights, [1 / 3, 4 / 3, 1 / 3], atol=1e-15)


def test_legendre_orthogonality():
    rule = gauss_rule("gauss-legendre", 30)
    p, _, _ = legendre_table(20, rule.nodes)
    gram = (p * rule.weights) @ p.T
    expected = np.diag(2.0 / (2 * np.arange(21) + 1))
    np.testing.assert_allclose(gram, expected, atol=1e-12)


def test_smooth_integrand():
    rule = gauss_rule("gauss-legendre", 30)
    assert integrate(rule, np.exp) == pytest.approx(np.e - 1 / np.e, abs=1e-14)


def test_large_order():
    rule = gauss_rule("gauss-legendre", 512)
    assert rule.order == 512
    assert integrate(rule, lambda x: np.cos(40 * x)) == pytest.approx(np.sin(40.0) / 20.0, abs=1e-12)


@pytest.mark.parametrize("order", [0, 1, 513, 2.5])
def test_invalid_order(order):
    with pytest.raises(ConfigurationError):
        gauss_rule("gauss-legendre", order)


def test_unknown_kind():
    with pytest.raises(ValueError):
        gauss_rule("gauss-jacobi-x", 5)


def test_nodes_are_read_only():
    rule = gauss_rule("gauss-legendre", 4)
    with pytest.raises(ValueError):
        rule.nodes[0] = 0.0


def test_tensor_rule_layout():
    rx = gauss_rule("gauss-legendre", 3)
    ry = gauss_rule("gauss-lobatto", 4)
    points, weights = tensor_rule(rx, ry)
    assert points.shape == (12, 2)
    # y varies fastest
    np.testing.assert_array_equal(points[:4, 0], rx.nodes[0])
    np.testing.assert_array_equal(points[:4, 1], ry.nodes)
    assert weights.sum() == pytest.approx(4.0, abs=1e-14)
    f = points[:, 0] ** 4 * points[:, 1] ** 2
    assert weights @ f == pytest.approx((2 / 5) * (2 / 3), abs=1e-14)
