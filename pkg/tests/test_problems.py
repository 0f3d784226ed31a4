import numpy as np
import pytest

from vpinn_bench.closedform import ShallowNetParams
from vpinn_bench.errors import ConfigurationError, MetricUnavailableError, ProblemConsistencyError
from vpinn_bench.problems import (
    GRID_POINTS_1D,
    GRID_POINTS_2D,
    FabricatedSolution,
    Operator,
    ProblemSpec,
    SineSeries,
    SolutionTag,
    boundary_points,
    check_consistency,
    error_metrics,
    evaluation_grid,
    make_problem,
    penalizing_points,
)

OMEGA = 2.1 * np.pi


def test_sine_modal_burgers_forcing():
    problem = make_problem("sine-modal")
    assert problem.operator is Operator.BURGERS_1D
    x = np.linspace(-1, 1, 9)
    expected = 0.5 * OMEGA * np.sin(2 * OMEGA * x) + OMEGA**2 * np.sin(OMEGA * x)
    np.testing.assert_allclose(problem.forcing(x), expected, rtol=1e-13, atol=1e-12)
    assert problem.forcing_modes == ((0.5 * OMEGA, 2 * OMEGA), (OMEGA**2, OMEGA))
    assert problem.solution_modes == ((1.0, OMEGA),)
    assert problem.boundary.g == pytest.approx(-np.sin(OMEGA))
    assert problem.boundary.h == pytest.approx(np.sin(OMEGA))


def test_sine_modal_poisson_forcing():
    problem = make_problem("sine-modal", operator="poisson-1d", amplitude=2.0, frequency=3.0)
    x = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(problem.forcing(x), 18.0 * np.sin(3.0 * x), atol=1e-13)


@pytest.mark.parametrize("tag", [t for t in SolutionTag if t is not SolutionTag.STEEP_2D])
@pytest.mark.parametrize("operator", ["poisson-1d", "burgers-1d"])
def test_manufactured_forcing_is_consistent(tag, operator):
    problem = make_problem(tag, operator)
    check_consistency(problem, tolerance=1e-10)


def test_steep_2d_defaults():
    problem = make_problem("steep-2d")
    assert problem.dim == 2
    sol = problem.exact
    assert (sol.amplitude, sol.frequency, sol.steepness) == (0.1, 2 * np.pi, 10.0)
    pts = np.array([[0.25, 0.25], [-0.5, 0.75]])
    expected = (0.1 * np.sin(2 * np.pi * pts[:, 0]) + np.tanh(10 * pts[:, 0])) * np.sin(2 * np.pi * pts[:, 1])
    np.testing.assert_allclose(problem.exact(pts), expected, atol=1e-15)


def test_boundary_layer_profile():
    sol = make_problem("boundary-layer").exact
    assert sol(np.array(-1.0)) == pytest.approx(np.e + 0.1 * np.sin(-4 * np.pi))
    assert sol(np.array(0.0)) == pytest.approx(np.exp(-99.0), abs=1e-40)


def test_vanishing_boundary_values():
    problem = make_problem("vanishing-boundary")
    assert problem.boundary.g == pytest.approx(0.0, abs=1e-15)
    assert problem.boundary.h == pytest.approx(0.0, abs=1e-15)


def test_derivatives_match_finite_differences():
    x = np.linspace(-0.9, 0.9, 13)
    h = 1e-5
    for tag in ("steep", "vanishing-boundary", "boundary-layer"):
        sol = make_problem(tag).exact
        u, d1, d2 = sol.jet(x)
        np.testing.assert_allclose((sol(x + h) - sol(x - h)) / (2 * h), d1, rtol=1e-6, atol=1e-6)
        np.testing.assert_allclose((sol(x + h) - 2 * u + sol(x - h)) / h**2, d2, rtol=1e-4, atol=1e-3)


def test_unknown_tag_and_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        make_problem("cosine")
    with pytest.raises(ConfigurationError):
        make_problem("steep", operator="heat-1d")
    with pytest.raises(ConfigurationError):
        make_problem("steep-2d", operator="poisson-1d")
    with pytest.raises(ConfigurationError):
        make_problem("steep", operator="poisson-2d")


def test_inconsistent_forcing_is_rejected():
    sol = FabricatedSolution("steep", 0.1, 4 * np.pi, 5.0)
    problem = ProblemSpec("poisson-1d", SineSeries(((1.0, 1.0),)), exact=sol)
    with pytest.raises(ProblemConsistencyError):
        check_consistency(problem)


def test_problem_without_exact_solution():
    problem = ProblemSpec("poisson-1d", SineSeries(((1.0, np.pi),)))
    assert (problem.boundary.g, problem.boundary.h) == (0.0, 0.0)
    net = ShallowNetParams.from_values([1.0], [1.0], [0.0])
    with pytest.raises(MetricUnavailableError):
        error_metrics(net, problem)


def test_boundary_points():
    np.testing.assert_array_equal(boundary_points(1), [-1.0, 1.0])
    pts = boundary_points(2, 80)
    assert pts.shape == (320, 2)
    assert np.all(np.isclose(np.abs(pts), 1.0).any(axis=1))
    with pytest.raises(ConfigurationError):
        boundary_points(2, 1)


def test_penalizing_points_are_seeded():
    a = penalizing_points(2, 500, seed=3)
    b = penalizing_points(2, 500, seed=3)
    assert a.shape == (500, 2)
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a) < 1.0)
    assert not np.array_equal(a, penalizing_points(2, 500, seed=4))


def test_evaluation_grids():
    assert evaluation_grid(1).shape == (GRID_POINTS_1D,)
    grid = evaluation_grid(2)
    assert grid.shape == (GRID_POINTS_2D**2, 2)
    # row-major, y fastest
    assert grid[1, 0] == -1.0 and grid[1, 1] > -1.0


def test_error_metrics_of_exact_network():
    # u = sin(2.1 pi x) is itself a one-neuron sine network
    problem = make_problem("sine-modal")
    net = ShallowNetParams.from_values([1.0], [OMEGA], [0.0])
    metrics = error_metrics(net, problem)
    assert metrics.linf < 1e-13
    assert metrics.l2 < 1e-13
    assert metrics.boundary_error < 1e-13


def test_error_metrics_constant_offset():
    problem = make_problem("sine-modal")
    metrics = error_metrics(lambda x: problem.exact(x) + 0.5, problem)
    assert metrics.linf == pytest.approx(0.5)
    # sqrt of the integral of 0.25 over [-1, 1]
    assert metrics.l2 == pytest.approx(np.sqrt(0.5))
    assert metrics.boundary_error == pytest.approx(0.5)


def test_error_metrics_2d():
    problem = make_problem("steep-2d")
    metrics = error_metrics(lambda p: problem.exact(p) - 0.25, problem, grid=evaluation_grid(2, 21))
    assert metrics.pointwise.shape == (21 * 21,)
    assert metrics.l2 == pytest.approx(0.5)
    assert metrics.linf == pytest.approx(0.25)
