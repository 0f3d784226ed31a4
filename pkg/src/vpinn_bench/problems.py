"""
Benchmark boundary-value problems on [-1, 1] and [-1, 1]^2.

Operators:

- ``poisson-1d``:  -u'' = f,        u(-1) = g, u(1) = h
- ``burgers-1d``:  u u' - u'' = f,  u(-1) = g, u(1) = h
- ``poisson-2d``:  u_xx + u_yy = f, u = exact trace on the boundary

Forcings are manufactured from fabricated exact solutions; the single-mode
sine solution keeps its closed-form forcing as a sum of sine modes, which also
allows exact force vectors against sine test functions.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

from vpinn_bench.closedform import BoundaryData
from vpinn_bench.diffprop import evaluate
from vpinn_bench.errors import (
    ConfigurationError,
    MetricUnavailableError,
    ProblemConsistencyError,
)

logger = logging.getLogger(__name__)

GRID_POINTS_1D = 1001
GRID_POINTS_2D = 101
BOUNDARY_POINTS_PER_EDGE = 80
SELF_CHECK_POINTS = 1000
SELF_CHECK_TOLERANCE = 1e-8


class Operator(Enum):
    POISSON_1D = "poisson-1d"
    BURGERS_1D = "burgers-1d"
    POISSON_2D = "poisson-2d"

    @property
    def dim(self):
        return 2 if self is Operator.POISSON_2D else 1


class SolutionTag(Enum):
    SINE_MODAL = "sine-modal"
    VANISHING_BOUNDARY = "vanishing-boundary"
    STEEP = "steep"
    BOUNDARY_LAYER = "boundary-layer"
    STEEP_2D = "steep-2d"


# amplitude, frequency, steepness, layer width, default operator
_DEFAULTS = {
    SolutionTag.SINE_MODAL: (1.0, 2.1 * np.pi, 0.0, 0.01, Operator.BURGERS_1D),
    SolutionTag.VANISHING_BOUNDARY: (1.0, 2.1 * np.pi, 0.0, 0.01, Operator.BURGERS_1D),
    SolutionTag.STEEP: (0.1, 4 * np.pi, 5.0, 0.01, Operator.POISSON_1D),
    SolutionTag.BOUNDARY_LAYER: (0.1, 4 * np.pi, 0.0, 0.01, Operator.POISSON_1D),
    SolutionTag.STEEP_2D: (0.1, 2 * np.pi, 10.0, 0.01, Operator.POISSON_2D),
}


@dataclass(frozen=True)
class FabricatedSolution:
    """A closed-form exact solution with analytic derivatives.

    - sine-modal:         A sin(w x)
    - vanishing-boundary: A (1 - x^2) sin(w x)
    - steep:              A sin(w x) + tanh(r x)
    - boundary-layer:     A sin(w x) + exp((eps - (x + 1)) / eps)
    - steep-2d:           (A sin(w x) + tanh(r x)) sin(w y)
    """

    tag: SolutionTag
    amplitude: float
    frequency: float
    steepness: float = 0.0
    layer_width: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "tag", SolutionTag(self.tag))
        values = (self.amplitude, self.frequency, self.steepness, self.layer_width)
        if not all(np.isfinite(v) for v in values):
            raise ConfigurationError(f"{self.tag.value}: parameters must be finite, got {values}")
        if self.layer_width <= 0:
            raise ConfigurationError(f"layer width must be positive, got {self.layer_width}")

    @property
    def dim(self):
        return 2 if self.tag is SolutionTag.STEEP_2D else 1

    def _profile(self, x):
        """The x-profile and its first two derivatives."""
        A, w = self.amplitude, self.frequency
        s, c = np.sin(w * x), np.cos(w * x)
        if self.tag is SolutionTag.SINE_MODAL:
            return A * s, A * w * c, -A * w * w * s
        if self.tag is SolutionTag.VANISHING_BOUNDARY:
            q = 1.0 - x * x
            return (
                A * q * s,
                A * (-2.0 * x * s + q * w * c),
                A * (-2.0 * s - 4.0 * x * w * c - q * w * w * s),
            )
        if self.tag is SolutionTag.BOUNDARY_LAYER:
            eps = self.layer_width
            e = np.exp((eps - (x + 1.0)) / eps)
            return A * s + e, A * w * c - e / eps, -A * w * w * s + e / eps**2
        r = self.steepness
        t = np.tanh(r * x)
        sech2 = 1.0 - t * t
        return A * s + t, A * w * c + r * sech2, -A * w * w * s - 2.0 * r * r * t * sech2

    def jet(self, x):
        """(u, u', u'') in 1D, (u, u_x, u_y, u_xx, u_yy) in 2D."""
        x = np.asarray(x, dtype=float)
        if self.dim == 1:
            return self._profile(x)
        px, py = x[..., 0], x[..., 1]
        p, dp, d2p = self._profile(px)
        w = self.frequency
        sy, cy = np.sin(w * py), np.cos(w * py)
        return p * sy, dp * sy, p * w * cy, d2p * sy, -w * w * p * sy

    def __call__(self, x):
        return self.jet(x)[0]

    def modes(self):
        """Sine modes (amplitude, frequency) when the solution is a sine sum."""
        if self.tag is SolutionTag.SINE_MODAL:
            return ((self.amplitude, self.frequency),)
        return None


@dataclass(frozen=True)
class SineSeries:
    """f(x) = sum_m c_m sin(omega_m x)."""

    modes: Tuple[Tuple[float, float], ...]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return sum(c * np.sin(w * x) for c, w in self.modes) + np.zeros_like(x)


@dataclass(frozen=True)
class ManufacturedForcing:
    """The operator applied to a fabricated solution."""

    operator: Operator
    solution: FabricatedSolution

    def __call__(self, x):
        return apply_operator(self.operator, self.solution.jet(x))


def apply_operator(operator, jet):
    """Apply the differential operator to a jet of analytic derivatives."""
    if operator is Operator.POISSON_1D:
        _, _, d2 = jet
        return -d2
    if operator is Operator.BURGERS_1D:
        u, d1, d2 = jet
        return u * d1 - d2
    _, _, _, dxx, dyy = jet
    return dxx + dyy


@dataclass(frozen=True)
class ProblemSpec:
    """A boundary-value problem on [-1, 1]^d.

    ``boundary`` holds (g, h) in 1D; in 2D the Dirichlet data is ``dirichlet``
    (by default the exact solution's trace, or zero without one).
    ``forcing_modes`` and ``solution_modes`` are set when f or u_exact is a
    finite sine sum, which makes force vectors against sine tests exact.
    """

    operator: Operator
    forcing: Callable
    exact: Optional[Callable] = None
    boundary: Optional[BoundaryData] = None
    dirichlet: Optional[Callable] = None
    forcing_modes: Optional[Tuple[Tuple[float, float], ...]] = None
    solution_modes: Optional[Tuple[Tuple[float, float], ...]] = None
    name: str = field(default="custom")

    def __post_init__(self):
        object.__setattr__(self, "operator", Operator(self.operator))
        if self.dim == 1 and self.boundary is None:
            if self.exact is not None:
                g, h = (float(v) for v in self.exact(np.array([-1.0, 1.0])))
                object.__setattr__(self, "boundary", BoundaryData(g, h))
            else:
                object.__setattr__(self, "boundary", BoundaryData(0.0, 0.0))

    @property
    def dim(self):
        return self.operator.dim

    def boundary_values(self, points):
        """Dirichlet data at boundary points ({-1, 1} in 1D, (n, 2) in 2D)."""
        points = np.asarray(points, dtype=float)
        if self.dim == 1:
            return np.where(points.reshape(-1) < 0, self.boundary.g, self.boundary.h)
        trace = self.dirichlet or self.exact
        if trace is None:
            return np.zeros(points.shape[0])
        return np.asarray(trace(points), dtype=float)


def check_consistency(problem, count=SELF_CHECK_POINTS, seed=0, tolerance=SELF_CHECK_TOLERANCE):
    """Verify operator(exact) == forcing at random interior points.

    Raises:
      ProblemConsistencyError: on a mismatch larger than ``tolerance``
        (relative to max(1, |f|)).
    """
    if not hasattr(problem.exact, "jet"):
        return
    points = penalizing_points(problem.dim, count, seed)
    if problem.dim == 1:
        points = points[:, 0]
    expected = apply_operator(problem.operator, problem.exact.jet(points))
    actual = np.asarray(problem.forcing(points), dtype=float)
    mismatch = np.abs(actual - expected) / np.maximum(1.0, np.abs(expected))
    worst = int(np.argmax(mismatch))
    if mismatch[worst] > tolerance:
        raise ProblemConsistencyError(
            f"{problem.name}: forcing differs from the operator applied to the exact "
            f"solution by {mismatch[worst]:.3e} at {points[worst]}"
        )


def make_problem(
    tag,
    operator=None,
    amplitude=None,
    frequency=None,
    steepness=None,
    layer_width=None,
    check=True,
):
    """Build a benchmark problem around a fabricated exact solution.

    Parameters left as None take the per-tag defaults. The sine-modal solution
    uses the closed-form forcing A^2 w / 2 sin(2 w x) + A w^2 sin(w x) for
    Burgers (A w^2 sin(w x) for Poisson); every other forcing is the operator
    applied to the exact solution.
    """
    try:
        tag = SolutionTag(tag)
    except ValueError:
        raise ConfigurationError(
            f"unknown solution tag {tag!r}, expected one of "
            f"{', '.join(t.value for t in SolutionTag)}"
        ) from None
    A, w, r, eps, default_operator = _DEFAULTS[tag]
    try:
        operator = Operator(operator) if operator is not None else default_operator
    except ValueError:
        raise ConfigurationError(f"unknown operator {operator!r}") from None
    solution = FabricatedSolution(
        tag,
        A if amplitude is None else float(amplitude),
        w if frequency is None else float(frequency),
        r if steepness is None else float(steepness),
        eps if layer_width is None else float(layer_width),
    )
    if solution.dim != operator.dim:
        raise ConfigurationError(
            f"{tag.value} is a {solution.dim}D solution, {operator.value} a {operator.dim}D operator"
        )

    forcing_modes = None
    if tag is SolutionTag.SINE_MODAL:
        A, w = solution.amplitude, solution.frequency
        forcing_modes = ((A * w * w, w),)
        if operator is Operator.BURGERS_1D:
            forcing_modes = ((A * A * w / 2.0, 2.0 * w),) + forcing_modes
        forcing = SineSeries(forcing_modes)
    else:
        forcing = ManufacturedForcing(operator, solution)

    problem = ProblemSpec(
        operator,
        forcing,
        exact=solution,
        forcing_modes=forcing_modes,
        solution_modes=solution.modes(),
        name=f"{tag.value}/{operator.value}",
    )
    if check:
        check_consistency(problem)
    logger.debug("built problem %s with %s", problem.name, solution)
    return problem


def boundary_points(dim, per_edge=BOUNDARY_POINTS_PER_EDGE):
    """{-1, 1} in 1D; ``per_edge`` equispaced points on each of the 4 edges in 2D."""
    if dim == 1:
        return np.array([-1.0, 1.0])
    if per_edge < 2:
        raise ConfigurationError(f"need at least 2 boundary points per edge, got {per_edge}")
    s = np.linspace(-1.0, 1.0, per_edge)
    one = np.ones_like(s)
    edges = [(-one, s), (one, s), (s, -one), (s, one)]
    return np.concatenate([np.stack(edge, axis=1) for edge in edges])


def penalizing_points(dim, count, seed):
    """``count`` points uniform in (-1, 1)^dim, shape (count, dim)."""
    if count < 1:
        raise ConfigurationError(f"need at least one penalizing point, got {count}")
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(count, dim))


def evaluation_grid(dim, count=None):
    """Uniform grid: (n,) in 1D, (n * n, 2) row-major with y fastest in 2D."""
    if dim == 1:
        return np.linspace(-1.0, 1.0, count or GRID_POINTS_1D)
    line = np.linspace(-1.0, 1.0, count or GRID_POINTS_2D)
    xx, yy = np.meshgrid(line, line, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


class ErrorMetrics(NamedTuple):
    points: np.ndarray
    exact: np.ndarray
    predicted: np.ndarray
    pointwise: np.ndarray
    linf: float
    l2: float
    boundary_error: float


def _predict(net, points):
    if hasattr(net, "as_deep"):
        return evaluate(net, points)
    return np.asarray(net(points), dtype=float)


def error_metrics(net, problem, grid=None, per_edge=BOUNDARY_POINTS_PER_EDGE):
    """Pointwise, L-infinity and L2 errors of a network against the exact solution.

    Args:
      net: A network (anything with ``as_deep()``) or a plain callable taking
        the grid points.
      problem: ProblemSpec with an exact solution.
      grid: Evaluation points; defaults to ``evaluation_grid(problem.dim)``.
        In 2D a custom grid must be a full row-major tensor grid for the L2 norm.
    Returns:
      ErrorMetrics. L2 uses the trapezoid rule on the grid.
    Raises:
      MetricUnavailableError: if the problem has no exact solution.
    """
    if problem.exact is None:
        raise MetricUnavailableError(f"{problem.name} has no exact solution")
    points = evaluation_grid(problem.dim) if grid is None else np.asarray(grid, dtype=float)
    exact = np.asarray(problem.exact(points), dtype=float)
    predicted = _predict(net, points)
    pointwise = np.abs(predicted - exact)

    if problem.dim == 1:
        l2 = np.sqrt(trapezoid(pointwise**2, points))
    else:
        xs, ys = np.unique(points[:, 0]), np.unique(points[:, 1])
        sq = (pointwise**2).reshape(xs.size, ys.size)
        l2 = np.sqrt(trapezoid(trapezoid(sq, ys, axis=1), xs))

    edge = boundary_points(problem.dim, per_edge)
    boundary_error = np.max(np.abs(_predict(net, edge) - problem.exact(edge)))
    return ErrorMetrics(
        points,
        exact,
        predicted,
        pointwise,
        float(pointwise.max()),
        float(l2),
        float(boundary_error),
    )
