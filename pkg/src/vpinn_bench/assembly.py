"""
Strong-form and quadrature-based variational residuals for deep networks.

With Gauss nodes x_q, weights W_q and test functions v_k the 1D variational
residuals are

    R1_k = -sum_q W_q u''(x_q) v_k(x_q)
    R2_k =  sum_q W_q u'(x_q) v_k'(x_q)
    R3_k = -sum_q W_q u(x_q) v_k''(x_q) + h v_k'(1) - g v_k'(-1)

where R3 takes the exact boundary values instead of the network's. Burgers adds
sum_q W_q u u' v_k. In 2D the residual is (laplacian u, v) (form 1) or
-(grad u, grad v) (form 2) over the tensor-product rule and test space.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import torch

from vpinn_bench.basis import BasisKind, TensorTestBasis, TestBasis, test_table
from vpinn_bench.closedform import sine_moments
from vpinn_bench.diffprop import as_tensor, eval_jet
from vpinn_bench.errors import ConfigurationError
from vpinn_bench.problems import BOUNDARY_POINTS_PER_EDGE, Operator, boundary_points
from vpinn_bench.quadrature import QuadratureRule, tensor_rule


class VariationalForm(Enum):
    V1 = "v1"
    V2 = "v2"
    V3 = "v3"


@dataclass(eq=False)
class ResidualVector:
    """Variational residuals R (nonlinear part included), forces F and r_b."""

    R: torch.Tensor
    F: torch.Tensor
    boundary: torch.Tensor

    @property
    def residual(self):
        return self.R - self.F


@dataclass(eq=False)
class StrongResidualSet:
    interior: torch.Tensor
    boundary: torch.Tensor


def _tensor_basis(basis):
    if isinstance(basis, TensorTestBasis):
        return basis
    return TensorTestBasis(basis, basis)


def _rule_pair(rule):
    if isinstance(rule, QuadratureRule):
        return rule, rule
    rule_x, rule_y = rule
    return rule_x, rule_y


def _check_compatible(problem, basis, form):
    if problem.dim == 1 and not isinstance(basis, TestBasis):
        raise ConfigurationError("1D problems need a 1D test basis")
    if problem.dim == 2 and form is VariationalForm.V3:
        raise ConfigurationError("form v3 is only available for 1D problems")


def _forcing_values(problem, points):
    return as_tensor(problem.forcing(points))


def assemble_force(problem, basis, rule=None, exact=False):
    """F_k = (f, v_k), flattened row-major over (k_x, k_y) in 2D.

    With ``exact=True`` (or no rule) the force vector is integrated exactly
    from the problem's sine modes; this needs a 1D sine basis and a problem
    with ``forcing_modes``.
    """
    if exact or rule is None:
        return _sine_moment_vector(problem.forcing_modes, basis, "forcing")
    if problem.dim == 1:
        table = test_table(basis, rule.nodes)
        return table.value @ (rule.weights * problem.forcing(rule.nodes))
    basis = _tensor_basis(basis)
    rule_x, rule_y = _rule_pair(rule)
    points, weights = tensor_rule(rule_x, rule_y)
    f = (weights * problem.forcing(points)).reshape(rule_x.order, rule_y.order)
    phi_x = test_table(basis.basis_x, rule_x.nodes).value
    phi_y = test_table(basis.basis_y, rule_y.nodes).value
    return np.einsum("aq,br,qr->ab", phi_x, phi_y, f).reshape(-1)


def assemble_solution_moments(problem, basis, rule=None, exact=False):
    """U_k = (u_exact, v_k) for 1D problems, exact when the solution is a sine sum."""
    if problem.exact is None:
        raise ConfigurationError(f"{problem.name} has no exact solution to project")
    if exact or rule is None:
        return _sine_moment_vector(problem.solution_modes, basis, "exact solution")
    table = test_table(basis, rule.nodes)
    return table.value @ (rule.weights * problem.exact(rule.nodes))


def _sine_moment_vector(modes, basis, what):
    if not isinstance(basis, TestBasis) or basis.kind is not BasisKind.SINE:
        raise ConfigurationError("exact moments need a 1D sine test basis")
    if modes is None:
        raise ConfigurationError(f"the {what} is not a finite sine sum; use quadrature")
    return sine_moments(modes, np.arange(1, basis.count + 1))


class VariationalAssembly:
    """Quadrature data precomputed for repeated residual evaluation.

    Args:
      problem: ProblemSpec.
      basis: TestBasis (1D) or TensorTestBasis / TestBasis used in both
        directions (2D).
      rule: QuadratureRule, or a (rule_x, rule_y) pair in 2D.
      form: VariationalForm or its value.
      per_edge: Boundary training points per edge in 2D.
      exact_force: Integrate F exactly from the problem's sine modes.
    """

    def __init__(self, problem, basis, rule, form, per_edge=BOUNDARY_POINTS_PER_EDGE, exact_force=False):
        self.problem = problem
        self.form = VariationalForm(form)
        _check_compatible(problem, basis, self.form)
        self.force = as_tensor(assemble_force(problem, basis, rule, exact=exact_force))

        edge = boundary_points(problem.dim, per_edge)
        self.boundary_points = as_tensor(edge)
        self.boundary_values = as_tensor(problem.boundary_values(edge))

        if problem.dim == 1:
            self.basis = basis
            self.points = as_tensor(rule.nodes)
            self.weights = as_tensor(rule.weights)
            table = test_table(basis, rule.nodes)
            self.v, self.v1, self.v2 = (as_tensor(t) for t in table)
            ends = test_table(basis, np.array([-1.0, 1.0]))
            g, h = problem.boundary.g, problem.boundary.h
            self.lift = as_tensor(h * ends.d1[:, 1] - g * ends.d1[:, 0])
        else:
            self.basis = _tensor_basis(basis)
            rule_x, rule_y = _rule_pair(rule)
            self.grid_shape = (rule_x.order, rule_y.order)
            points, weights = tensor_rule(rule_x, rule_y)
            self.points = as_tensor(points)
            self.weights = as_tensor(weights.reshape(self.grid_shape))
            tx = test_table(self.basis.basis_x, rule_x.nodes)
            ty = test_table(self.basis.basis_y, rule_y.nodes)
            self.phi_x, self.dphi_x = as_tensor(tx.value), as_tensor(tx.d1)
            self.phi_y, self.dphi_y = as_tensor(ty.value), as_tensor(ty.d1)

    @property
    def count(self):
        return self.force.shape[0]

    def boundary_residual(self, net):
        return eval_jet(net, self.boundary_points).value - self.boundary_values

    def residuals(self, net):
        jet = eval_jet(net, self.points)
        if self.problem.dim == 1:
            R = self._residual_1d(jet)
        else:
            R = self._residual_2d(jet)
        return ResidualVector(R, self.force, self.boundary_residual(net))

    def _residual_1d(self, jet):
        u, ux, uxx = jet.value, jet.grad[:, 0], jet.diag2[:, 0]
        W = self.weights
        if self.form is VariationalForm.V1:
            R = -(self.v @ (W * uxx))
        elif self.form is VariationalForm.V2:
            R = self.v1 @ (W * ux)
        else:
            R = -(self.v2 @ (W * u)) + self.lift
        if self.problem.operator is Operator.BURGERS_1D:
            R = R + self.v @ (W * u * ux)
        return R

    def _residual_2d(self, jet):
        W = self.weights
        if self.form is VariationalForm.V1:
            lap = W * jet.laplacian.reshape(self.grid_shape)
            R = torch.einsum("aq,br,qr->ab", self.phi_x, self.phi_y, lap)
        else:
            ux = W * jet.grad[:, 0].reshape(self.grid_shape)
            uy = W * jet.grad[:, 1].reshape(self.grid_shape)
            R = -(
                torch.einsum("aq,br,qr->ab", self.dphi_x, self.phi_y, ux)
                + torch.einsum("aq,br,qr->ab", self.phi_x, self.dphi_y, uy)
            )
        return R.reshape(-1)


def assemble_variational(net, basis, rule, form, problem, per_edge=BOUNDARY_POINTS_PER_EDGE):
    """One-off residual assembly; see VariationalAssembly for repeated use."""
    return VariationalAssembly(problem, basis, rule, form, per_edge).residuals(net)


def operator_residual(operator, jet):
    """Operator applied to a network jet (before subtracting the forcing)."""
    if operator is Operator.POISSON_1D:
        return -jet.diag2[:, 0]
    if operator is Operator.BURGERS_1D:
        return jet.value * jet.grad[:, 0] - jet.diag2[:, 0]
    return jet.laplacian


def assemble_strong(net, problem, interior, boundary):
    """Strong residuals r(x) = L u(x) - f(x) and boundary mismatches u - u_b."""
    interior = np.asarray(interior, dtype=float)
    boundary = np.asarray(boundary, dtype=float)
    if problem.dim == 1:
        interior = interior.reshape(-1)
        boundary = boundary.reshape(-1)
    jet = eval_jet(net, interior)
    r = operator_residual(problem.operator, jet) - _forcing_values(problem, interior)
    r_b = eval_jet(net, boundary).value - as_tensor(problem.boundary_values(boundary))
    return StrongResidualSet(r, r_b)


def weak_residual(net, problem, tests, nodes, weights, form=VariationalForm.V1):
    """Residuals (L u - f, v_k) against arbitrary tabulated 1D test functions.

    Args:
      tests: A TestJet whose arrays have shape (K, Q) on ``nodes``.
      nodes, weights: Any quadrature over the tests' supports.
      form: V1 integrates the strong residual; V2 moves one derivative onto
        the tests, which must vanish at the ends of their support.
    """
    form = VariationalForm(form)
    if problem.dim != 1 or form is VariationalForm.V3:
        raise ConfigurationError("weak residuals support 1D problems with forms v1 and v2")
    nodes = np.asarray(nodes, dtype=float)
    W = as_tensor(weights)
    jet = eval_jet(net, nodes)
    v = as_tensor(tests.value)
    f = _forcing_values(problem, nodes)
    if form is VariationalForm.V1:
        return v @ (W * (operator_residual(problem.operator, jet) - f))
    integrand = as_tensor(tests.d1) @ (W * jet.grad[:, 0])
    if problem.operator is Operator.BURGERS_1D:
        integrand = integrand + v @ (W * jet.value * jet.grad[:, 0])
    return integrand - v @ (W * f)
