"""
Loss construction, Adam optimization, initialization and multi-seed runs.

Loss forms (r_b are boundary mismatches u - u_b):

- strong:      mean(r(x_r)^2) + tau mean(r_b^2)
- v1, v2, v3:  mean((R_k - F_k)^2) + tau mean(r_b^2)
- projection:  mean((R_k - U_k)^2) + tau sum(r_b^2)

In 1D tau mean(r_b^2) is (tau / 2)(|u(-1) - g|^2 + |u(1) - h|^2). Shallow sine
networks on 1D problems can evaluate R_k in closed form (``analytic``).
"""

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Tuple, Union

import numpy as np
import torch

from vpinn_bench import closedform
from vpinn_bench.assembly import (
    VariationalAssembly,
    VariationalForm,
    assemble_force,
    assemble_solution_moments,
    assemble_strong,
)
from vpinn_bench.basis import BasisKind, TensorTestBasis, TestBasis, test_table
from vpinn_bench.closedform import ShallowNetParams
from vpinn_bench.diffprop import (
    DTYPE,
    Activation,
    DeepNetParams,
    as_tensor,
    check_finite,
    eval_jet,
    param_gradient,
)
from vpinn_bench.errors import (
    AllSeedsDivergedError,
    ConfigurationError,
    MetricUnavailableError,
    NonFiniteGradientError,
    SingularFrequencyError,
)
from vpinn_bench.problems import (
    BOUNDARY_POINTS_PER_EDGE,
    Operator,
    boundary_points,
    error_metrics,
    penalizing_points,
)
from vpinn_bench.quadrature import RuleKind, gauss_rule

logger = logging.getLogger(__name__)

LOSS_FLOOR = 1e-14
DIVERGENCE_CEILING = 1e8
DEFAULT_LEARNING_RATE = 1e-3
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class LossForm(Enum):
    STRONG = "strong"
    V1 = "v1"
    V2 = "v2"
    V3 = "v3"
    PROJECTION = "projection"

    @property
    def variational(self):
        try:
            return VariationalForm(self.value)
        except ValueError:
            return None


def _pair(value):
    if isinstance(value, (tuple, list)):
        return tuple(int(v) for v in value)
    return int(value)


def _single(value, name):
    if isinstance(value, tuple):
        raise ConfigurationError(f"{name} {value!r} is a pair, but the problem is 1D")
    return value


@dataclass(frozen=True)
class LossConfig:
    form: LossForm
    tau: float
    basis: BasisKind = BasisKind.SINE
    test_functions: Union[int, Tuple[int, int]] = 5
    quadrature: RuleKind = RuleKind.GAUSS_LEGENDRE
    quadrature_order: Union[int, Tuple[int, int]] = 100
    penalizing_points: int = 1000
    boundary_points_per_edge: int = BOUNDARY_POINTS_PER_EDGE
    analytic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "form", LossForm(self.form))
        object.__setattr__(self, "basis", BasisKind(self.basis))
        object.__setattr__(self, "quadrature", RuleKind(self.quadrature))
        object.__setattr__(self, "test_functions", _pair(self.test_functions))
        object.__setattr__(self, "quadrature_order", _pair(self.quadrature_order))
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ConfigurationError(f"tau must be a positive real, got {self.tau}")
        counts = self.test_functions if isinstance(self.test_functions, tuple) else (self.test_functions,)
        if any(k < 1 for k in counts):
            raise ConfigurationError(f"test function count must be >= 1, got {self.test_functions}")
        if self.penalizing_points < 1:
            raise ConfigurationError(f"penalizing_points must be >= 1, got {self.penalizing_points}")

    def test_basis(self, dim):
        if dim == 1:
            return TestBasis(self.basis, _single(self.test_functions, "test_functions"))
        kx, ky = self.test_functions if isinstance(self.test_functions, tuple) else (self.test_functions,) * 2
        return TensorTestBasis(TestBasis(self.basis, kx), TestBasis(self.basis, ky))

    def rule(self, dim):
        if dim == 1:
            return gauss_rule(self.quadrature, _single(self.quadrature_order, "quadrature_order"))
        order = self.quadrature_order
        qx, qy = order if isinstance(order, tuple) else (order,) * 2
        return gauss_rule(self.quadrature, qx), gauss_rule(self.quadrature, qy)


class InitScheme(Enum):
    XAVIER_STANDARD = "xavier-standard"
    XAVIER_WIDENED = "xavier-widened"


@dataclass(frozen=True)
class InitPolicy:
    scheme: InitScheme = InitScheme.XAVIER_WIDENED
    widening: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "scheme", InitScheme(self.scheme))
        if not (math.isfinite(self.widening) and self.widening >= 1):
            raise ConfigurationError(f"widening factor must be >= 1, got {self.widening}")


@dataclass(frozen=True)
class NetworkSpec:
    depth: int
    width: int
    activation: Activation = Activation.SINE

    def __post_init__(self):
        object.__setattr__(self, "activation", Activation(self.activation))
        if self.depth < 1 or self.width < 1:
            raise ConfigurationError(f"depth and width must be >= 1, got {self.depth}, {self.width}")

    @property
    def shallow_sine(self):
        return self.depth == 1 and self.activation is Activation.SINE


def initialize_network(spec, dim, policy, seed):
    """Xavier-normal weights, zero biases, seeded.

    Each weight matrix draws N(0, 2 / (fan_in + fan_out)); the widened scheme
    scales the first layer (the frequencies of a sine network) by the widening
    factor. Depth-1 sine networks in 1D come back as ShallowNetParams.
    """
    generator = torch.Generator().manual_seed(int(seed))
    widths = (dim,) + (spec.width,) * spec.depth
    weights = []
    for i, (fan_in, fan_out) in enumerate(zip(widths[:-1], widths[1:])):
        std = math.sqrt(2.0 / (fan_in + fan_out))
        if i == 0 and policy.scheme is InitScheme.XAVIER_WIDENED:
            std *= policy.widening
        weights.append(torch.randn(fan_out, fan_in, generator=generator, dtype=DTYPE) * std)
    output = torch.randn(spec.width, generator=generator, dtype=DTYPE) * math.sqrt(2.0 / (spec.width + 1))
    biases = [torch.zeros(w.shape[0], dtype=DTYPE) for w in weights]
    if spec.shallow_sine and dim == 1:
        return ShallowNetParams.from_values(output, weights[0][:, 0], biases[0])
    return DeepNetParams.from_arrays(weights, biases, output, spec.activation)


class LossAssembler:
    """Scalar training loss of a network for one problem and LossConfig.

    Everything independent of the network (points, tables, force vectors) is
    prepared once; calling the assembler returns a 0-d tensor.
    """

    def __init__(self, problem, config, net=None, seed=0):
        self.problem = problem
        self.config = config
        self.form = config.form
        dim = problem.dim
        self._validate(net)

        self.boundary_points = boundary_points(dim, config.boundary_points_per_edge)
        self.boundary_values = as_tensor(problem.boundary_values(self.boundary_points))

        if self.form is LossForm.STRONG:
            interior = penalizing_points(dim, config.penalizing_points, seed)
            self.interior = interior[:, 0] if dim == 1 else interior
            return

        basis = config.test_basis(dim)
        if dim == 1:
            self.ks = np.arange(1, _single(config.test_functions, "test_functions") + 1)
        rule = None if config.analytic else config.rule(dim)
        exact_moments = config.analytic

        if self.form is LossForm.PROJECTION:
            if exact_moments and problem.solution_modes is None:
                rule = config.rule(dim)
                exact_moments = False
            self.target = as_tensor(assemble_solution_moments(problem, basis, rule, exact=exact_moments))
            if not config.analytic:
                table = test_table(basis, rule.nodes)
                self.nodes = rule.nodes
                self.v = as_tensor(table.value)
                self.weights = as_tensor(rule.weights)
            return

        if config.analytic:
            if problem.forcing_modes is None or config.basis is not BasisKind.SINE:
                rule = config.rule(dim)
                exact_moments = False
            self.target = as_tensor(assemble_force(problem, basis, rule, exact=exact_moments))
        else:
            self.assembly = VariationalAssembly(
                problem, basis, rule, self.form.variational, config.boundary_points_per_edge
            )

    def _validate(self, net):
        problem, config = self.problem, self.config
        if self.form is LossForm.PROJECTION and problem.dim != 1:
            raise ConfigurationError("the projection loss is only available in 1D")
        if self.form is LossForm.V3 and problem.dim != 1:
            raise ConfigurationError("form v3 is only available for 1D problems")
        if not config.analytic:
            return
        if self.form is LossForm.STRONG:
            raise ConfigurationError("the analytic path applies to variational forms only")
        if problem.dim != 1 or (net is not None and not isinstance(net, ShallowNetParams)):
            raise ConfigurationError("the analytic path needs a shallow sine network on a 1D problem")
        if config.basis is BasisKind.LEGENDRE:
            if self.form in (LossForm.V3, LossForm.PROJECTION):
                raise ConfigurationError(f"no closed form for {self.form.value} with Legendre tests")
            if problem.operator is Operator.BURGERS_1D:
                raise ConfigurationError("no closed-form Burgers residual for Legendre tests")

    def _closed_form_residual(self, net):
        ks = self.ks
        if self.config.basis is BasisKind.LEGENDRE:
            if self.form is LossForm.V1:
                return closedform.residual_legendre_r1(net, ks)
            return closedform.residual_legendre_r2(net, ks)
        if self.form is LossForm.V3:
            R = closedform.residual_sine_r3(net, ks, self.problem.boundary)
        else:
            R = closedform.residual_sine_r12(net, ks)
        if self.problem.operator is Operator.BURGERS_1D:
            R = R + closedform.residual_burgers_nl(net, ks)
        return R

    def boundary_residual(self, net):
        return eval_jet(net, self.boundary_points).value - self.boundary_values

    def __call__(self, net):
        tau = self.config.tau
        if self.form is LossForm.STRONG:
            res = assemble_strong(net, self.problem, self.interior, self.boundary_points)
            return torch.mean(res.interior**2) + tau * torch.mean(res.boundary**2)

        if self.form is LossForm.PROJECTION:
            if self.config.analytic:
                R = closedform.residual_projection(net, self.ks)
            else:
                R = self.v @ (self.weights * eval_jet(net, self.nodes).value)
            r_b = self.boundary_residual(net)
            return torch.mean((R - self.target) ** 2) + tau * torch.sum(r_b**2)

        if self.config.analytic:
            residual = self._closed_form_residual(net) - self.target
            r_b = self.boundary_residual(net)
        else:
            vector = self.assembly.residuals(net)
            residual, r_b = vector.residual, vector.boundary
        return torch.mean(residual**2) + tau * torch.mean(r_b**2)


def loss_value(net, problem, config, seed=0):
    """Training loss as a 0-d tensor (differentiable in the network parameters)."""
    return LossAssembler(problem, config, net, seed)(net)


@dataclass(eq=False)
class AdamState:
    step: int
    exp_avg: List[torch.Tensor]
    exp_avg_sq: List[torch.Tensor]

    @classmethod
    def for_params(cls, params):
        return cls(
            0,
            [torch.zeros_like(p, memory_format=torch.preserve_format).detach() for p in params],
            [torch.zeros_like(p, memory_format=torch.preserve_format).detach() for p in params],
        )


def adam_step(params, grads, state, lr=DEFAULT_LEARNING_RATE, betas=ADAM_BETAS, eps=ADAM_EPS):
    """One Adam update, applied to ``params`` in place.

    Uses the same sequence of tensor operations as torch.optim.Adam's
    single-tensor path (no weight decay, no amsgrad).

    Returns:
      (params, state)
    Raises:
      NonFiniteGradientError: if a gradient contains NaN or infinity.
    """
    beta1, beta2 = betas
    check_finite(grads)
    state.step += 1
    bias_correction1 = 1 - beta1**state.step
    bias_correction2 = 1 - beta2**state.step
    step_size = lr / bias_correction1
    bias_correction2_sqrt = bias_correction2**0.5
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.exp_avg, state.exp_avg_sq):
            m.lerp_(g, 1 - beta1)
            v.mul_(beta2).addcmul_(g, g, value=1 - beta2)
            denom = (v.sqrt() / bias_correction2_sqrt).add_(eps)
            p.addcdiv_(m, denom, value=-step_size)
    return params, state


@dataclass(eq=False)
class TrainingRecord:
    seed: int
    iterations: int
    history: List[Tuple[int, float]]
    net: object
    wall_time: float
    metrics: Optional[object] = None
    diverged: bool = False
    reason: str = ""

    @property
    def final_loss(self):
        return self.history[-1][1] if self.history else math.nan

    @property
    def best_loss(self):
        return min(loss for _, loss in self.history)


def train(
    problem,
    template,
    config,
    policy,
    seed,
    max_iters,
    learning_rate=DEFAULT_LEARNING_RATE,
    record_every=100,
):
    """Train one network with Adam.

    Stops at ``max_iters`` updates, when the loss drops below LOSS_FLOOR, or on
    divergence (loss above DIVERGENCE_CEILING, non-finite loss or gradient, a
    frequency hitting a closed-form singularity), which marks the record
    instead of raising.
    """
    net = initialize_network(template, problem.dim, policy, seed)
    loss_fn = LossAssembler(problem, config, net, seed)
    params = net.parameters()
    state = AdamState.for_params(params)
    logger.info(
        "training %s seed=%d: %d parameters, form %s",
        problem.name,
        seed,
        sum(p.numel() for p in params),
        config.form.value,
    )

    history = []
    diverged, reason = False, "iteration budget exhausted"
    start = time.perf_counter()
    iteration, value = 0, math.nan
    while True:
        try:
            loss = loss_fn(net)
        except SingularFrequencyError as e:
            diverged, reason = True, f"{e} at iteration {iteration}"
            break
        value = loss.item()
        if not math.isfinite(value) or value > DIVERGENCE_CEILING:
            diverged, reason = True, f"loss {value:.3e} at iteration {iteration}"
            break
        if iteration % record_every == 0:
            history.append((iteration, value))
            logger.debug("seed=%d iteration %d loss %.6e", seed, iteration, value)
        if value < LOSS_FLOOR:
            reason = f"loss below {LOSS_FLOOR:g}"
            break
        if iteration >= max_iters:
            break
        try:
            grads = param_gradient(net, lambda _: loss)
        except NonFiniteGradientError as e:
            diverged, reason = True, f"{e} at iteration {iteration}"
            break
        adam_step(params, grads, state, learning_rate)
        iteration += 1
    if math.isfinite(value) and (not history or history[-1][0] != iteration):
        history.append((iteration, value))
    wall_time = time.perf_counter() - start

    metrics = None
    if problem.exact is not None and not diverged:
        metrics = error_metrics(net, problem, per_edge=config.boundary_points_per_edge)
    logger.info("seed=%d stopped after %d iterations: %s", seed, iteration, reason)
    return TrainingRecord(seed, iteration, history, net, wall_time, metrics, diverged, reason)


class SeedAverage(NamedTuple):
    points: np.ndarray
    mean_pointwise: np.ndarray
    linf: List[float]
    records: List[TrainingRecord]


def _single_thread():
    torch.set_num_threads(1)


def _train_task(args):
    problem, template, config, policy, seed, max_iters, kwargs = args
    return train(problem, template, config, policy, seed, max_iters, **kwargs)


def multi_seed_error(problem, template, config, policy, seeds, max_iters, workers=1, **kwargs):
    """Train one network per seed and average the pointwise errors.

    Seeds run in a process pool when ``workers`` > 1 (None means one per CPU);
    records come back in seed order. Diverged seeds are left out of the
    average, and the average runs over seeds in sorted order.

    Raises:
      AllSeedsDivergedError: when no seed produced a usable network.
    """
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigurationError("need at least one seed")
    if problem.exact is None:
        raise MetricUnavailableError(f"{problem.name} has no exact solution to measure errors against")
    tasks = [(problem, template, config, policy, s, max_iters, kwargs) for s in seeds]
    workers = workers or os.cpu_count() or 1
    if workers == 1 or len(seeds) == 1:
        records = [_train_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds)), initializer=_single_thread) as pool:
            records = list(pool.map(_train_task, tasks))

    usable = sorted((r for r in records if r.metrics is not None), key=lambda r: r.seed)
    if not usable:
        raise AllSeedsDivergedError(
            f"all {len(seeds)} seeds diverged: " + "; ".join(f"{r.seed}: {r.reason}" for r in records)
        )
    mean = np.mean(np.stack([r.metrics.pointwise for r in usable]), axis=0)
    linf = [r.metrics.linf if r.metrics is not None else math.inf for r in records]
    return SeedAverage(usable[0].metrics.points, mean, linf, records)
