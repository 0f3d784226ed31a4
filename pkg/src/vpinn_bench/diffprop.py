"""
Deep feed-forward networks evaluated together with their input derivatives.

A network with L hidden layers computes

    z_0 = x,  z_i = sigma(W_i z_{i-1} + b_i),  u = l . z_L

and ``eval_jet`` carries, next to every activation, its first and pure second
derivatives with respect to each spatial input x_p:

    z' = sigma'(a) a',   z'' = sigma''(a) (a')^2 + sigma'(a) a''

The jets are ordinary float64 torch expressions of the parameters, so the
gradient of any loss built from u, du/dx_p and d2u/dx_p^2 is obtained exactly by
reverse-mode differentiation (``param_gradient``).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, List

import numpy as np
import torch

from vpinn_bench.errors import ConfigurationError, NonFiniteGradientError

DTYPE = torch.float64


class Activation(Enum):
    SINE = "sine"
    TANH = "tanh"


def activation_jet(activation, a):
    """Return sigma(a), sigma'(a), sigma''(a)."""
    if activation is Activation.SINE:
        s = torch.sin(a)
        return s, torch.cos(a), -s
    t = torch.tanh(a)
    dt = 1.0 - t * t
    return t, dt, -2.0 * t * dt


def as_tensor(values):
    if isinstance(values, torch.Tensor):
        return values.to(DTYPE)
    return torch.tensor(np.asarray(values, dtype=float), dtype=DTYPE)


@dataclass(eq=False)
class DeepNetParams:
    """Weights W_i (N_i x N_{i-1}), biases b_i (N_i) and output weights l (N_L)."""

    weights: List[torch.Tensor]
    biases: List[torch.Tensor]
    output: torch.Tensor
    activation: Activation

    def __post_init__(self):
        self.activation = Activation(self.activation)
        if not self.weights or len(self.weights) != len(self.biases):
            raise ConfigurationError(
                f"need one bias per weight matrix, got {len(self.weights)} weights "
                f"and {len(self.biases)} biases"
            )
        fan_in = self.weights[0].shape[1] if self.weights[0].dim() == 2 else None
        if fan_in not in (1, 2):
            raise ConfigurationError(f"input dimension must be 1 or 2, got {fan_in}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            if w.dim() != 2 or w.shape[1] != fan_in:
                raise ConfigurationError(
                    f"layer {i}: weight shape {tuple(w.shape)} does not take {fan_in} inputs"
                )
            if b.shape != (w.shape[0],):
                raise ConfigurationError(
                    f"layer {i}: bias shape {tuple(b.shape)} does not match {w.shape[0]} neurons"
                )
            fan_in = w.shape[0]
        if self.output.shape != (fan_in,):
            raise ConfigurationError(
                f"output weights shape {tuple(self.output.shape)} does not match width {fan_in}"
            )
        offset = 0
        for p in self.parameters():
            bad = torch.nonzero(~torch.isfinite(p.detach().reshape(-1)))
            if bad.numel():
                index = offset + int(bad[0, 0])
                raise ConfigurationError(f"non-finite network parameter at flat index {index}")
            offset += p.numel()

    @classmethod
    def from_arrays(cls, weights, biases, output, activation, requires_grad=True):
        """Build a network owning fresh float64 leaf tensors."""

        def leaf(values):
            return as_tensor(values).clone().detach().requires_grad_(requires_grad)

        return cls(
            [leaf(w) for w in weights],
            [leaf(b) for b in biases],
            leaf(output),
            Activation(activation),
        )

    @property
    def dim(self):
        return self.weights[0].shape[1]

    @property
    def depth(self):
        return len(self.weights)

    @property
    def widths(self):
        return (self.dim,) + tuple(w.shape[0] for w in self.weights)

    def parameters(self):
        """Parameter tensors in a fixed order: W_1, b_1, ..., W_L, b_L, l."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend((w, b))
        params.append(self.output)
        return params

    def as_deep(self):
        return self


@dataclass(eq=False)
class EvalJet:
    """Network value, gradient and pure second derivatives at n points.

    Shapes: x (n, d), value (n,), grad (n, d), diag2 (n, d).
    """

    x: torch.Tensor
    value: torch.Tensor
    grad: torch.Tensor
    diag2: torch.Tensor

    @property
    def laplacian(self):
        return self.diag2.sum(dim=1)


def as_points(x, dim):
    """Coerce x to an (n, dim) float64 tensor.

    A 1D array is a batch of points when dim == 1 and a single point otherwise.
    """
    x = as_tensor(x)
    if x.dim() == 0:
        x = x.reshape(1, 1)
    elif x.dim() == 1:
        x = x.reshape(-1, 1) if dim == 1 else x.reshape(1, -1)
    if x.dim() != 2 or x.shape[1] != dim:
        raise ConfigurationError(
            f"points of shape {tuple(x.shape)} do not match input dimension {dim}"
        )
    return x


def eval_jet(net, x):
    """Evaluate a network and its input derivatives.

    Args:
      net: DeepNetParams (or anything with ``as_deep()``).
      x: Points, shape (n, d), (n,) in 1D, or a single point of length d.
    Returns:
      An EvalJet with exact first and pure second derivatives.
    """
    net = net.as_deep()
    x = as_points(x, net.dim)
    n, d = x.shape
    z = x
    dz = torch.eye(d, dtype=DTYPE).expand(n, d, d)
    d2z = torch.zeros(n, d, d, dtype=DTYPE)
    for w, b in zip(net.weights, net.biases):
        a = z @ w.T + b
        da = dz @ w.T
        d2a = d2z @ w.T
        s, s1, s2 = activation_jet(net.activation, a)
        z = s
        dz = s1.unsqueeze(1) * da
        d2z = s2.unsqueeze(1) * da * da + s1.unsqueeze(1) * d2a
    return EvalJet(x, z @ net.output, dz @ net.output, d2z @ net.output)


def evaluate(net, x):
    """Network values only, as a numpy array (no graph kept)."""
    net = net.as_deep()
    with torch.no_grad():
        z = as_points(x, net.dim)
        for w, b in zip(net.weights, net.biases):
            z, _, _ = activation_jet(net.activation, z @ w.T + b)
        return (z @ net.output).numpy()


def param_gradient(net, scalar_builder: Callable):
    """Gradient of a scalar built from network evaluations.

    Args:
      net: A network exposing ``parameters()``.
      scalar_builder: Called with ``net``; returns a 0-d tensor built from
        eval_jet outputs and fixed data.
    Returns:
      A list of gradient tensors, one per entry of ``net.parameters()``.
    Raises:
      NonFiniteGradientError: if any gradient entry is NaN or infinite.
    """
    params = net.parameters()
    scalar = scalar_builder(net)
    grads = torch.autograd.grad(scalar, params, allow_unused=True)
    grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
    check_finite(grads)
    return grads


def check_finite(grads):
    """Raise NonFiniteGradientError at the first bad entry of the flattened gradient."""
    offset = 0
    for i, g in enumerate(grads):
        bad = torch.nonzero(~torch.isfinite(g.reshape(-1)))
        if bad.numel():
            raise NonFiniteGradientError(offset + int(bad[0, 0]), tensor_index=i)
        offset += g.numel()


def flatten(tensors):
    return torch.cat([t.reshape(-1) for t in tensors])
