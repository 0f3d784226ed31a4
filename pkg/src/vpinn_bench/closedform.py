"""
Quadrature-free variational residuals of a shallow sine network.

For u(x) = sum_j a_j sin(w_j x + theta_j) on [-1, 1] every residual against the
sine tests sin(k pi x) reduces to sums of

    (sin(w x + theta), sin(k pi x)) = 2 (-1)^k k pi cos(theta) sin(w) / (w^2 - k^2 pi^2)

and every residual against the Legendre tests P_{k+1} - P_{k-1} reduces to the
moments

    I_k(w) = int_{-1}^{1} exp(i w x) P_k(x) dx,
    B_k = Re(exp(i theta) I_k),  C_k = Im(exp(i theta) I_k),

which obey I_k = i (2k - 1) / w I_{k-1} + I_{k-2}. The functions are written with
torch so that the loss built from them can be differentiated with respect to
(a, w, theta).

All residual functions accept a single test index or a sequence of indices and
return a 0-d or 1-d tensor accordingly.
"""

from dataclasses import dataclass

import numpy as np
import torch
from scipy.special import gammaln

from vpinn_bench.diffprop import DTYPE, Activation, DeepNetParams, as_tensor
from vpinn_bench.errors import ConfigurationError, SingularFrequencyError

EPS_SINGULAR = 1e-6
SMALL_FREQUENCY = 1e-3
SERIES_TERMS = 40
MAX_RECURSION = 200

_EPS = np.finfo(float).eps


@dataclass(eq=False)
class ShallowNetParams:
    """One hidden layer of N sine neurons: u(x) = sum_j a_j sin(w_j x + theta_j)."""

    a: torch.Tensor
    w: torch.Tensor
    theta: torch.Tensor

    def __post_init__(self):
        shapes = {tuple(t.shape) for t in (self.a, self.w, self.theta)}
        if len(shapes) != 1 or self.a.dim() != 1 or self.a.numel() == 0:
            raise ConfigurationError(
                f"a, w and theta must be vectors of one common length, got shapes {sorted(shapes)}"
            )
        for name in ("a", "w", "theta"):
            if not torch.isfinite(getattr(self, name)).all():
                raise ConfigurationError(f"non-finite entries in {name}")

    @classmethod
    def from_values(cls, a, w, theta, requires_grad=True):
        def leaf(values):
            return as_tensor(values).reshape(-1).clone().detach().requires_grad_(requires_grad)

        return cls(leaf(a), leaf(w), leaf(theta))

    @property
    def N(self):
        return self.a.shape[0]

    dim = 1
    depth = 1
    activation = Activation.SINE

    @property
    def widths(self):
        return (1, self.N)

    def parameters(self):
        return [self.a, self.w, self.theta]

    def as_deep(self):
        """View as a depth-1 DeepNetParams sharing these tensors."""
        return DeepNetParams([self.w.unsqueeze(1)], [self.theta], self.a, Activation.SINE)


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet values u(-1) = g and u(1) = h."""

    g: float
    h: float

    def __post_init__(self):
        if not (np.isfinite(self.g) and np.isfinite(self.h)):
            raise ConfigurationError(f"boundary values must be finite, got g={self.g}, h={self.h}")


@dataclass(eq=False)
class RecursionState:
    """I_k, B_k and C_k for k = 0..k_max, each of shape (k_max + 1,) + w.shape."""

    I: torch.Tensor
    B: torch.Tensor
    C: torch.Tensor

    @property
    def k_max(self):
        return self.B.shape[0] - 1


def _indices(k):
    ks = np.atleast_1d(np.asarray(k))
    if ks.ndim != 1 or ks.dtype.kind not in "iu" or (ks < 1).any():
        raise ConfigurationError(f"test indices must be integers >= 1, got {k!r}")
    return ks.astype(np.int64), np.ndim(k) == 0


def _finish(values, scalar):
    return values[0] if scalar else values


def _parity(ks):
    return torch.as_tensor(np.where(ks % 2 == 1, -1.0, 1.0), dtype=DTYPE)


def _check_denominator(den, ks):
    small = den.detach().abs() < EPS_SINGULAR
    if not small.any():
        return
    where = torch.nonzero(small)[0].tolist()
    value = float(den[tuple(where)])
    if len(where) == 3:
        raise SingularFrequencyError(where[1], int(ks[where[0]]), partner=where[2], denominator=value)
    raise SingularFrequencyError(where[1], int(ks[where[0]]), denominator=value)


def _sine_kernel(net, ks):
    """(sin(w_j x + theta_j), sin(k pi x)) for every (k, j), shape (K, N)."""
    kpi = torch.as_tensor(ks * np.pi, dtype=DTYPE).unsqueeze(1)
    den = net.w**2 - kpi**2
    _check_denominator(den, ks)
    return 2.0 * _parity(ks).unsqueeze(1) * kpi * torch.cos(net.theta) * torch.sin(net.w) / den


def residual_projection(net, k):
    """(u, v_k) for the sine tests."""
    ks, scalar = _indices(k)
    return _finish((_sine_kernel(net, ks) * net.a).sum(dim=1), scalar)


def residual_sine_r12(net, k):
    """(-u'', v_k) = (u', v_k') for the sine tests; the two forms coincide."""
    ks, scalar = _indices(k)
    values = (_sine_kernel(net, ks) * net.a * net.w**2).sum(dim=1)
    return _finish(values, scalar)


def residual_sine_r3(net, k, bc):
    """-(u, v_k'') + [g_or_h v_k'] at x = +-1, with the exact boundary values."""
    ks, scalar = _indices(k)
    kpi = torch.as_tensor(ks * np.pi, dtype=DTYPE)
    proj = (_sine_kernel(net, ks) * net.a).sum(dim=1)
    values = kpi**2 * proj + _parity(ks) * kpi * (bc.h - bc.g)
    return _finish(values, scalar)


def residual_burgers_nl(net, k):
    """(u u', v_k) for the sine tests, a quadratic form in a.

    The (j, i) term pairs sin(w_j x + theta_j) with a_i w_i cos(w_i x + theta_i);
    on the diagonal the difference frequency is zero and its term vanishes.
    """
    ks, scalar = _indices(k)
    kpi2 = torch.as_tensor((ks * np.pi) ** 2, dtype=DTYPE).reshape(-1, 1, 1)
    wj, wi = net.w.reshape(1, -1, 1), net.w.reshape(1, 1, -1)
    tj, ti = net.theta.reshape(1, -1, 1), net.theta.reshape(1, 1, -1)
    den_sum = (wj + wi) ** 2 - kpi2
    den_diff = (wj - wi) ** 2 - kpi2
    _check_denominator(den_sum, ks)
    _check_denominator(den_diff, ks)
    pair = torch.sin(wj + wi) * torch.cos(tj + ti) / den_sum + torch.sin(
        wj - wi
    ) * torch.cos(tj - ti) / den_diff
    coeff = net.a.reshape(1, -1, 1) * (net.a * net.w).reshape(1, 1, -1)
    kpi = torch.as_tensor(ks * np.pi, dtype=DTYPE)
    values = _parity(ks) * kpi * (coeff * pair).sum(dim=(1, 2))
    return _finish(values, scalar)


def _series_mask(w, k_max):
    """Where the ascending series for j_k(w) beats the forward recursion.

    Both error estimates are heuristics: the forward recursion amplifies
    rounding like the second solution y_k(w), the series loses accuracy to
    cancellation among its largest terms and to truncation.
    """
    w = np.maximum(np.abs(np.asarray(w, dtype=float)), np.finfo(float).tiny)
    flat = w.reshape(-1)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        y = np.empty((k_max + 1, flat.size))
        y[0] = -np.cos(flat) / flat
        if k_max >= 1:
            y[1] = -np.cos(flat) / flat**2 - np.sin(flat) / flat
        for k in range(2, k_max + 1):
            y[k] = (2 * k - 1) / flat * y[k - 1] - y[k - 2]
        forward = _EPS * np.maximum(flat * flat, 1.0) * np.abs(y)
        forward = np.where(np.isfinite(forward), forward, np.inf)

        kk = np.arange(k_max + 1).reshape(-1, 1, 1)
        mm = np.arange(SERIES_TERMS + 1).reshape(1, -1, 1)
        log_terms = (
            (kk + 2 * mm) * np.log(flat)
            + kk * np.log(2.0)
            - gammaln(mm + 1)
            - gammaln(2 * kk + 2 * mm + 2)
            + gammaln(kk + mm + 1)
        )
        terms = np.exp(log_terms)
        series = _EPS * terms[:, :-1].max(axis=1) + terms[:, -1]
        series = np.where(np.isfinite(series), series, np.inf)
    mask = (series < forward) | (flat < SMALL_FREQUENCY)
    return mask.reshape((k_max + 1,) + w.shape)


def _series_values(w, k_max):
    """j_k(w) for k = 0..k_max by the ascending series, shape (k_max + 1,) + w.shape."""
    ks = torch.arange(1, k_max + 1, dtype=DTYPE).reshape((-1,) + (1,) * w.dim())
    lead = torch.cat([torch.ones_like(w).unsqueeze(0), torch.cumprod(w / (2 * ks + 1), dim=0)])
    kk = torch.arange(k_max + 1, dtype=DTYPE).reshape((-1, 1) + (1,) * w.dim())
    mm = torch.arange(1, SERIES_TERMS, dtype=DTYPE).reshape((1, -1) + (1,) * w.dim())
    ratios = -(w * w) / (2 * mm * (2 * kk + 2 * mm + 1))
    tail = torch.cumprod(ratios, dim=1).sum(dim=1)
    return lead * (1.0 + tail)


def _quarter_turn(cos_t, sin_t, k):
    """(cos, sin) of theta + k pi / 2."""
    return [
        (cos_t, sin_t),
        (-sin_t, cos_t),
        (-cos_t, -sin_t),
        (sin_t, -cos_t),
    ][k % 4]


def recursion_ibc(w, theta, k_max):
    """Moments I_k, B_k, C_k for k = 0..k_max.

    Seeds are I_0 = 2 sin(w) / w and I_1 = -(2i / w)(cos(w) - sin(w) / w); the
    coupled recursion

        B_k = B_{k-2} - (2k - 1) / w C_{k-1}
        C_k = C_{k-2} + (2k - 1) / w B_{k-1}

    then runs upward. The upward recursion is unstable once k exceeds |w|; at
    every (neuron, k) where the ascending series of the spherical Bessel
    function (I_k = 2 i^k j_k) is the more accurate of the two, including all
    |w| < SMALL_FREQUENCY, the series value replaces the recursion value
    before the recursion continues.

    Args:
      w, theta: Frequencies and phases (scalars or tensors of one shape).
      k_max: Highest moment index, at most MAX_RECURSION.
    Returns:
      A RecursionState.
    """
    if not isinstance(k_max, (int, np.integer)) or k_max < 1:
        raise ConfigurationError(f"k_max must be an integer >= 1, got {k_max!r}")
    if k_max > MAX_RECURSION:
        raise ConfigurationError(f"k_max {k_max} exceeds the recursion cap of {MAX_RECURSION}")
    w, theta = torch.broadcast_tensors(as_tensor(w), as_tensor(theta))

    mask = torch.as_tensor(_series_mask(w.detach().numpy(), k_max))
    # neurons that never take the series path get a harmless stand-in frequency
    uses_series = mask.any(dim=0)
    series = _series_values(torch.where(uses_series, w, torch.full_like(w, 0.5)), k_max)

    small = w.abs() < SMALL_FREQUENCY
    w_safe = torch.where(small, torch.ones_like(w), w)
    sin_w, cos_w = torch.sin(w_safe), torch.cos(w_safe)
    cos_t, sin_t = torch.cos(theta), torch.sin(theta)

    def rotate(j, k):
        c, s = _quarter_turn(cos_t, sin_t, k)
        return 2.0 * j * c, 2.0 * j * s

    def settle(k, b, c):
        bs, cs = rotate(series[k], k)
        return torch.where(mask[k], bs, b), torch.where(mask[k], cs, c)

    b0, c0 = settle(0, *rotate(sin_w / w_safe, 0))
    b1, c1 = settle(1, *rotate((sin_w / w_safe - cos_w) / w_safe, 1))
    B, C = [b0, b1], [c0, c1]
    for k in range(2, k_max + 1):
        ratio = (2 * k - 1) / w_safe
        b, c = settle(k, B[k - 2] - ratio * C[k - 1], C[k - 2] + ratio * B[k - 1])
        B.append(b)
        C.append(c)
    B, C = torch.stack(B), torch.stack(C)
    # I_k = exp(-i theta) (B_k + i C_k)
    I = torch.complex(cos_t * B + sin_t * C, cos_t * C - sin_t * B)
    return RecursionState(I, B, C)


def residual_legendre_r1(net, k):
    """(-u'', P_{k+1} - P_{k-1}) = sum_j a_j w_j^2 (C_{k+1} - C_{k-1})."""
    ks, scalar = _indices(k)
    state = recursion_ibc(net.w, net.theta, int(ks.max()) + 1)
    idx = torch.as_tensor(ks)
    values = ((state.C[idx + 1] - state.C[idx - 1]) * net.a * net.w**2).sum(dim=1)
    return _finish(values, scalar)


def residual_legendre_r2(net, k):
    """(u', (2k + 1) P_k) = (2k + 1) sum_j a_j w_j B_k."""
    ks, scalar = _indices(k)
    state = recursion_ibc(net.w, net.theta, int(ks.max()) + 1)
    idx = torch.as_tensor(ks)
    scale = torch.as_tensor(2 * ks + 1, dtype=DTYPE)
    values = scale * (state.B[idx] * net.a * net.w).sum(dim=1)
    return _finish(values, scalar)


def sine_moments(modes, k):
    """Exact (sum_m c_m sin(omega_m x), sin(k pi x)) over [-1, 1].

    Args:
      modes: Iterable of (amplitude, frequency) pairs.
      k: Test index or indices.
    Returns:
      A float or numpy array. Resonant frequencies need no special casing.
    """
    ks, scalar = _indices(k)
    kpi = ks * np.pi
    total = np.zeros(ks.shape)
    for amplitude, frequency in modes:
        # sin(a) / a == np.sinc(a / pi)
        total += amplitude * (
            np.sinc((frequency - kpi) / np.pi) - np.sinc((frequency + kpi) / np.pi)
        )
    return float(total[0]) if scalar else total
