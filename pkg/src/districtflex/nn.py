"""Minimal dense networks with analytic gradients and Adam.

Networks are plain values: a list of (weight, bias) arrays with tanh
hidden activations and a linear output layer. Everything is batched over
the leading axis; single vectors are promoted and squeezed back.

Checkpoint layout (little-endian): magic b"MLP1", int64 L, L int64 layer
sizes, then for each layer the weight matrix (rows = outputs) in row-major
order followed by the bias vector, all float64.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Mlp",
    "MlpGrads",
    "AdamState",
    "init_mlp",
    "mlp_forward",
    "mlp_forward_cache",
    "mlp_backward",
    "mlp_gradient",
    "adam_step",
    "clip_grad_norm",
    "save_mlp",
    "load_mlp",
    "ShapeMismatchError",
    "NonFiniteGradError",
]

_MAGIC = b"MLP1"


class ShapeMismatchError(ValueError):
    """Input or gradient shapes do not match the network."""


class NonFiniteGradError(ValueError):
    """A gradient contains NaN or Inf."""


@dataclass
class Mlp:
    sizes: tuple[int, ...]
    weights: list[np.ndarray]   # (n_out, n_in) per layer
    biases: list[np.ndarray]    # (n_out,) per layer

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Mlp":
        return Mlp(self.sizes, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class MlpGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def scaled(self, factor: float) -> "MlpGrads":
        return MlpGrads([w * factor for w in self.weights], [b * factor for b in self.biases])

    def add_(self, other: "MlpGrads") -> None:
        for w, ow in zip(self.weights, other.weights):
            w += ow
        for b, ob in zip(self.biases, other.biases):
            b += ob


def init_mlp(sizes, rng: np.random.Generator) -> Mlp:
    """Gaussian fan-in initialization, zero biases."""
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2:
        raise ValueError("need at least input and output sizes")
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.standard_normal((n_out, n_in)) / np.sqrt(n_in))
        biases.append(np.zeros(n_out))
    return Mlp(sizes=sizes, weights=weights, biases=biases)


def _promote(x: np.ndarray, width: int, what: str) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != width:
        raise ShapeMismatchError(f"{what} has shape {x.shape}, expected (*, {width})")
    return x, single


def mlp_forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Deterministic forward pass; tanh hidden layers, linear output."""
    x, single = _promote(x, net.sizes[0], "input")
    h = x
    last = net.n_layers - 1
    for j, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if j != last:
            h = np.tanh(h)
    return h[0] if single else h


def mlp_forward_cache(net: Mlp, x: np.ndarray):
    """Forward pass retaining activations for a later backward pass."""
    x, single = _promote(x, net.sizes[0], "input")
    acts = [x]
    h = x
    last = net.n_layers - 1
    for j, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if j != last:
            h = np.tanh(h)
        acts.append(h)
    out = acts[-1]
    return (out[0] if single else out), (acts, single)


def mlp_backward(net: Mlp, cache, upstream: np.ndarray) -> tuple[MlpGrads, np.ndarray]:
    """Backprop `upstream` (d loss / d output) through the cached pass.

    Returns parameter gradients and the gradient w.r.t. the input batch
    (needed when a network feeds another, e.g. actor through critic).
    """
    acts, single = cache
    upstream, us_single = _promote(upstream, net.sizes[-1], "upstream gradient")
    if single != us_single or upstream.shape[0] != acts[0].shape[0]:
        raise ShapeMismatchError("upstream gradient batch does not match the cached forward")

    grads_w = [None] * net.n_layers
    grads_b = [None] * net.n_layers
    delta = upstream
    for j in range(net.n_layers - 1, -1, -1):
        grads_w[j] = delta.T @ acts[j]
        grads_b[j] = delta.sum(axis=0)
        if j > 0:
            delta = (delta @ net.weights[j]) * (1.0 - acts[j] ** 2)  # tanh'
    input_grad = delta @ net.weights[0]
    return MlpGrads(grads_w, grads_b), (input_grad[0] if single else input_grad)


def mlp_gradient(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> MlpGrads:
    """Parameter gradients for a single forward/backward round trip."""
    _, cache = mlp_forward_cache(net, x)
    grads, _ = mlp_backward(net, cache, upstream)
    return grads


@dataclass
class AdamState:
    lr: float
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, lr: float = 3e-4) -> "AdamState":
        if lr <= 0.0:
            raise ValueError("learning rate must be > 0")
        return cls(
            lr=lr,
            m_w=[np.zeros_like(w) for w in net.weights],
            v_w=[np.zeros_like(w) for w in net.weights],
            m_b=[np.zeros_like(b) for b in net.biases],
            v_b=[np.zeros_like(b) for b in net.biases],
        )


def clip_grad_norm(grads: MlpGrads, max_norm: float = 10.0) -> float:
    """Global-norm clipping in place; returns the pre-clip norm."""
    total = 0.0
    for g in grads.weights + grads.biases:
        total += float(np.sum(g * g))
    norm = float(np.sqrt(total))
    if norm > max_norm and norm > 0.0:
        factor = max_norm / norm
        for g in grads.weights + grads.biases:
            g *= factor
    return norm


def adam_step(state: AdamState, net: Mlp, grads: MlpGrads) -> None:
    """Adaptive-moment update, in place on the network parameters."""
    for g in grads.weights + grads.biases:
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradError("gradient contains NaN/Inf")
    state.t += 1
    b1c = 1.0 - state.beta1 ** state.t
    b2c = 1.0 - state.beta2 ** state.t
    for params, gs, ms, vs in (
        (net.weights, grads.weights, state.m_w, state.v_w),
        (net.biases, grads.biases, state.m_b, state.v_b),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            p -= state.lr * (m / b1c) / (np.sqrt(v / b2c) + state.eps)


def save_mlp(net: Mlp, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        header = np.array([len(net.sizes), *net.sizes], dtype="<i8")
        fh.write(header.tobytes())
        for w, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_mlp(path) -> Mlp:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an MLP checkpoint (magic {magic!r})")
        (n_sizes,) = np.frombuffer(fh.read(8), dtype="<i8")
        sizes = tuple(int(s) for s in np.frombuffer(fh.read(8 * int(n_sizes)), dtype="<i8"))
        weights, biases = [], []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            w = np.frombuffer(fh.read(8 * n_in * n_out), dtype="<f8").reshape(n_out, n_in).copy()
            b = np.frombuffer(fh.read(8 * n_out), dtype="<f8").copy()
            weights.append(w)
            biases.append(b)
        leftover = fh.read(1)
        if leftover:
            raise ValueError(f"{path}: trailing bytes after parameters")
    return Mlp(sizes=sizes, weights=weights, biases=biases)
