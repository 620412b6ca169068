import copy
import dataclasses
import enum
import logging
from collections.abc import Iterator, Sequence
from typing import Literal, NamedTuple

import numpy as np
import numpy.typing as npt

from ._error import ParameterError, ShapeError
from ._numerics import Rng, as_matrix, ensure_finite
from ._types import Matrix

_LOGGER = logging.getLogger(__package__)

type Vector = npt.NDArray[np.float64]
InitScheme = Literal["normal", "scaled_normal", "zeros"]

DEFAULT_INIT_STDEV = 0.02
DEFAULT_LEAKY_SLOPE = 0.2


class Activation(enum.StrEnum):
    TANH = "tanh"
    SIGMOID = "sigmoid"
    RELU = "relu"
    LEAKY_RELU = "leaky_relu"
    LINEAR = "linear"


def _activate(kind: Activation, z: Matrix, alpha: float) -> Matrix:
    match kind:
        case Activation.TANH:
            return np.tanh(z)
        case Activation.SIGMOID:
            return np.exp(-np.logaddexp(0.0, -z))
        case Activation.RELU:
            return np.maximum(z, 0.0)
        case Activation.LEAKY_RELU:
            return np.where(z > 0.0, z, alpha * z)
        case Activation.LINEAR:
            return z


def _activation_grad(kind: Activation, z: Matrix, y: Matrix, alpha: float) -> Matrix:
    match kind:
        case Activation.TANH:
            return 1.0 - y * y
        case Activation.SIGMOID:
            return y * (1.0 - y)
        case Activation.RELU:
            return (z > 0.0).astype(np.float64)
        case Activation.LEAKY_RELU:
            return np.where(z > 0.0, 1.0, alpha)
        case Activation.LINEAR:
            return np.ones_like(z)


@dataclasses.dataclass(frozen=True, kw_only=True)
class LayerSpec:
    size: int
    activation: Activation = Activation.LINEAR
    alpha: float = DEFAULT_LEAKY_SLOPE
    spectral_norm: bool = False


@dataclasses.dataclass(kw_only=True, eq=False)
class DenseLayer:
    weights: Matrix
    bias: Vector
    activation: Activation = Activation.LINEAR
    alpha: float = DEFAULT_LEAKY_SLOPE
    spectral_norm: bool = False
    # left singular estimate for power iteration, present iff spectral_norm
    u: Vector | None = None

    def __post_init__(self) -> None:
        self.weights = as_matrix(self.weights, name="layer weights")
        self.bias = np.asarray(self.bias, dtype=np.float64)
        self.activation = Activation(self.activation)
        if self.bias.shape != (self.out_features,):
            raise ShapeError(f"bias shape {self.bias.shape} for {self.out_features} outputs")
        if self.spectral_norm:
            if self.u is None:
                self.u = np.full(self.out_features, 1.0 / np.sqrt(self.out_features))
            self.u = np.asarray(self.u, dtype=np.float64)
            if self.u.shape != (self.out_features,):
                raise ShapeError(f"power-iteration vector has shape {self.u.shape}")
        elif self.u is not None:
            raise ParameterError("u is only kept for spectrally normalised layers")

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]

    @property
    def out_features(self) -> int:
        return self.weights.shape[0]


@dataclasses.dataclass(kw_only=True, eq=False)
class Network:
    layers: list[DenseLayer]

    def __post_init__(self) -> None:
        if not self.layers:
            raise ParameterError("network needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_features != b.in_features:
                raise ShapeError(
                    f"layer {i} emits {a.out_features} values, layer {i + 1} takes {b.in_features}"
                )

    @property
    def in_features(self) -> int:
        return self.layers[0].in_features

    @property
    def out_features(self) -> int:
        return self.layers[-1].out_features

    @property
    def has_spectral_norm(self) -> bool:
        return any(layer.spectral_norm for layer in self.layers)

    def parameters(self) -> Iterator[npt.NDArray[np.float64]]:
        """Weights and biases in layer order: W0, b0, W1, b1, ..."""
        for layer in self.layers:
            yield layer.weights
            yield layer.bias

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    def same_parameters(self, other: "Network") -> bool:
        if len(self.layers) != len(other.layers):
            return False
        for a, b in zip(self.layers, other.layers):
            if (a.activation, a.alpha, a.spectral_norm) != (b.activation, b.alpha, b.spectral_norm):
                return False
            if not (np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)):
                return False
            if a.u is not None and not np.array_equal(a.u, b.u):
                return False
        return True


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class ForwardTrace:
    inputs: Matrix
    pre_activations: list[Matrix]
    activations: list[Matrix]
    # effective weights used in the pass (W/σ for normalised layers)
    weights: list[Matrix]
    sigmas: list[float]

    @property
    def final_net(self) -> Matrix:
        return self.pre_activations[-1]

    @property
    def output(self) -> Matrix:
        return self.activations[-1]

    @property
    def penultimate(self) -> Matrix:
        return self.activations[-2] if len(self.activations) > 1 else self.inputs

    @property
    def batch_size(self) -> int:
        return self.inputs.shape[0]


class LayerGrad(NamedTuple):
    weights: Matrix
    bias: Vector


class Gradients(NamedTuple):
    layers: list[LayerGrad]
    inputs: Matrix

    def flat(self) -> list[npt.NDArray[np.float64]]:
        """Gradients ordered like ``Network.parameters()``."""
        out: list[npt.NDArray[np.float64]] = []
        for g in self.layers:
            out.extend((g.weights, g.bias))
        return out


class SpectralEstimate(NamedTuple):
    sigma: float
    u: Vector
    degenerate: bool


def _normalize(x: Vector) -> tuple[Vector, float]:
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        return x, 0.0
    return x / norm, norm


def spectral_sigma(w: Matrix, u: Vector, iters: int) -> SpectralEstimate:
    """Largest singular value of ``w`` by power iteration from ``u``.

    Each iteration is ``v = Wᵀu/‖Wᵀu‖``, ``u = Wv/‖Wv‖``; the estimate is
    ``‖Wᵀu‖`` at the final ``u``.
    """
    if iters < 1:
        raise ParameterError(f"power iteration needs iters >= 1, got {iters}")
    original = np.asarray(u, dtype=np.float64)
    u, norm = _normalize(original)
    if norm == 0.0:
        raise ParameterError("power iteration needs a non-zero start vector")
    if u.shape != (w.shape[0],):
        raise ShapeError(f"start vector shape {u.shape} for weight {w.shape}")
    for _ in range(iters):
        v, v_norm = _normalize(w.T @ u)
        if v_norm == 0.0:
            return SpectralEstimate(0.0, original, True)
        u, u_norm = _normalize(w @ v)
        if u_norm == 0.0:
            return SpectralEstimate(0.0, original, True)
    return SpectralEstimate(float(np.linalg.norm(w.T @ u)), u, False)


def _effective_weight(layer: DenseLayer) -> tuple[Matrix, float]:
    if not layer.spectral_norm:
        return layer.weights, 1.0
    assert layer.u is not None
    sigma = float(np.linalg.norm(layer.weights.T @ layer.u))
    if sigma == 0.0:
        return layer.weights, 0.0
    return layer.weights / sigma, sigma


def apply_spectral_norm(layer: DenseLayer, iters: int = 1) -> Matrix:
    """Effective weight ``W/σ(W)``.

    The layer's persistent ``u`` is first advanced by ``iters`` power steps,
    one per call being the usual training convention.
    """
    if not layer.spectral_norm:
        raise ParameterError("layer does not use spectral normalisation")
    assert layer.u is not None
    estimate = spectral_sigma(layer.weights, layer.u, iters)
    if estimate.degenerate:
        _LOGGER.warning("spectral normalisation of a zero weight matrix; left unscaled")
        return layer.weights.copy()
    layer.u = estimate.u
    weight, _ = _effective_weight(layer)
    return weight


def power_iterate(net: Network, iters: int = 1) -> None:
    """Advance the persistent ``u`` of every normalised layer by ``iters`` steps."""
    for layer in net.layers:
        if not layer.spectral_norm:
            continue
        assert layer.u is not None
        estimate = spectral_sigma(layer.weights, layer.u, iters)
        if estimate.degenerate:
            _LOGGER.warning("zero weight matrix in spectrally normalised layer")
        layer.u = estimate.u


def forward(
    net: Network, batch: Matrix, *, sigmas: Sequence[float] | None = None
) -> ForwardTrace:
    """Evaluate ``net`` on a batch, keeping every intermediate value.

    ``sigmas`` freezes the normalising scale of each layer (used to check the
    straight-through gradient convention); by default the scale comes from
    the layer's current power-iteration vector.
    """
    x = as_matrix(batch, name="batch")
    if x.shape[1] != net.in_features:
        raise ShapeError(f"batch has {x.shape[1]} features, network takes {net.in_features}")
    if sigmas is not None and len(sigmas) != len(net.layers):
        raise ShapeError(f"{len(sigmas)} frozen scales for {len(net.layers)} layers")

    pre, post, weights, scales = [], [], [], []
    h = x
    for i, layer in enumerate(net.layers):
        if sigmas is not None and layer.spectral_norm:
            sigma = float(sigmas[i])
            w = layer.weights / sigma if sigma != 0.0 else layer.weights
        else:
            w, sigma = _effective_weight(layer)
        z = h @ w.T + layer.bias
        h = _activate(layer.activation, z, layer.alpha)
        pre.append(z)
        post.append(h)
        weights.append(w)
        scales.append(sigma)
    return ForwardTrace(
        inputs=x, pre_activations=pre, activations=post, weights=weights, sigmas=scales
    )


def output_grad_to_net(net: Network, trace: ForwardTrace, grad_output: Matrix) -> Matrix:
    """Chain a gradient at the network output through the last activation."""
    last = net.layers[-1]
    if grad_output.shape != trace.output.shape:
        raise ShapeError(f"output gradient {grad_output.shape} vs output {trace.output.shape}")
    return grad_output * _activation_grad(
        last.activation, trace.final_net, trace.output, last.alpha
    )


def backward(net: Network, trace: ForwardTrace, grad_final_net: Matrix) -> Gradients:
    """Exact gradients given the loss gradient at the final pre-activation.

    Spectrally normalised layers treat σ(W) as a constant: the weight
    gradient is the effective-weight gradient divided by σ.
    """
    if len(trace.pre_activations) != len(net.layers):
        raise ShapeError("trace was not produced by this network")
    delta = as_matrix(grad_final_net, name="final-net gradient")
    if delta.shape != trace.final_net.shape:
        raise ShapeError(f"gradient {delta.shape} vs final net {trace.final_net.shape}")

    grads: list[LayerGrad] = []
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        x_in = trace.activations[i - 1] if i > 0 else trace.inputs
        sigma = trace.sigmas[i]
        d_weight = delta.T @ x_in
        if layer.spectral_norm and sigma != 0.0:
            d_weight = d_weight / sigma
        grads.append(LayerGrad(d_weight, delta.sum(axis=0)))
        grad_in = delta @ trace.weights[i]
        if i > 0:
            below = net.layers[i - 1]
            delta = grad_in * _activation_grad(
                below.activation,
                trace.pre_activations[i - 1],
                trace.activations[i - 1],
                below.alpha,
            )
        else:
            delta = grad_in
    grads.reverse()
    for g in grads:
        ensure_finite(g.weights, "weight gradient")
    return Gradients(grads, delta)


def init_network(
    input_dim: int,
    spec: Sequence[LayerSpec],
    rng: Rng,
    scheme: InitScheme = "normal",
    *,
    stdev: float = DEFAULT_INIT_STDEV,
) -> Network:
    """Build a network; biases start at zero.

    ``normal`` draws weights from N(0, stdev²), ``scaled_normal`` from
    N(0, 1/fan_in), ``zeros`` sets them to zero.  Normalised layers draw
    their power-iteration vector after their weights.
    """
    if not spec:
        raise ParameterError("network spec is empty")
    if input_dim < 1 or any(s.size < 1 for s in spec):
        raise ParameterError("layer sizes must be positive")
    if stdev < 0:
        raise ParameterError("init stdev must be non-negative")

    layers = []
    fan_in = input_dim
    for s in spec:
        shape = (s.size, fan_in)
        match scheme:
            case "zeros":
                w = np.zeros(shape)
            case "normal":
                w = stdev * rng.normal(s.size * fan_in).reshape(shape)
            case "scaled_normal":
                w = rng.normal(s.size * fan_in).reshape(shape) / np.sqrt(fan_in)
            case _:
                raise ParameterError(f"unknown init scheme {scheme!r}")
        u = None
        if s.spectral_norm:
            u, norm = _normalize(rng.normal(s.size))
            if norm == 0.0:
                u = np.full(s.size, 1.0 / np.sqrt(s.size))
        layers.append(
            DenseLayer(
                weights=w,
                bias=np.zeros(s.size),
                activation=s.activation,
                alpha=s.alpha,
                spectral_norm=s.spectral_norm,
                u=u,
            )
        )
        fan_in = s.size
    _LOGGER.debug(
        "initialised network %s with scheme %s",
        [input_dim, *(s.size for s in spec)],
        scheme,
    )
    return Network(layers=layers)
