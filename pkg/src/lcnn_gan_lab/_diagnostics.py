"""Mode-collapse measurements.

The inception-style score here is computed from a small probe classifier
trained on the benchmark's own labels, not from an Inception network, so
scores are only comparable between runs of this package.
"""

import logging
import math
from collections.abc import Sequence

import numpy as np

from ._error import ParameterError, ShapeError, TrainingAbortedError
from ._losses import empirical_error
from ._nn import (
    Activation,
    ForwardTrace,
    LayerSpec,
    Network,
    backward,
    forward,
    init_network,
)
from ._numerics import Rng, as_matrix, sym_eig
from ._optim import AdamState, adam_step
from ._types import (
    CoverageReport,
    Dataset,
    EnergySpectrum,
    Matrix,
    MixtureSpec,
    ProbeConfig,
    RunLog,
    VcBoundReport,
)

_LOGGER = logging.getLogger(__package__)

_PROB_TOL = 1e-9
_ENERGY_TOL = 1e-9

DEFAULT_PROBE_ARCH = (LayerSpec(size=64, activation=Activation.RELU),)


def mode_coverage(samples: Matrix, spec: MixtureSpec, stdev_radius: float = 3.0) -> CoverageReport:
    """Assign samples to their nearest center and count well-covered modes.

    A sample is high quality within ``stdev_radius·sigma`` of its center; a
    mode is covered once it holds at least ``max(1, n/(5k))`` of them.
    """
    x = as_matrix(samples, name="samples")
    if x.shape[1] != spec.dim:
        raise ShapeError(f"samples have {x.shape[1]} dimensions, mixture has {spec.dim}")
    n, k = x.shape[0], spec.n_modes
    if n == 0:
        return CoverageReport(
            covered_modes=0, per_mode_counts=(0,) * k, high_quality_fraction=0.0, n_samples=0
        )
    dist = np.linalg.norm(x[:, None, :] - spec.centers[None, :, :], axis=2)
    nearest = np.argmin(dist, axis=1)
    good = dist[np.arange(n), nearest] <= stdev_radius * spec.sigma
    counts = np.bincount(nearest[good], minlength=k)
    threshold = max(1.0, n / (5.0 * k))
    return CoverageReport(
        covered_modes=int(np.sum(counts >= threshold)),
        per_mode_counts=tuple(int(c) for c in counts),
        high_quality_fraction=float(good.mean()),
        n_samples=n,
    )


def pca_energy_modes(
    data: Matrix, energy_target: float = 0.83
) -> tuple[EnergySpectrum, int]:
    """Covariance spectrum of ``data`` and the components holding ``energy_target``.

    Energy is the fraction of total variance: cumulative eigenvalue sums of
    the mean-centred sample covariance over their total.
    """
    x = as_matrix(data, name="data")
    if x.shape[0] < 2:
        raise ParameterError("energy spectrum needs at least two samples")
    if not 0.0 < energy_target <= 1.0:
        raise ParameterError(f"energy target must lie in (0, 1], got {energy_target}")
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (x.shape[0] - 1)
    eig = sym_eig(0.5 * (cov + cov.T))
    values = np.maximum(eig.eigenvalues, 0.0)
    cumulative = np.cumsum(values)
    total = cumulative[-1]
    if total == 0.0:
        _LOGGER.warning("zero-variance data; every component holds all energy")
        energy = np.ones_like(values)
    else:
        energy = cumulative / total
    needed = int(np.argmax(energy >= energy_target - _ENERGY_TOL)) + 1
    return EnergySpectrum(eigenvalues=values, cumulative_energy=energy), needed


def _check_probs(probs: Matrix) -> Matrix:
    p = as_matrix(probs, name="probabilities")
    if p.shape[0] == 0 or p.shape[1] == 0:
        raise ParameterError("probability matrix is empty")
    if np.any(~np.isfinite(p)) or np.any(p < 0):
        raise ParameterError("probabilities must be finite and non-negative")
    if np.any(np.abs(p.sum(axis=1) - 1.0) > _PROB_TOL):
        raise ParameterError("probability rows must sum to 1")
    return p


def _split_score(part: Matrix) -> float:
    marginal = part.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(part > 0, part * (np.log(part) - np.log(marginal)), 0.0)
    return math.exp(float(terms.sum(axis=1).mean()))


def inception_style_score(probs: Matrix, splits: int = 10) -> tuple[float, float]:
    """Mean and standard deviation of ``exp(mean KL(p(y|x) ‖ p(y)))`` over splits.

    Rows are split in order into ``splits`` parts of ``n // splits`` rows, the
    last part taking the remainder.
    """
    p = _check_probs(probs)
    n = p.shape[0]
    if not 1 <= splits <= n:
        raise ParameterError(f"cannot split {n} rows into {splits} parts")
    size = n // splits
    scores = [
        _split_score(p[i * size : (i + 1) * size if i < splits - 1 else n])
        for i in range(splits)
    ]
    return float(np.mean(scores)), float(np.std(scores))


def class_probabilities(net: Network, samples: Matrix) -> Matrix:
    logits = forward(net, samples).final_net
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def accuracy(net: Network, data: Dataset) -> float:
    if data.labels is None:
        raise ParameterError("accuracy needs labelled data")
    predicted = np.argmax(forward(net, data.samples).final_net, axis=1)
    return float(np.mean(predicted == data.labels))


def train_probe_classifier(
    data: Dataset,
    arch: Sequence[LayerSpec] = DEFAULT_PROBE_ARCH,
    config: ProbeConfig | None = None,
    *,
    n_classes: int | None = None,
) -> Network:
    """Softmax classifier on ``data`` trained with Adam on cross-entropy.

    ``arch`` lists the hidden layers; a linear output layer with one unit per
    class is appended.
    """
    config = config or ProbeConfig()
    if data.labels is None or len(data) == 0:
        raise ParameterError("probe classifier needs labelled data")
    k = n_classes if n_classes is not None else data.n_classes
    if k < data.n_classes:
        raise ParameterError(f"{k} classes but labels reach {data.n_classes - 1}")
    rng = Rng(config.seed)
    spec = [*arch, LayerSpec(size=k, activation=Activation.LINEAR)]
    net = init_network(data.dim, spec, rng, "scaled_normal")
    params = list(net.parameters())
    state = AdamState.zeros_like(params)
    log = RunLog()
    for step in range(config.steps):
        idx = rng.integers(len(data), config.batch_size)
        trace = forward(net, data.samples[idx])
        report = empirical_error(trace.final_net, data.labels[idx])
        if not math.isfinite(report.value):
            raise TrainingAbortedError(
                f"non-finite probe loss at step {step}", step=step, term="probe loss", log=log
            )
        grads = backward(net, trace, report.grad_final_net).flat()
        adam_step(params, grads, state, config.lr, 0.9, 0.999, 1e-8)
        if step % 100 == 0:
            _LOGGER.debug("probe step %d: cross-entropy %.5f", step, report.value)
    return net


def vc_bound(trace: ForwardTrace, c: float) -> VcBoundReport:
    """VC-dimension surrogates from a single-output discriminator pass.

    R is the largest distance of a penultimate activation from their
    centroid (within a factor 2 of the enclosing-sphere radius); d_min is the
    smallest ``|net|`` in the batch, standing in for a classifier margin.
    """
    if trace.batch_size == 0:
        raise ParameterError("trace holds no samples")
    if trace.final_net.shape[1] != 1:
        raise ShapeError("VC surrogates need a single-output final layer")
    if c < 0:
        raise ParameterError(f"C must be non-negative, got {c}")
    v = trace.penultimate
    net = trace.final_net[:, 0]
    n = v.shape[1]
    r = float(np.max(np.linalg.norm(v - v.mean(axis=0), axis=1)))
    d_min = float(np.min(np.abs(net)))
    sum_sq = float(np.sum(net * net))
    degenerate = d_min == 0.0
    if degenerate:
        _LOGGER.warning("zero margin in batch; margin bound falls back to n=%d", n)
        margin = 1.0 + n
    else:
        margin = 1.0 + min(4.0 * r * r / (d_min * d_min), float(n))
    return VcBoundReport(
        r_estimate=r,
        d_min=d_min,
        n_penultimate=n,
        margin_bound=margin,
        activation_bound=1.0 + min(c * sum_sq, float(n)),
        sum_sq_net=sum_sq,
        degenerate_margin=degenerate,
    )


def probe_score(
    probe: Network, samples: Matrix, splits: int = 10
) -> tuple[float, float]:
    """Inception-style score of ``samples`` under a trained probe classifier."""
    return inception_style_score(class_probabilities(probe, samples), splits)


def components_trace(
    snapshots: Sequence[tuple[int, Matrix]], energy_target: float = 0.83
) -> list[tuple[int, int]]:
    """(step, components needed) for each snapshot of generated samples."""
    return [(step, pca_energy_modes(x, energy_target)[1]) for step, x in snapshots]

