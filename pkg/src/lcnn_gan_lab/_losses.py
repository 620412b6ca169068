"""Scalar objectives with their gradients at the final pre-activations.

The LCNN penalty is averaged over the batch (``(1/M)·Σ net²``) rather than
summed, so a given C means the same thing for every batch size.  Multiply C
by the batch size to recover the summed form.
"""

import numpy as np
import numpy.typing as npt

from ._error import ParameterError, ShapeError
from ._numerics import as_matrix
from ._types import LossReport, LossVariant, Matrix


def _softplus(x: Matrix) -> Matrix:
    return np.logaddexp(0.0, x)


def _sigmoid(x: Matrix) -> Matrix:
    return np.exp(-np.logaddexp(0.0, -x))


def _batch(final_net: Matrix, name: str) -> tuple[Matrix, int]:
    m = as_matrix(final_net, name=name)
    if m.shape[0] == 0:
        raise ParameterError(f"{name} batch is empty")
    return m, m.shape[0]


def _single_output(final_net: Matrix, name: str) -> tuple[Matrix, int]:
    m, count = _batch(final_net, name)
    if m.shape[1] != 1:
        raise ShapeError(f"{name} must have one output column, got {m.shape[1]}")
    return m, count


def lcnn_penalty(final_net: Matrix) -> LossReport:
    net, count = _batch(final_net, "final net")
    value = float(np.sum(net * net)) / count
    return LossReport(
        value=value, grad_final_net=2.0 * net / count, components={"lcnn": value}
    )


def empirical_error(final_net: Matrix, labels: npt.ArrayLike) -> LossReport:
    """Mean softmax cross-entropy of class ``labels`` under logits ``final_net``."""
    net, count = _batch(final_net, "final net")
    y = np.asarray(labels, dtype=np.int64)
    if y.shape != (count,):
        raise ShapeError(f"{y.shape[0] if y.ndim else 0} labels for {count} samples")
    if np.any(y < 0) or np.any(y >= net.shape[1]):
        raise ParameterError(f"labels must lie in 0..{net.shape[1] - 1}")
    shifted = net - net.max(axis=1, keepdims=True)
    log_z = np.log(np.sum(np.exp(shifted), axis=1, keepdims=True))
    log_softmax = shifted - log_z
    rows = np.arange(count)
    value = float(-np.sum(log_softmax[rows, y])) / count
    grad = np.exp(log_softmax)
    grad[rows, y] -= 1.0
    return LossReport(value=value, grad_final_net=grad / count, components={"ce": value})


def gan_discriminator_loss(d_real: Matrix, d_fake: Matrix) -> LossReport:
    """``-mean log σ(real) - mean log(1 - σ(fake))`` in softplus form."""
    real, m_real = _single_output(d_real, "real logits")
    fake, m_fake = _single_output(d_fake, "fake logits")
    real_term = float(np.sum(_softplus(-real))) / m_real
    fake_term = float(np.sum(_softplus(fake))) / m_fake
    value = real_term + fake_term
    return LossReport(
        value=value,
        grad_final_net=(_sigmoid(real) - 1.0) / m_real,
        grad_fake_net=_sigmoid(fake) / m_fake,
        components={"bce": value, "bce_real": real_term, "bce_fake": fake_term},
    )


def gan_generator_loss(
    d_fake: Matrix, variant: LossVariant = "non_saturating"
) -> LossReport:
    fake, count = _single_output(d_fake, "fake logits")
    match variant:
        case "minimax":
            value = -float(np.sum(_softplus(fake))) / count
            grad = -_sigmoid(fake) / count
        case "non_saturating":
            value = float(np.sum(_softplus(-fake))) / count
            grad = (_sigmoid(fake) - 1.0) / count
        case _:
            raise ParameterError(f"unknown generator loss variant {variant!r}")
    return LossReport(value=value, grad_final_net=grad, components={variant: value})


def lcnn_gan_discriminator_objective(
    d_real: Matrix, d_fake: Matrix, c1: float, c2: float
) -> LossReport:
    """Discriminator loss plus ``c1·L_C(real) + c2·L_C(fake)``.

    Terms with a zero weight are not added, so ``c1 = c2 = 0`` returns the
    plain discriminator loss bit for bit.
    """
    if c1 < 0 or c2 < 0:
        raise ParameterError(f"LCNN weights must be non-negative, got c1={c1}, c2={c2}")
    base = gan_discriminator_loss(d_real, d_fake)
    pen_real = lcnn_penalty(d_real)
    pen_fake = lcnn_penalty(d_fake)
    assert base.grad_fake_net is not None

    value = base.value
    grad_real = base.grad_final_net
    grad_fake = base.grad_fake_net
    if c1 > 0:
        value = value + c1 * pen_real.value
        grad_real = grad_real + c1 * pen_real.grad_final_net
    if c2 > 0:
        value = value + c2 * pen_fake.value
        grad_fake = grad_fake + c2 * pen_fake.grad_final_net
    return LossReport(
        value=value,
        grad_final_net=grad_real,
        grad_fake_net=grad_fake,
        components={
            "bce": base.value,
            "lcnn_real": pen_real.value,
            "lcnn_fake": pen_fake.value,
            "c1": c1,
            "c2": c2,
        },
    )
