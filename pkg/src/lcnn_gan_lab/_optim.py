import dataclasses
from collections.abc import Sequence
from typing import Self

import numpy as np
import numpy.typing as npt

from ._error import ShapeError
from ._types import AdamConfig, OptimizerConfig, SgdConfig

type Array = npt.NDArray[np.float64]

LEARNING_RATE_PRESETS = {
    # unnormalised discriminator
    "plain": 5e-4,
    # spectrally normalised discriminator
    "spectral": 2e-4,
}


@dataclasses.dataclass(kw_only=True, eq=False)
class AdamState:
    m: list[Array]
    v: list[Array]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[Array]) -> Self:
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )

    def copy(self) -> "AdamState":
        return AdamState(m=[a.copy() for a in self.m], v=[a.copy() for a in self.v], t=self.t)

    def same_as(self, other: "AdamState") -> bool:
        return (
            self.t == other.t
            and len(self.m) == len(other.m)
            and all(np.array_equal(a, b) for a, b in zip(self.m, other.m))
            and all(np.array_equal(a, b) for a, b in zip(self.v, other.v))
        )


def _check_shapes(params: Sequence[Array], grads: Sequence[Array]) -> None:
    if len(params) != len(grads):
        raise ShapeError(f"{len(grads)} gradients for {len(params)} parameters")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"parameter {i} has shape {p.shape}, gradient {g.shape}")


def adam_step(
    params: Sequence[Array],
    grads: Sequence[Array],
    state: AdamState,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float,
) -> tuple[Sequence[Array], AdamState]:
    """Bias-corrected Adam update; ``params`` and ``state`` are updated in place."""
    _check_shapes(params, grads)
    _check_shapes(params, state.m)
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    step_size = lr / bc1
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= step_size * m / (np.sqrt(v / bc2) + eps)
    return params, state


def sgd_step(params: Sequence[Array], grads: Sequence[Array], lr: float) -> Sequence[Array]:
    _check_shapes(params, grads)
    for p, g in zip(params, grads):
        p -= lr * g
    return params


class Optimizer:
    """Applies the configured update rule to one network's parameter list."""

    def __init__(self, config: OptimizerConfig, params: Sequence[Array]) -> None:
        self.config = config
        self.state = AdamState.zeros_like(params) if isinstance(config, AdamConfig) else None

    @property
    def kind(self) -> str:
        return "adam" if isinstance(self.config, AdamConfig) else "sgd"

    def step(self, params: Sequence[Array], grads: Sequence[Array]) -> None:
        match self.config:
            case AdamConfig(lr=lr, beta1=beta1, beta2=beta2, eps=eps):
                assert self.state is not None
                adam_step(params, grads, self.state, lr, beta1, beta2, eps)
            case SgdConfig(lr=lr):
                sgd_step(params, grads, lr)
