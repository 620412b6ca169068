import csv
import dataclasses
import math
from collections.abc import Iterator
from pathlib import Path
from typing import Literal, Self

import numpy as np
import numpy.typing as npt

from ._error import FormatError, ParameterError, ShapeError

type Matrix = npt.NDArray[np.float64]
type Labels = npt.NDArray[np.int64]

LossVariant = Literal["minimax", "non_saturating"]
NoiseKind = Literal["gaussian", "uniform"]


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class MixtureSpec:
    centers: Matrix
    sigma: float
    weights: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.centers.ndim != 2 or self.centers.shape[0] < 1:
            raise ParameterError("mixture needs at least one center")
        if not self.sigma > 0:
            raise ParameterError(f"mixture sigma must be positive, got {self.sigma}")
        if self.weights.shape != (self.centers.shape[0],):
            raise ShapeError(
                f"{self.weights.shape[0]} weights for {self.centers.shape[0]} centers"
            )
        if np.any(self.weights < 0) or abs(float(self.weights.sum()) - 1.0) > 1e-12:
            raise ParameterError("mixture weights must be probabilities summing to 1")

    @property
    def n_modes(self) -> int:
        return self.centers.shape[0]

    @property
    def dim(self) -> int:
        return self.centers.shape[1]


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class Dataset:
    samples: Matrix
    labels: Labels | None = None

    def __post_init__(self) -> None:
        if self.samples.ndim != 2:
            raise ShapeError("dataset samples must be a 2-D matrix")
        if self.labels is not None and self.labels.shape != (self.samples.shape[0],):
            raise ShapeError(
                f"{self.labels.shape[0]} labels for {self.samples.shape[0]} samples"
            )

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def n_classes(self) -> int:
        if self.labels is None or len(self.labels) == 0:
            return 0
        return int(self.labels.max()) + 1


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class LossReport:
    """Scalar objective value with its gradient at the final pre-activations.

    Two-input objectives (the discriminator losses) report the gradient with
    respect to the real batch in ``grad_final_net`` and the one with respect
    to the generated batch in ``grad_fake_net``.
    """

    value: float
    grad_final_net: Matrix
    grad_fake_net: Matrix | None = None
    components: dict[str, float] = dataclasses.field(default_factory=dict)


@dataclasses.dataclass(frozen=True, kw_only=True)
class CSchedule:
    kind: Literal["constant", "linear"]
    start: float
    end: float
    total_steps: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < 0:
            raise ParameterError("C values must be non-negative")
        if self.total_steps < 1:
            raise ParameterError("schedule needs at least one step")
        if self.kind == "constant" and self.start != self.end:
            raise ParameterError("constant schedule must have start == end")

    @classmethod
    def constant(cls, c: float, total_steps: int) -> Self:
        return cls(kind="constant", start=c, end=c, total_steps=total_steps)

    @classmethod
    def linear(cls, c_start: float, c_end: float, total_steps: int) -> Self:
        return cls(kind="linear", start=c_start, end=c_end, total_steps=total_steps)


@dataclasses.dataclass(frozen=True, kw_only=True)
class SgdConfig:
    lr: float

    def __post_init__(self) -> None:
        if not self.lr > 0:
            raise ParameterError(f"learning rate must be positive, got {self.lr}")


@dataclasses.dataclass(frozen=True, kw_only=True)
class AdamConfig:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if not self.lr > 0:
            raise ParameterError(f"learning rate must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError("adam betas must lie in [0, 1)")
        if not self.eps > 0:
            raise ParameterError("adam eps must be positive")


type OptimizerConfig = SgdConfig | AdamConfig


@dataclasses.dataclass(frozen=True, kw_only=True)
class TrainConfig:
    steps: int
    batch_size: int = 64
    noise_dim: int = 16
    noise_kind: NoiseKind = "gaussian"
    optimizer: OptimizerConfig = dataclasses.field(default_factory=AdamConfig)
    d_steps_per_g_step: int = 1
    loss_variant: LossVariant = "non_saturating"
    c1_schedule: CSchedule | None = None
    c2_schedule: CSchedule | None = None
    spectral_norm_on_d: bool = False
    power_iterations: int = 1
    generator_penalty: float = 0.0
    weight_decay: float = 0.0
    log_stride: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ParameterError("steps must be non-negative")
        if self.batch_size < 1 or self.noise_dim < 1:
            raise ParameterError("batch_size and noise_dim must be positive")
        if self.d_steps_per_g_step < 1:
            raise ParameterError("d_steps_per_g_step must be at least 1")
        if self.power_iterations < 1 or self.log_stride < 1:
            raise ParameterError("power_iterations and log_stride must be positive")
        if self.generator_penalty < 0 or self.weight_decay < 0:
            raise ParameterError("penalty weights must be non-negative")
        for schedule in (self.c1_schedule, self.c2_schedule):
            if schedule is not None and self.steps and schedule.total_steps != self.steps:
                raise ParameterError(
                    f"schedule spans {schedule.total_steps} steps, run has {self.steps}"
                )

    def c1(self) -> CSchedule:
        return self.c1_schedule or CSchedule.constant(0.0, max(self.steps, 1))

    def c2(self) -> CSchedule:
        return self.c2_schedule or CSchedule.constant(0.0, max(self.steps, 1))


RUN_LOG_COLUMNS = (
    "step",
    "d_loss",
    "g_loss",
    "lcnn_real",
    "lcnn_fake",
    "c1",
    "c2",
    "mean_abs_real",
    "mean_abs_fake",
    "loss_gap",
)


@dataclasses.dataclass(frozen=True, kw_only=True)
class RunRecord:
    step: int
    d_loss: float
    g_loss: float
    lcnn_real: float
    lcnn_fake: float
    c1: float
    c2: float
    mean_abs_final_net_real: float
    mean_abs_final_net_fake: float

    @property
    def loss_gap(self) -> float:
        return abs(self.d_loss - self.g_loss)

    def as_row(self) -> list[str]:
        values = (
            self.d_loss,
            self.g_loss,
            self.lcnn_real,
            self.lcnn_fake,
            self.c1,
            self.c2,
            self.mean_abs_final_net_real,
            self.mean_abs_final_net_fake,
            self.loss_gap,
        )
        return [str(self.step), *(repr(float(v)) for v in values)]

    @classmethod
    def from_row(cls, row: dict[str, str]) -> Self:
        return cls(
            step=int(row["step"]),
            d_loss=float(row["d_loss"]),
            g_loss=float(row["g_loss"]),
            lcnn_real=float(row["lcnn_real"]),
            lcnn_fake=float(row["lcnn_fake"]),
            c1=float(row["c1"]),
            c2=float(row["c2"]),
            mean_abs_final_net_real=float(row["mean_abs_real"]),
            mean_abs_final_net_fake=float(row["mean_abs_fake"]),
        )


@dataclasses.dataclass(kw_only=True)
class RunLog:
    records: list[RunRecord] = dataclasses.field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[RunRecord]:
        return iter(self.records)

    def append(self, record: RunRecord) -> None:
        if self.records and record.step <= self.records[-1].step:
            raise ParameterError(
                f"run log steps must increase ({record.step} after {self.records[-1].step})"
            )
        self.records.append(record)

    def extend(self, other: "RunLog") -> None:
        for record in other:
            self.append(record)

    def column(self, name: str) -> npt.NDArray[np.float64]:
        return np.array([getattr(r, name) for r in self.records], dtype=np.float64)

    def tail_mean(self, name: str, fraction: float = 0.1) -> float:
        """Mean of a column over the last ``fraction`` of logged records."""
        if not self.records:
            raise ParameterError("run log is empty")
        values = self.column(name)
        count = max(1, math.ceil(len(values) * fraction))
        return float(values[-count:].mean())

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(RUN_LOG_COLUMNS)
            for record in self.records:
                writer.writerow(record.as_row())

    @classmethod
    def from_csv(cls, path: str | Path) -> Self:
        log = cls()
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if tuple(reader.fieldnames or ()) != RUN_LOG_COLUMNS:
                err = FormatError(f"unexpected run log columns in {path}")
                err.path = str(path)
                raise err
            for row in reader:
                log.append(RunRecord.from_row(row))
        return log


@dataclasses.dataclass(frozen=True, kw_only=True)
class CoverageReport:
    covered_modes: int
    per_mode_counts: tuple[int, ...]
    high_quality_fraction: float
    n_samples: int

    @property
    def n_modes(self) -> int:
        return len(self.per_mode_counts)


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class EnergySpectrum:
    eigenvalues: npt.NDArray[np.float64]
    cumulative_energy: npt.NDArray[np.float64]


@dataclasses.dataclass(frozen=True, kw_only=True)
class VcBoundReport:
    """Computable VC-dimension surrogates for a single-output discriminator.

    ``margin_bound`` is ``1 + min(4R²/d_min², n)`` and ``activation_bound``
    is ``1 + min(C·Σ net², n)``.
    """

    r_estimate: float
    d_min: float
    n_penultimate: int
    margin_bound: float
    activation_bound: float
    sum_sq_net: float
    degenerate_margin: bool = False


@dataclasses.dataclass(frozen=True, kw_only=True)
class ProbeConfig:
    steps: int = 500
    batch_size: int = 64
    lr: float = 5e-3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 0 or self.batch_size < 1:
            raise ParameterError("probe steps must be >= 0 and batch_size positive")
        if not self.lr > 0:
            raise ParameterError("probe learning rate must be positive")
