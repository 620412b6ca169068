"""Experiment configuration: pydantic models and their text form.

Grammar::

    document := line*
    line     := blank | comment | section | pair
    comment  := '#' ...            (also after whitespace at the end of a line)
    section  := '[' name ']'       (prefixes following keys with 'name.')
    pair     := key '=' value      (key may be dotted: 'c1.kind = linear')

Unknown keys, malformed lines, duplicate keys, values of the wrong type and
missing required keys raise distinct ``ConfigError`` subclasses carrying the
offending line number (0 when no line is involved).
"""

import enum
import re
from pathlib import Path
from typing import Any, Literal, Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from lcnn_gan_lab import (
    LEARNING_RATE_PRESETS,
    Activation,
    AdamConfig,
    CSchedule,
    LayerSpec,
    LcnnGanException,
    SgdConfig,
    TrainConfig,
)

_COMMENT = re.compile(r"(^|\s)#.*$")
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)?$")


class ConfigError(LcnnGanException):
    def __init__(self, message: str, *, line: int = 0) -> None:
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class ConfigSyntaxError(ConfigError): ...


class UnknownKeyError(ConfigError): ...


class ConfigTypeError(ConfigError): ...


class MissingKeyError(ConfigError): ...


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class OptimizerSection(_Section):
    kind: Literal["adam", "sgd"] = "adam"
    # when set, overrides lr with the named preset
    preset: Literal["plain", "spectral"] | None = None
    lr: float = Field(2e-4, gt=0)
    beta1: float = Field(0.5, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    eps: float = Field(1e-8, gt=0)

    @property
    def learning_rate(self) -> float:
        return LEARNING_RATE_PRESETS[self.preset] if self.preset else self.lr


class ScheduleSection(_Section):
    kind: Literal["constant", "linear"] = "linear"
    value: float = Field(0.0, ge=0)
    start: float = Field(0.01, ge=0)
    end: float = Field(0.1, ge=0)

    def to_schedule(self, total_steps: int) -> CSchedule:
        if self.kind == "constant":
            return CSchedule.constant(self.value, total_steps)
        return CSchedule.linear(self.start, self.end, total_steps)


class DataSection(_Section):
    kind: Literal["ring", "grid", "idx"] = "ring"
    modes: int = Field(8, ge=1)
    radius: float = Field(2.0, ge=0)
    sigma: float = Field(0.02, gt=0)
    grid_size: int = Field(5, ge=1)
    spacing: float = Field(2.0, ge=0)
    images: str | None = None
    labels: str | None = None
    # use only the first ``limit`` IDX samples
    limit: int | None = Field(None, ge=2)


class GeneratorSection(_Section):
    hidden: tuple[int, ...] = (128, 128)
    activation: Activation = Activation.RELU
    alpha: float = Field(0.2, ge=0)
    # auto: tanh for image data, linear for mixtures
    output_activation: Literal["auto", "linear", "tanh"] = "auto"
    init: Literal["normal", "scaled_normal", "zeros"] = "normal"
    init_stdev: float = Field(0.02, ge=0)

    @field_validator("hidden", mode="before")
    @classmethod
    def split_sizes(cls, value: Any) -> Any:
        if isinstance(value, str):
            return tuple(p.strip() for p in value.split(",") if p.strip())
        return value

    @field_validator("hidden")
    @classmethod
    def check_sizes(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(v < 1 for v in value):
            raise ValueError("layer sizes must be positive")
        return value


class DiscriminatorSection(GeneratorSection):
    activation: Activation = Activation.LEAKY_RELU
    output_activation: Literal["auto", "linear", "tanh"] = "linear"


class DiagnosticsSection(_Section):
    coverage: bool = True
    pca: bool = True
    score: bool = True
    vc_bound: bool = True
    stride: int = Field(1000, ge=1)
    samples: int = Field(2000, ge=10)
    stdev_radius: float = Field(3.0, gt=0)
    energy_target: float = Field(0.83, gt=0, le=1)
    score_splits: int = Field(10, ge=1)
    probe_steps: int = Field(500, ge=0)


class OutputSection(_Section):
    dir: str = "runs/lcnn-gan"
    # 0 emits only the final grid
    grid_every: int = Field(0, ge=0)
    grid_rows: int = Field(8, ge=1)
    grid_cols: int = Field(8, ge=1)
    image_height: int | None = Field(None, ge=1)
    image_width: int | None = Field(None, ge=1)
    checkpoint_every: int = Field(0, ge=0)


class ExperimentConfig(_Section):
    seed: int = Field(0, ge=0, lt=2**64)
    steps: int = Field(20000, ge=0)
    batch_size: int = Field(64, ge=1)
    noise_dim: int = Field(16, ge=1)
    noise_kind: Literal["gaussian", "uniform"] = "gaussian"
    objective: Literal["lcnn", "baseline"] = "lcnn"
    loss_variant: Literal["minimax", "non_saturating"] = "non_saturating"
    d_steps_per_g_step: int = Field(1, ge=1)
    power_iterations: int = Field(1, ge=1)
    spectral_norm_on_d: bool = False
    generator_penalty: float = Field(0.0, ge=0)
    weight_decay: float = Field(0.0, ge=0)
    log_stride: int = Field(1, ge=1)

    optimizer: OptimizerSection = OptimizerSection()
    c1: ScheduleSection = ScheduleSection()
    c2: ScheduleSection = ScheduleSection()
    data: DataSection = DataSection()
    generator: GeneratorSection = GeneratorSection()
    discriminator: DiscriminatorSection = DiscriminatorSection()
    diagnostics: DiagnosticsSection = DiagnosticsSection()
    output: OutputSection = OutputSection()

    @property
    def image_shape(self) -> tuple[int, int] | None:
        if self.output.image_height and self.output.image_width:
            return self.output.image_height, self.output.image_width
        return None

    def with_seed(self, seed: int) -> Self:
        return self.model_copy(update={"seed": seed})

    def to_train_config(self) -> TrainConfig:
        if self.optimizer.kind == "adam":
            optimizer = AdamConfig(
                lr=self.optimizer.learning_rate,
                beta1=self.optimizer.beta1,
                beta2=self.optimizer.beta2,
                eps=self.optimizer.eps,
            )
        else:
            optimizer = SgdConfig(lr=self.optimizer.learning_rate)
        total = max(self.steps, 1)
        return TrainConfig(
            steps=self.steps,
            batch_size=self.batch_size,
            noise_dim=self.noise_dim,
            noise_kind=self.noise_kind,
            optimizer=optimizer,
            d_steps_per_g_step=self.d_steps_per_g_step,
            loss_variant=self.loss_variant,
            c1_schedule=self.c1.to_schedule(total),
            c2_schedule=self.c2.to_schedule(total),
            spectral_norm_on_d=self.spectral_norm_on_d,
            power_iterations=self.power_iterations,
            generator_penalty=self.generator_penalty,
            weight_decay=self.weight_decay,
            log_stride=self.log_stride,
            seed=self.seed,
        )

    def generator_spec(self, data_dim: int) -> list[LayerSpec]:
        g = self.generator
        out = g.output_activation
        if out == "auto":
            out = "tanh" if self.data.kind == "idx" else "linear"
        hidden = [LayerSpec(size=h, activation=g.activation, alpha=g.alpha) for h in g.hidden]
        return [*hidden, LayerSpec(size=data_dim, activation=Activation(out))]

    def discriminator_spec(self) -> list[LayerSpec]:
        d = self.discriminator
        sn = self.spectral_norm_on_d
        hidden = [
            LayerSpec(size=h, activation=d.activation, alpha=d.alpha, spectral_norm=sn)
            for h in d.hidden
        ]
        return [*hidden, LayerSpec(size=1, activation=Activation.LINEAR, spectral_norm=sn)]


_SECTIONS: dict[str, type[_Section]] = {
    name: field.annotation
    for name, field in ExperimentConfig.model_fields.items()
    if isinstance(field.annotation, type) and issubclass(field.annotation, _Section)
}
_ROOT_KEYS = frozenset(ExperimentConfig.model_fields) - frozenset(_SECTIONS)


def _is_known(key: str) -> bool:
    head, _, tail = key.partition(".")
    if not tail:
        return head in _ROOT_KEYS
    return head in _SECTIONS and tail in _SECTIONS[head].model_fields


def parse_config(text: str) -> ExperimentConfig:
    raw: dict[str, tuple[str, int]] = {}
    section: str | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = _COMMENT.sub("", line).strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigSyntaxError(f"malformed section header {stripped!r}", line=lineno)
            name = stripped[1:-1].strip()
            if name not in _SECTIONS:
                raise UnknownKeyError(f"unknown section [{name}]", line=lineno)
            section = name
            continue
        key, sep, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not _KEY.match(key):
            raise ConfigSyntaxError(f"expected 'key = value', got {stripped!r}", line=lineno)
        full = f"{section}.{key}" if section and "." not in key else key
        if not _is_known(full):
            raise UnknownKeyError(f"unknown key {full!r}", line=lineno)
        if full in raw:
            raise ConfigSyntaxError(
                f"duplicate key {full!r} (first set on line {raw[full][1]})", line=lineno
            )
        raw[full] = (value, lineno)

    nested: dict[str, Any] = {}
    for full, (value, _) in raw.items():
        head, _, tail = full.partition(".")
        if tail:
            nested.setdefault(head, {})[tail] = value
        else:
            nested[head] = value
    try:
        config = ExperimentConfig.model_validate(nested)
    except ValidationError as e:
        err = e.errors()[0]
        key = ".".join(p for p in err["loc"] if isinstance(p, str))
        line = raw.get(key, ("", 0))[1]
        if err["type"] == "missing":
            raise MissingKeyError(f"missing required key {key!r}", line=line) from None
        raise ConfigTypeError(f"invalid value for {key!r}: {err['msg']}", line=line) from None

    if config.data.kind == "idx":
        for key in ("data.images", "data.labels"):
            if key not in raw:
                line = raw.get("data.kind", ("", 0))[1]
                raise MissingKeyError(f"data.kind = idx requires {key!r}", line=line)
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _format(value: Any) -> str:
    match value:
        case bool():
            return "true" if value else "false"
        case enum.Enum():
            return str(value.value)
        case float():
            return repr(value)
        case tuple():
            return ",".join(str(v) for v in value)
        case _:
            return str(value)


def serialize(config: ExperimentConfig) -> str:
    lines = ["# lcnn-gan-lab experiment"]
    for name in ExperimentConfig.model_fields:
        if name in _ROOT_KEYS:
            lines.append(f"{name} = {_format(getattr(config, name))}")
    for name in _SECTIONS:
        lines.extend(("", f"[{name}]"))
        section = getattr(config, name)
        for key in type(section).model_fields:
            value = getattr(section, key)
            if value is not None:
                lines.append(f"{key} = {_format(value)}")
    return "\n".join(lines) + "\n"


def read_seed_list(path: str | Path) -> list[int]:
    """Seeds for a sweep: one integer per line, ``#`` comments allowed."""
    seeds: list[int] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        stripped = _COMMENT.sub("", line).strip()
        if not stripped:
            continue
        try:
            seed = int(stripped)
        except ValueError:
            raise ConfigTypeError(f"not a seed: {stripped!r}", line=lineno) from None
        if not 0 <= seed < 2**64:
            raise ConfigTypeError(f"seed out of range: {seed}", line=lineno)
        seeds.append(seed)
    if not seeds:
        raise MissingKeyError("seed list is empty")
    return seeds
