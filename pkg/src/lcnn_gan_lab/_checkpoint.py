"""Plain-text network and training checkpoints.

A network block is::

    network <name>
    input <in_features>
    layers <k>
    layer <out> <in> <activation> <alpha> <spectral_norm 0|1>     (k lines)
    values <count>
    <one decimal value per line>

with values ordered per layer as W (row-major), b, then u for normalised
layers.  Decimals are Python ``repr`` floats, which round-trip exactly.

A training checkpoint is::

    lcnn-gan-checkpoint 1
    step <next step to run>
    rng <seed> <state>
    <network block "generator">
    <network block "discriminator">
    optimizer generator <adam|sgd> <t>
    values <count>            (adam: m then v, per parameter, row-major)
    <values>
    optimizer discriminator <adam|sgd> <t>
    values <count>
    <values>
    end
"""

import dataclasses
import logging
import math
import os
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np

from ._error import CheckpointFormatError, LcnnGanException
from ._nn import Activation, DenseLayer, Network
from ._numerics import Rng
from ._optim import AdamState

_LOGGER = logging.getLogger(__package__)

_MAGIC = "lcnn-gan-checkpoint"
_VERSION = "1"


def _fmt(values: Iterable[float]) -> list[str]:
    return [repr(float(v)) for v in values]


def network_lines(name: str, net: Network) -> list[str]:
    lines = [f"network {name}", f"input {net.in_features}", f"layers {len(net.layers)}"]
    values: list[str] = []
    for layer in net.layers:
        lines.append(
            f"layer {layer.out_features} {layer.in_features} {layer.activation.value} "
            f"{layer.alpha!r} {int(layer.spectral_norm)}"
        )
        values.extend(_fmt(layer.weights.ravel()))
        values.extend(_fmt(layer.bias))
        if layer.spectral_norm:
            assert layer.u is not None
            values.extend(_fmt(layer.u))
    lines.append(f"values {len(values)}")
    lines.extend(values)
    return lines


def _optimizer_lines(name: str, state: AdamState | None) -> list[str]:
    if state is None:
        return [f"optimizer {name} sgd 0", "values 0"]
    values: list[str] = []
    for arrays in (state.m, state.v):
        for a in arrays:
            values.extend(_fmt(a.ravel()))
    return [f"optimizer {name} adam {state.t}", f"values {len(values)}", *values]


class _Reader:
    def __init__(self, text: str, path: str) -> None:
        self._lines = text.split("\n")
        self._pos = 0
        self._path = path

    def error(self, message: str) -> CheckpointFormatError:
        err = CheckpointFormatError(f"{self._path}:{self._pos}: {message}")
        err.path = self._path
        err.line = self._pos
        return err

    def next_line(self) -> str:
        if self._pos >= len(self._lines):
            raise self.error("unexpected end of file")
        line = self._lines[self._pos]
        self._pos += 1
        return line

    def fields(self, keyword: str, count: int) -> list[str]:
        parts = self.next_line().split()
        if not parts or parts[0] != keyword or len(parts) != count + 1:
            raise self.error(f"expected '{keyword}' with {count} field(s)")
        return parts[1:]

    def integer(self, token: str, *, minimum: int = 0) -> int:
        try:
            value = int(token)
        except ValueError:
            raise self.error(f"not an integer: {token!r}") from None
        if value < minimum:
            raise self.error(f"value {value} below {minimum}")
        return value

    def real(self, token: str) -> float:
        try:
            value = float(token)
        except ValueError:
            raise self.error(f"not a number: {token!r}") from None
        if not math.isfinite(value):
            raise self.error(f"non-finite value {token!r}")
        return value

    def values(self, expected: int) -> np.ndarray:
        count = self.integer(self.fields("values", 1)[0])
        if count != expected:
            raise self.error(f"expected {expected} values, header says {count}")
        return np.array([self.real(self.next_line().strip()) for _ in range(count)])

    def at_end(self) -> bool:
        rest = self._lines[self._pos :]
        return all(not line.strip() for line in rest)


def _read_network(reader: _Reader, name: str) -> Network:
    if reader.fields("network", 1)[0] != name:
        raise reader.error(f"expected network '{name}'")
    in_features = reader.integer(reader.fields("input", 1)[0], minimum=1)
    n_layers = reader.integer(reader.fields("layers", 1)[0], minimum=1)
    headers = []
    fan_in = in_features
    for _ in range(n_layers):
        out_s, in_s, act, alpha_s, sn_s = reader.fields("layer", 5)
        out_f = reader.integer(out_s, minimum=1)
        if reader.integer(in_s, minimum=1) != fan_in:
            raise reader.error("layer dimensions do not chain")
        try:
            activation = Activation(act)
        except ValueError:
            raise reader.error(f"unknown activation {act!r}") from None
        if sn_s not in ("0", "1"):
            raise reader.error(f"spectral norm flag must be 0 or 1, got {sn_s!r}")
        headers.append((out_f, fan_in, activation, reader.real(alpha_s), sn_s == "1"))
        fan_in = out_f
    expected = sum(o * i + o + (o if sn else 0) for o, i, _, _, sn in headers)
    values = reader.values(expected)

    layers = []
    offset = 0
    for out_f, in_f, activation, alpha, sn in headers:
        w = values[offset : offset + out_f * in_f].reshape(out_f, in_f)
        offset += out_f * in_f
        b = values[offset : offset + out_f]
        offset += out_f
        u = None
        if sn:
            u = values[offset : offset + out_f]
            offset += out_f
        layers.append(
            DenseLayer(
                weights=w.copy(),
                bias=b.copy(),
                activation=activation,
                alpha=alpha,
                spectral_norm=sn,
                u=None if u is None else u.copy(),
            )
        )
    return Network(layers=layers)


def _read_optimizer(reader: _Reader, name: str, net: Network) -> AdamState | None:
    label, kind, t_s = reader.fields("optimizer", 3)
    if label != name:
        raise reader.error(f"expected optimizer '{name}'")
    t = reader.integer(t_s)
    if kind == "sgd":
        reader.values(0)
        return None
    if kind != "adam":
        raise reader.error(f"unknown optimizer {kind!r}")
    params = list(net.parameters())
    size = sum(p.size for p in params)
    values = reader.values(2 * size)
    arrays = []
    offset = 0
    for _ in range(2):
        for p in params:
            arrays.append(values[offset : offset + p.size].reshape(p.shape).copy())
            offset += p.size
    return AdamState(m=arrays[: len(params)], v=arrays[len(params) :], t=t)


def _write_atomic(path: Path, lines: Sequence[str]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines))
        f.write("\n")
    os.replace(tmp, path)


def save_network(net: Network, path: str | Path) -> None:
    _write_atomic(Path(path), [f"lcnn-gan-network {_VERSION}", *network_lines("net", net)])


def load_network(path: str | Path) -> Network:
    path = Path(path)
    reader = _Reader(path.read_text(encoding="utf-8"), str(path))
    version = reader.fields("lcnn-gan-network", 1)[0]
    if version != _VERSION:
        raise reader.error(f"unsupported network checkpoint version {version!r}")
    net = _read_network(reader, "net")
    if not reader.at_end():
        raise reader.error("trailing content after network")
    return net


@dataclasses.dataclass(kw_only=True, eq=False)
class TrainingCheckpoint:
    generator: Network
    discriminator: Network
    g_optimizer: AdamState | None
    d_optimizer: AdamState | None
    step: int
    rng: Rng


def save_checkpoint(
    path: str | Path,
    *,
    generator: Network,
    discriminator: Network,
    g_optimizer: AdamState | None,
    d_optimizer: AdamState | None,
    step: int,
    rng: Rng,
) -> None:
    lines = [
        f"{_MAGIC} {_VERSION}",
        f"step {step}",
        f"rng {rng.seed} {rng.state}",
        *network_lines("generator", generator),
        *network_lines("discriminator", discriminator),
        *_optimizer_lines("generator", g_optimizer),
        *_optimizer_lines("discriminator", d_optimizer),
        "end",
    ]
    _write_atomic(Path(path), lines)
    _LOGGER.info("wrote checkpoint for step %d to %s", step, path)


def load_checkpoint(path: str | Path) -> TrainingCheckpoint:
    """Parse a training checkpoint; nothing is returned unless the whole file is valid."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError:
        err = CheckpointFormatError(f"{path}: not a text checkpoint")
        err.path = str(path)
        raise err from None
    reader = _Reader(text, str(path))
    if reader.fields(_MAGIC, 1)[0] != _VERSION:
        raise reader.error("unsupported checkpoint version")
    step = reader.integer(reader.fields("step", 1)[0])
    seed_s, state_s = reader.fields("rng", 2)
    try:
        rng = Rng.from_state(reader.integer(seed_s), reader.integer(state_s))
    except LcnnGanException as e:
        raise reader.error(str(e)) from None
    generator = _read_network(reader, "generator")
    discriminator = _read_network(reader, "discriminator")
    if generator.out_features != discriminator.in_features:
        raise reader.error("generator output does not match discriminator input")
    g_state = _read_optimizer(reader, "generator", generator)
    d_state = _read_optimizer(reader, "discriminator", discriminator)
    if reader.next_line().strip() != "end" or not reader.at_end():
        raise reader.error("missing end marker")
    return TrainingCheckpoint(
        generator=generator,
        discriminator=discriminator,
        g_optimizer=g_state,
        d_optimizer=d_state,
        step=step,
        rng=rng,
    )
