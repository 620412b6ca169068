import logging
import math
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._checkpoint import TrainingCheckpoint, load_checkpoint, save_checkpoint
from ._data import noise_batch, sample_mixture
from ._error import NumericalError, ParameterError, ShapeError, TrainingAbortedError
from ._losses import (
    gan_discriminator_loss,
    gan_generator_loss,
    lcnn_gan_discriminator_objective,
    lcnn_penalty,
)
from ._nn import Network, backward, forward, output_grad_to_net, power_iterate
from ._numerics import Rng
from ._optim import Optimizer
from ._types import CSchedule, Dataset, Matrix, MixtureSpec, RunLog, RunRecord, TrainConfig

_LOGGER = logging.getLogger(__package__)


def schedule_value(s: CSchedule, step: int) -> float:
    if not 0 <= step < s.total_steps:
        raise ParameterError(f"step {step} outside schedule of {s.total_steps} steps")
    if s.kind == "constant" or s.total_steps == 1:
        return s.start
    f = step / (s.total_steps - 1)
    return s.start * (1.0 - f) + s.end * f


class TrainResult(NamedTuple):
    generator: Network
    discriminator: Network
    log: RunLog


def _all_finite(net: Network) -> bool:
    return all(bool(np.all(np.isfinite(p))) for p in net.parameters())


class Trainer:
    """Alternating discriminator/generator updates with resumable state.

    Each step draws, per discriminator update, a real batch then a noise
    batch from one generator stream, then a noise batch for the generator
    update; runs are therefore fully determined by the seed.
    """

    def __init__(
        self,
        config: TrainConfig,
        data: Dataset | MixtureSpec,
        generator: Network,
        discriminator: Network,
        *,
        lcnn: bool = True,
        rng: Rng | None = None,
        step: int = 0,
    ) -> None:
        if generator.out_features != data.dim:
            raise ShapeError(
                f"generator emits {generator.out_features} values, data has {data.dim}"
            )
        if discriminator.in_features != generator.out_features:
            raise ShapeError("discriminator input does not match generator output")
        if discriminator.out_features != 1:
            raise ShapeError("discriminator must have a single output")
        if generator.in_features != config.noise_dim:
            raise ShapeError(
                f"generator takes {generator.in_features} inputs, noise_dim is {config.noise_dim}"
            )
        if config.spectral_norm_on_d and not discriminator.has_spectral_norm:
            raise ParameterError("spectral_norm_on_d set but no discriminator layer is normalised")
        if isinstance(data, Dataset) and len(data) == 0:
            raise ParameterError("training dataset is empty")

        self.config = config
        self.data = data
        self.generator = generator
        self.discriminator = discriminator
        self.lcnn = lcnn
        self.rng = rng if rng is not None else Rng(config.seed)
        self.step = step
        self.g_optimizer = Optimizer(config.optimizer, list(generator.parameters()))
        self.d_optimizer = Optimizer(config.optimizer, list(discriminator.parameters()))
        self._c1 = config.c1()
        self._c2 = config.c2()

    @classmethod
    def from_checkpoint(
        cls,
        config: TrainConfig,
        data: Dataset | MixtureSpec,
        checkpoint: TrainingCheckpoint | str | Path,
        *,
        lcnn: bool = True,
    ) -> "Trainer":
        if not isinstance(checkpoint, TrainingCheckpoint):
            checkpoint = load_checkpoint(checkpoint)
        trainer = cls(
            config,
            data,
            checkpoint.generator,
            checkpoint.discriminator,
            lcnn=lcnn,
            rng=checkpoint.rng,
            step=checkpoint.step,
        )
        for optimizer, state in (
            (trainer.g_optimizer, checkpoint.g_optimizer),
            (trainer.d_optimizer, checkpoint.d_optimizer),
        ):
            if (optimizer.state is None) != (state is None):
                raise ParameterError("checkpoint optimizer does not match the configuration")
            optimizer.state = state
        return trainer

    def checkpoint(self) -> TrainingCheckpoint:
        return TrainingCheckpoint(
            generator=self.generator,
            discriminator=self.discriminator,
            g_optimizer=self.g_optimizer.state,
            d_optimizer=self.d_optimizer.state,
            step=self.step,
            rng=self.rng,
        )

    def save(self, path: str | Path) -> None:
        cp = self.checkpoint()
        save_checkpoint(
            path,
            generator=cp.generator,
            discriminator=cp.discriminator,
            g_optimizer=cp.g_optimizer,
            d_optimizer=cp.d_optimizer,
            step=cp.step,
            rng=cp.rng,
        )

    def _real_batch(self) -> Matrix:
        n = self.config.batch_size
        if isinstance(self.data, MixtureSpec):
            return sample_mixture(self.data, n, self.rng).samples
        return self.data.samples[self.rng.integers(len(self.data), n)]

    def _noise(self) -> Matrix:
        return noise_batch(
            self.rng, self.config.batch_size, self.config.noise_dim, self.config.noise_kind
        )

    def _decayed(self, net: Network, grads: list[np.ndarray]) -> list[np.ndarray]:
        wd = self.config.weight_decay
        if wd == 0.0:
            return grads
        # weights sit at even positions, biases are not decayed
        return [
            g + 2.0 * wd * p if i % 2 == 0 else g
            for i, (g, p) in enumerate(zip(grads, net.parameters()))
        ]

    def _abort(self, log: RunLog, term: str) -> TrainingAbortedError:
        _LOGGER.error("training aborted at step %d: non-finite %s", self.step, term)
        return TrainingAbortedError(
            f"non-finite {term} at step {self.step}", step=self.step, term=term, log=log
        )

    def _step(self, log: RunLog) -> None:
        cfg = self.config
        g, d = self.generator, self.discriminator
        c1 = schedule_value(self._c1, self.step) if self.lcnn else 0.0
        c2 = schedule_value(self._c2, self.step) if self.lcnn else 0.0

        for _ in range(cfg.d_steps_per_g_step):
            real = self._real_batch()
            fake = forward(g, self._noise()).output
            if d.has_spectral_norm:
                power_iterate(d, cfg.power_iterations)
            tr_real = forward(d, real)
            tr_fake = forward(d, fake)
            if self.lcnn:
                d_report = lcnn_gan_discriminator_objective(
                    tr_real.final_net, tr_fake.final_net, c1, c2
                )
            else:
                d_report = gan_discriminator_loss(tr_real.final_net, tr_fake.final_net)
            if not math.isfinite(d_report.value):
                raise self._abort(log, "discriminator loss")
            assert d_report.grad_fake_net is not None
            g_real = backward(d, tr_real, d_report.grad_final_net).flat()
            g_fake = backward(d, tr_fake, d_report.grad_fake_net).flat()
            grads = self._decayed(d, [a + b for a, b in zip(g_real, g_fake)])
            self.d_optimizer.step(list(d.parameters()), grads)
            if not _all_finite(d):
                raise self._abort(log, "discriminator parameters")

        g_trace = forward(g, self._noise())
        d_trace = forward(d, g_trace.output)
        g_report = gan_generator_loss(d_trace.final_net, cfg.loss_variant)
        g_loss = g_report.value
        if not math.isfinite(g_loss):
            raise self._abort(log, "generator loss")
        grad_out = backward(d, d_trace, g_report.grad_final_net).inputs
        grad_net = output_grad_to_net(g, g_trace, grad_out)
        if cfg.generator_penalty > 0:
            penalty = lcnn_penalty(g_trace.final_net)
            g_loss += cfg.generator_penalty * penalty.value
            grad_net = grad_net + cfg.generator_penalty * penalty.grad_final_net
        grads = self._decayed(g, backward(g, g_trace, grad_net).flat())
        self.g_optimizer.step(list(g.parameters()), grads)
        if not _all_finite(g):
            raise self._abort(log, "generator parameters")

        last = self.step == cfg.steps - 1
        if self.step % cfg.log_stride == 0 or last:
            pen_real = lcnn_penalty(tr_real.final_net).value
            pen_fake = lcnn_penalty(tr_fake.final_net).value
            record = RunRecord(
                step=self.step,
                d_loss=d_report.value,
                g_loss=g_loss,
                lcnn_real=pen_real,
                lcnn_fake=pen_fake,
                c1=c1,
                c2=c2,
                mean_abs_final_net_real=float(np.mean(np.abs(tr_real.final_net))),
                mean_abs_final_net_fake=float(np.mean(np.abs(tr_fake.final_net))),
            )
            log.append(record)
            _LOGGER.debug(
                "step %d: d_loss=%.5f g_loss=%.5f c1=%.4f c2=%.4f",
                record.step,
                record.d_loss,
                record.g_loss,
                c1,
                c2,
            )

    def run(self, until: int | None = None) -> RunLog:
        """Train from the current step up to (excluding) ``until``."""
        until = self.config.steps if until is None else until
        if not self.step <= until <= self.config.steps:
            raise ParameterError(
                f"cannot run from step {self.step} to {until} of {self.config.steps}"
            )
        log = RunLog()
        while self.step < until:
            try:
                self._step(log)
            except NumericalError:
                raise self._abort(log, "gradient") from None
            self.step += 1
        return log


def train_gan(
    config: TrainConfig,
    data: Dataset | MixtureSpec,
    g: Network,
    d: Network,
) -> TrainResult:
    """Train copies of ``g`` and ``d`` on the LCNN-GAN objective.

    The C schedules of ``config`` weight the penalty on real and generated
    discriminator pre-activations; with both at zero the run equals
    ``train_baseline_gan`` bit for bit.
    """
    return _train(config, data, g, d, lcnn=True)


def train_baseline_gan(
    config: TrainConfig,
    data: Dataset | MixtureSpec,
    g: Network,
    d: Network,
) -> TrainResult:
    """Train copies of ``g`` and ``d`` on the plain GAN objective."""
    return _train(config, data, g, d, lcnn=False)


def _train(
    config: TrainConfig,
    data: Dataset | MixtureSpec,
    g: Network,
    d: Network,
    *,
    lcnn: bool,
) -> TrainResult:
    trainer = Trainer(config, data, g.copy(), d.copy(), lcnn=lcnn)
    _LOGGER.info(
        "training %s for %d steps (batch %d, seed %d)",
        "LCNN-GAN" if lcnn else "baseline GAN",
        config.steps,
        config.batch_size,
        config.seed,
    )
    log = trainer.run()
    _LOGGER.info("training finished after %d steps", trainer.step)
    return TrainResult(trainer.generator, trainer.discriminator, log)
