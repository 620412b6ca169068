"""Experiment runner.

A run directory holds::

    runlog.csv            RunLog, documented column order
    coverage.csv          step,covered_modes,high_quality_fraction,n_samples,per_mode_counts
    modes.csv             step,components_needed,energy_top10
    score.txt             key = value lines
    vc_bound.txt          key = value lines
    samples_<step>.pgm    sample grid (.csv scatter for 2-D data)
    checkpoint_<step>.txt periodic checkpoints, checkpoint_final.txt at the end
    abort.txt             only when training aborted
    manifest.tsv          <relative path>\\t<sha-256 hex>, sorted by path

Every file but the manifest is a pure function of the configuration, so
repeated runs produce identical manifests.
"""

import csv
import dataclasses
import hashlib
import logging
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import NamedTuple

import numpy as np

from lcnn_gan_lab import (
    Dataset,
    FormatError,
    LcnnGanException,
    MixtureSpec,
    Network,
    NumericalError,
    ProbeConfig,
    Rng,
    RunLog,
    Trainer,
    TrainingAbortedError,
    emit_sample_grid,
    forward,
    grid_mixture,
    image_shape,
    init_network,
    load_idx,
    mode_coverage,
    noise_batch,
    pca_energy_modes,
    probe_score,
    ring_mixture,
    sample_mixture,
    schedule_value,
    train_probe_classifier,
    vc_bound,
)
from lcnn_gan_lab._types import Matrix, NoiseKind

from ._config import ExperimentConfig

_LOGGER = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.tsv"
SWEEP_SUMMARY_NAME = "sweep_summary.csv"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3
EXIT_IO = 4

# streams derived from the run seed
_G_INIT_STREAM = 0
_D_INIT_STREAM = 1
_TRAIN_STREAM = 2
_EVAL_STREAM = 3
_GRID_STREAM = 4
_PROBE_STREAM = 5

_TOP_ENERGY_COMPONENTS = 10


def exit_status(exc: BaseException) -> int:
    match exc:
        case TrainingAbortedError() | NumericalError():
            return EXIT_ABORT
        case OSError() | FormatError():
            return EXIT_IO
        case LcnnGanException():
            return EXIT_CONFIG
        case _:
            raise exc


@dataclasses.dataclass(frozen=True, kw_only=True, eq=False)
class ExperimentData:
    train: Dataset | MixtureSpec
    mixture: MixtureSpec | None
    image_shape: tuple[int, int] | None = None

    @property
    def dim(self) -> int:
        return self.train.dim


class RunSummary(NamedTuple):
    seed: int
    exit_status: int
    covered_modes: int | None = None
    high_quality_fraction: float | None = None
    score_mean: float | None = None
    score_stdev: float | None = None


def load_data(config: ExperimentConfig) -> ExperimentData:
    d = config.data
    match d.kind:
        case "ring":
            spec = ring_mixture(d.modes, d.radius, d.sigma)
        case "grid":
            spec = grid_mixture(d.grid_size, d.spacing, d.sigma)
        case "idx":
            assert d.images is not None and d.labels is not None
            dataset = load_idx(d.images, d.labels)
            if d.limit is not None and d.limit < len(dataset):
                assert dataset.labels is not None
                dataset = Dataset(
                    samples=dataset.samples[: d.limit], labels=dataset.labels[: d.limit]
                )
            return ExperimentData(
                train=dataset, mixture=None, image_shape=image_shape(d.images)
            )
    return ExperimentData(train=spec, mixture=spec)


def build_networks(config: ExperimentConfig, dim: int) -> tuple[Network, Network]:
    root = Rng(config.seed)
    g = init_network(
        config.noise_dim,
        config.generator_spec(dim),
        root.derive(_G_INIT_STREAM),
        config.generator.init,
        stdev=config.generator.init_stdev,
    )
    d = init_network(
        dim,
        config.discriminator_spec(),
        root.derive(_D_INIT_STREAM),
        config.discriminator.init,
        stdev=config.discriminator.init_stdev,
    )
    return g, d


def generate(g: Network, n: int, rng: Rng, kind: NoiseKind = "gaussian") -> Matrix:
    return forward(g, noise_batch(rng, n, g.in_features, kind)).output


def reference_samples(data: ExperimentData, n: int, rng: Rng) -> Dataset:
    """Labelled real samples: fresh mixture draws, or the first ``n`` dataset rows."""
    if data.mixture is not None:
        return sample_mixture(data.mixture, n, rng)
    assert isinstance(data.train, Dataset)
    labels = data.train.labels[:n] if data.train.labels is not None else None
    return Dataset(samples=data.train.samples[:n], labels=labels)


def _format(value: object) -> str:
    match value:
        case bool():
            return "true" if value else "false"
        case float():
            return repr(value)
        case _:
            return str(value)


def write_report(path: Path, items: Iterable[tuple[str, object]]) -> None:
    path.write_text("".join(f"{k} = {_format(v)}\n" for k, v in items), encoding="utf-8")
    _LOGGER.info("wrote %s", path)


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_format(v) for v in row] for row in rows)
    _LOGGER.info("wrote %s", path)


def write_manifest(directory: Path) -> Path:
    """Hash every file below ``directory`` into ``manifest.tsv``."""
    target = directory / MANIFEST_NAME
    entries = []
    for path in sorted(p for p in directory.rglob("*") if p.is_file() and p != target):
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        entries.append(f"{path.relative_to(directory).as_posix()}\t{digest}\n")
    target.write_text("".join(entries), encoding="utf-8")
    _LOGGER.info("wrote manifest of %d files to %s", len(entries), target)
    return target


def _event_steps(config: ExperimentConfig) -> list[int]:
    events = {config.steps}
    for cadence in (
        config.diagnostics.stride,
        config.output.grid_every,
        config.output.checkpoint_every,
    ):
        if cadence:
            events.update(range(cadence, config.steps, cadence))
    return sorted(events)


def _final_c(config: ExperimentConfig) -> float:
    if config.objective == "baseline":
        return 0.0
    schedule = config.to_train_config().c1()
    return schedule_value(schedule, schedule.total_steps - 1)


class _Run:
    def __init__(self, config: ExperimentConfig, out: Path) -> None:
        self.config = config
        self.out = out
        self.data = load_data(config)
        g, d = build_networks(config, self.data.dim)
        self.trainer = Trainer(
            config.to_train_config(),
            self.data.train,
            g,
            d,
            lcnn=config.objective == "lcnn",
            rng=Rng(config.seed).derive(_TRAIN_STREAM),
        )
        self.log = RunLog()
        self.coverage_rows: list[tuple[object, ...]] = []
        self.modes_rows: list[tuple[object, ...]] = []
        self.summary = RunSummary(seed=config.seed, exit_status=EXIT_OK)

    def _eval_rng(self, step: int) -> Rng:
        return Rng(self.config.seed).derive(_EVAL_STREAM).derive(step)

    def _diagnose(self, step: int) -> None:
        diag = self.config.diagnostics
        want_coverage = diag.coverage and self.data.mixture is not None
        # image data: PCA of the final generator only
        want_pca = diag.pca and (self.data.mixture is not None or step == self.config.steps)
        if not (want_coverage or want_pca):
            return
        samples = generate(
            self.trainer.generator, diag.samples, self._eval_rng(step), self.config.noise_kind
        )
        if want_coverage:
            assert self.data.mixture is not None
            report = mode_coverage(samples, self.data.mixture, diag.stdev_radius)
            self.coverage_rows.append(
                (
                    step,
                    report.covered_modes,
                    report.high_quality_fraction,
                    report.n_samples,
                    ";".join(str(c) for c in report.per_mode_counts),
                )
            )
            self.summary = self.summary._replace(
                covered_modes=report.covered_modes,
                high_quality_fraction=report.high_quality_fraction,
            )
            _LOGGER.info(
                "step %d: %d/%d modes covered", step, report.covered_modes, report.n_modes
            )
        if want_pca:
            spectrum, needed = pca_energy_modes(samples, diag.energy_target)
            top = spectrum.cumulative_energy[
                min(_TOP_ENERGY_COMPONENTS, len(spectrum.cumulative_energy)) - 1
            ]
            self.modes_rows.append((step, needed, float(top)))

    def _emit_grid(self, step: int) -> None:
        out = self.config.output
        emit_sample_grid(
            self.trainer.generator,
            Rng(self.config.seed).derive(_GRID_STREAM),
            out.grid_rows,
            out.grid_cols,
            self.out / f"samples_{step:07d}",
            image_shape=self.config.image_shape or self.data.image_shape,
            noise_kind=self.config.noise_kind,
        )

    def train(self) -> None:
        cfg = self.config
        for step in _event_steps(cfg):
            self.log.extend(self.trainer.run(step))
            if step % cfg.diagnostics.stride == 0 or step == cfg.steps:
                self._diagnose(step)
            if step == cfg.steps or (cfg.output.grid_every and step % cfg.output.grid_every == 0):
                self._emit_grid(step)
            if step < cfg.steps and cfg.output.checkpoint_every:
                if step % cfg.output.checkpoint_every == 0:
                    self.trainer.save(self.out / f"checkpoint_{step:07d}.txt")
        self.trainer.save(self.out / "checkpoint_final.txt")

    def _score(self) -> None:
        diag = self.config.diagnostics
        rng = Rng(self.config.seed).derive(_PROBE_STREAM)
        if self.data.mixture is not None:
            train = sample_mixture(self.data.mixture, diag.samples, rng)
            held_out = sample_mixture(self.data.mixture, diag.samples, rng)
            n_classes = self.data.mixture.n_modes
        else:
            assert isinstance(self.data.train, Dataset)
            train = held_out = self.data.train
            n_classes = None
        probe = train_probe_classifier(
            train,
            config=ProbeConfig(steps=diag.probe_steps, seed=self.config.seed),
            n_classes=n_classes,
        )
        samples = generate(self.trainer.generator, diag.samples, rng, self.config.noise_kind)
        splits = min(diag.score_splits, diag.samples)
        mean, stdev = probe_score(probe, samples, splits)
        real_mean, real_stdev = probe_score(probe, held_out.samples[: diag.samples], splits)
        self.summary = self.summary._replace(score_mean=mean, score_stdev=stdev)
        write_report(
            self.out / "score.txt",
            [
                ("score_mean", mean),
                ("score_stdev", stdev),
                ("real_score_mean", real_mean),
                ("real_score_stdev", real_stdev),
                ("splits", splits),
            ],
        )

    def _vc_bound(self) -> None:
        real = reference_samples(self.data, self.config.diagnostics.samples, self._eval_rng(0))
        report = vc_bound(forward(self.trainer.discriminator, real.samples), _final_c(self.config))
        write_report(self.out / "vc_bound.txt", dataclasses.asdict(report).items())

    def write_reports(self) -> None:
        diag = self.config.diagnostics
        self.log.to_csv(self.out / "runlog.csv")
        if self.coverage_rows:
            write_rows(
                self.out / "coverage.csv",
                ("step", "covered_modes", "high_quality_fraction", "n_samples", "per_mode_counts"),
                self.coverage_rows,
            )
        if self.modes_rows:
            write_rows(
                self.out / "modes.csv",
                ("step", "components_needed", "energy_top10"),
                self.modes_rows,
            )
        if diag.score:
            self._score()
        if diag.vc_bound:
            self._vc_bound()


def _run(config: ExperimentConfig, out: Path) -> RunSummary:
    run = _Run(config, out)
    _LOGGER.info(
        "running %s experiment on %s data for %d steps (seed %d) into %s",
        config.objective,
        config.data.kind,
        config.steps,
        config.seed,
        out,
    )
    try:
        run.train()
    except TrainingAbortedError as e:
        run.log.extend(e.log)
        run.log.to_csv(out / "runlog.csv")
        write_report(out / "abort.txt", [("step", e.step), ("term", e.term)])
        write_manifest(out)
        _LOGGER.error("run aborted at step %d (%s)", e.step, e.term)
        return run.summary._replace(exit_status=EXIT_ABORT)
    run.write_reports()
    write_manifest(out)
    _LOGGER.info("run finished after %d steps", run.trainer.step)
    return run.summary


def _run_guarded(config: ExperimentConfig, out: Path) -> RunSummary:
    try:
        out.mkdir(parents=True, exist_ok=True)
        return _run(config, out)
    except (OSError, LcnnGanException) as e:
        _LOGGER.error("run with seed %d failed: %s", config.seed, e)
        return RunSummary(seed=config.seed, exit_status=exit_status(e))


def run_experiment(config: ExperimentConfig, output_dir: str | Path | None = None) -> int:
    """Train, diagnose and write the artifact set of one run; returns the exit status."""
    out = Path(output_dir if output_dir is not None else config.output.dir)
    return _run_guarded(config, out).exit_status


def run_sweep(
    config: ExperimentConfig,
    seeds: Sequence[int],
    output_dir: str | Path | None = None,
    *,
    jobs: int = 1,
) -> int:
    """One run per seed in ``seed-<n>`` subdirectories plus ``sweep_summary.csv``."""
    parent = Path(output_dir if output_dir is not None else config.output.dir)
    parent.mkdir(parents=True, exist_ok=True)
    configs = [config.with_seed(seed) for seed in seeds]
    dirs = [parent / f"seed-{seed}" for seed in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(_run_guarded, configs, dirs))
    else:
        summaries = [_run_guarded(c, d) for c, d in zip(configs, dirs)]

    write_rows(
        parent / SWEEP_SUMMARY_NAME,
        RunSummary._fields,
        ([("" if v is None else v) for v in s] for s in summaries),
    )
    covered = [s.covered_modes for s in summaries if s.covered_modes is not None]
    if covered:
        _LOGGER.info("median covered modes over %d seeds: %g", len(covered), np.median(covered))
    return max(s.exit_status for s in summaries)
