import csv
import dataclasses
import logging
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from lcnn_gan_lab import (
    CoverageReport,
    FormatError,
    MixtureSpec,
    Network,
    ParameterError,
    ProbeConfig,
    Rng,
    components_trace,
    forward,
    inception_style_score,
    load_checkpoint,
    mode_coverage,
    pca_energy_modes,
    probe_score,
    train_probe_classifier,
    vc_bound,
)
from lcnn_gan_lab._types import Matrix, NoiseKind

from ._runner import ExperimentData, generate, reference_samples, write_report, write_rows

_LOGGER = logging.getLogger(__name__)


def read_probabilities(path: str | Path) -> Matrix:
    """Class probabilities, one comma-separated row per sample; a header row is skipped."""
    path = Path(path)
    rows: list[list[float]] = []
    with open(path, newline="", encoding="utf-8") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                if lineno == 1:
                    continue
                err = FormatError(f"{path}:{lineno}: non-numeric probability row")
                err.path = str(path)
                raise err from None
    if not rows or len({len(r) for r in rows}) != 1:
        err = FormatError(f"{path}: expected a non-empty rectangular table")
        err.path = str(path)
        raise err
    return np.array(rows, dtype=np.float64)


def diagnose_coverage(
    spec: MixtureSpec,
    checkpoints: Sequence[Path],
    out: Path,
    *,
    samples: int,
    seed: int,
    stdev_radius: float = 3.0,
    noise_kind: NoiseKind = "gaussian",
) -> list[CoverageReport]:
    """Mode coverage of each checkpoint's generator, one ``coverage.csv`` row each.

    Every checkpoint is sampled with the same noise so rows are comparable.
    """
    if not checkpoints:
        raise ParameterError("coverage needs at least one checkpoint")
    reports = []
    rows = []
    for path in checkpoints:
        cp = load_checkpoint(path)
        report = mode_coverage(
            generate(cp.generator, samples, Rng(seed), noise_kind), spec, stdev_radius
        )
        reports.append(report)
        rows.append(
            (
                path.name,
                cp.step,
                report.covered_modes,
                report.high_quality_fraction,
                report.n_samples,
                ";".join(str(c) for c in report.per_mode_counts),
            )
        )
        _LOGGER.info("%s: %d/%d modes covered", path, report.covered_modes, report.n_modes)
    write_rows(
        out / "coverage.csv",
        (
            "checkpoint",
            "step",
            "covered_modes",
            "high_quality_fraction",
            "n_samples",
            "per_mode_counts",
        ),
        rows,
    )
    return reports


def diagnose_pca(data: Matrix, out: Path, *, energy_target: float = 0.83) -> int:
    spectrum, needed = pca_energy_modes(data, energy_target)
    energy = spectrum.cumulative_energy
    write_rows(
        out / "spectrum.csv",
        ("component", "eigenvalue", "cumulative_energy"),
        ((i + 1, float(v), float(e)) for i, (v, e) in enumerate(zip(spectrum.eigenvalues, energy))),
    )
    write_report(
        out / "pca.txt",
        [
            ("n_samples", data.shape[0]),
            ("dim", data.shape[1]),
            ("energy_target", energy_target),
            ("components_needed", needed),
            ("energy_top10", float(energy[min(10, len(energy)) - 1])),
        ],
    )
    _LOGGER.info("%d components hold %.0f%% of the energy", needed, 100 * energy_target)
    return needed


def diagnose_pca_trace(
    checkpoints: Sequence[Path],
    out: Path,
    *,
    samples: int,
    seed: int,
    energy_target: float = 0.83,
    noise_kind: NoiseKind = "gaussian",
) -> list[tuple[int, int]]:
    """Components needed for generated samples at each checkpoint, as ``modes.csv``."""
    if not checkpoints:
        raise ParameterError("pca trace needs at least one checkpoint")
    snapshots = []
    for path in checkpoints:
        cp = load_checkpoint(path)
        snapshots.append((cp.step, generate(cp.generator, samples, Rng(seed), noise_kind)))
    trace = components_trace(snapshots, energy_target)
    write_rows(out / "modes.csv", ("step", "components_needed"), trace)
    return trace


def diagnose_score(probs: Matrix, out: Path, *, splits: int = 10) -> tuple[float, float]:
    mean, stdev = inception_style_score(probs, splits)
    write_report(out / "score.txt", [("score_mean", mean), ("score_stdev", stdev), ("splits", splits)])
    return mean, stdev


def diagnose_probe_score(
    data: ExperimentData,
    generator: Network,
    out: Path,
    *,
    samples: int,
    seed: int,
    probe_steps: int = 500,
    splits: int = 10,
    noise_kind: NoiseKind = "gaussian",
) -> tuple[float, float]:
    """Score generated samples under a probe trained on labelled real data."""
    rng = Rng(seed)
    reference = reference_samples(data, samples, rng)
    n_classes = data.mixture.n_modes if data.mixture is not None else None
    probe = train_probe_classifier(
        reference, config=ProbeConfig(steps=probe_steps, seed=seed), n_classes=n_classes
    )
    mean, stdev = probe_score(probe, generate(generator, samples, rng, noise_kind), splits)
    write_report(out / "score.txt", [("score_mean", mean), ("score_stdev", stdev), ("splits", splits)])
    return mean, stdev


def diagnose_vc(discriminator: Network, samples: Matrix, out: Path, *, c: float) -> None:
    report = vc_bound(forward(discriminator, samples), c)
    write_report(out / "vc_bound.txt", dataclasses.asdict(report).items())
