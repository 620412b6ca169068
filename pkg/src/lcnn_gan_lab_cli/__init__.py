import argparse
import importlib.metadata
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from lcnn_gan_lab import (
    Dataset,
    LcnnGanException,
    ParameterError,
    Rng,
    emit_sample_grid,
    load_checkpoint,
    load_idx,
)

from ._config import (
    ConfigError,
    ConfigSyntaxError,
    ConfigTypeError,
    ExperimentConfig,
    MissingKeyError,
    UnknownKeyError,
    load_config,
    parse_config,
    read_seed_list,
    serialize,
)
from ._diagnose import (
    diagnose_coverage,
    diagnose_pca,
    diagnose_pca_trace,
    diagnose_probe_score,
    diagnose_score,
    diagnose_vc,
    read_probabilities,
)
from ._runner import (
    EXIT_CONFIG,
    EXIT_OK,
    exit_status,
    load_data,
    reference_samples,
    run_experiment,
    run_sweep,
)

_LOGGER = logging.getLogger(__name__)

try:
    version = importlib.metadata.version("lcnn-gan-lab")
except importlib.metadata.PackageNotFoundError:
    # package is not installed
    version = "unknown"

__all__ = [
    "ConfigError",
    "ConfigSyntaxError",
    "ConfigTypeError",
    "ExperimentConfig",
    "MissingKeyError",
    "UnknownKeyError",
    "load_config",
    "main",
    "parse_config",
    "run_experiment",
    "run_sweep",
    "serialize",
]


def _config_from(args: argparse.Namespace) -> ExperimentConfig:
    return load_config(args.config) if args.config else ExperimentConfig()


def _cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.sweep:
        return run_sweep(config, read_seed_list(args.sweep), args.output, jobs=args.jobs)
    return run_experiment(config, args.output)


def _cmd_config_check(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    sys.stdout.write(serialize(config))
    return EXIT_OK


def _cmd_sample_grid(args: argparse.Namespace) -> int:
    cp = load_checkpoint(args.checkpoint)
    shape = None
    if args.image_shape:
        try:
            h, w = (int(v) for v in args.image_shape.lower().split("x"))
        except ValueError:
            raise ParameterError(
                f"image shape must look like 28x28, got {args.image_shape!r}"
            ) from None
        shape = (h, w)
    target = emit_sample_grid(
        cp.generator,
        Rng(args.seed),
        args.rows,
        args.cols,
        args.output,
        image_shape=shape,
        noise_kind=args.noise_kind,
    )
    _LOGGER.info("wrote %s", target)
    return EXIT_OK


def _cmd_diagnose(args: argparse.Namespace) -> int:
    config = _config_from(args)
    diag = config.diagnostics
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    samples = args.samples or diag.samples
    checkpoints = [Path(p) for p in args.checkpoint or ()]

    match args.selector:
        case "coverage":
            data = load_data(config)
            if data.mixture is None:
                raise ParameterError("coverage needs a ring or grid mixture in the config")
            diagnose_coverage(
                data.mixture,
                checkpoints,
                out,
                samples=samples,
                seed=args.seed,
                stdev_radius=diag.stdev_radius,
                noise_kind=config.noise_kind,
            )
        case "pca":
            target = args.energy_target or diag.energy_target
            if args.images or args.labels:
                if not (args.images and args.labels):
                    raise ParameterError("--images and --labels go together")
                diagnose_pca(load_idx(args.images, args.labels).samples, out, energy_target=target)
            elif checkpoints:
                diagnose_pca_trace(
                    checkpoints,
                    out,
                    samples=samples,
                    seed=args.seed,
                    energy_target=target,
                    noise_kind=config.noise_kind,
                )
            elif args.config:
                data = load_data(config)
                if isinstance(data.train, Dataset):
                    x = data.train.samples
                else:
                    x = reference_samples(data, samples, Rng(args.seed)).samples
                diagnose_pca(x, out, energy_target=target)
            else:
                raise ParameterError("pca needs --images/--labels, --checkpoint or --config")
        case "score":
            splits = args.splits or diag.score_splits
            if args.probs:
                diagnose_score(read_probabilities(args.probs), out, splits=splits)
            elif len(checkpoints) == 1:
                diagnose_probe_score(
                    load_data(config),
                    load_checkpoint(checkpoints[0]).generator,
                    out,
                    samples=samples,
                    seed=args.seed,
                    probe_steps=diag.probe_steps,
                    splits=splits,
                    noise_kind=config.noise_kind,
                )
            else:
                raise ParameterError("score needs --probs or exactly one --checkpoint")
        case "vc":
            if len(checkpoints) != 1:
                raise ParameterError("vc needs exactly one --checkpoint")
            real = reference_samples(load_data(config), samples, Rng(args.seed))
            diagnose_vc(
                load_checkpoint(checkpoints[0]).discriminator,
                real.samples,
                out,
                c=args.c,
            )
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lcnn-gan-lab",
        description="Train GANs with LCNN penalties and measure mode collapse.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {version}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug output")
    parser.add_argument("-q", "--quiet", action="store_true", help="log warnings only")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run one experiment or a seed sweep")
    train.add_argument("config", help="experiment configuration file")
    train.add_argument("--output", help="output directory (default: output.dir)")
    train.add_argument("--seed", type=int, help="override the configured seed")
    train.add_argument("--sweep", help="file listing one seed per line")
    train.add_argument("--jobs", type=int, default=1, help="parallel sweep runs")
    train.set_defaults(handler=_cmd_train)

    diagnose = sub.add_parser("diagnose", help="run one diagnostic on saved artifacts")
    diagnose.add_argument("selector", choices=("coverage", "pca", "score", "vc"))
    diagnose.add_argument("--config", help="experiment configuration (data and defaults)")
    diagnose.add_argument("--checkpoint", nargs="+", help="training checkpoint file(s)")
    diagnose.add_argument("--images", help="IDX image file")
    diagnose.add_argument("--labels", help="IDX label file")
    diagnose.add_argument("--probs", help="CSV of class probabilities")
    diagnose.add_argument("--samples", type=int, help="generated samples per measurement")
    diagnose.add_argument("--seed", type=int, default=0)
    diagnose.add_argument("--energy-target", type=float)
    diagnose.add_argument("--splits", type=int)
    diagnose.add_argument("--c", type=float, default=0.0, help="penalty weight for the VC bound")
    diagnose.add_argument("--output", default=".", help="report directory")
    diagnose.set_defaults(handler=_cmd_diagnose)

    grid = sub.add_parser("sample-grid", help="render generator samples from a checkpoint")
    grid.add_argument("checkpoint")
    grid.add_argument("output", help="target path; the suffix is chosen from the output")
    grid.add_argument("--rows", type=int, default=8)
    grid.add_argument("--cols", type=int, default=8)
    grid.add_argument("--seed", type=int, default=0)
    grid.add_argument("--image-shape", help="HxW, inferred for square outputs")
    grid.add_argument("--noise-kind", choices=("gaussian", "uniform"), default="gaussian")
    grid.set_defaults(handler=_cmd_sample_grid)

    check = sub.add_parser("config-check", help="validate a config and print it normalised")
    check.add_argument("config")
    check.set_defaults(handler=_cmd_config_check)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(name)s (%(levelname)s): %(message)s")
    try:
        return args.handler(args)
    except ConfigError as e:
        _LOGGER.error("configuration error: %s", e)
        return EXIT_CONFIG
    except (OSError, LcnnGanException) as e:
        _LOGGER.error("%s", e)
        return exit_status(e)
