from ._checkpoint import (
    TrainingCheckpoint,
    load_checkpoint,
    load_network,
    save_checkpoint,
    save_network,
)
from ._data import (
    grid_mixture,
    image_shape,
    load_idx,
    noise_batch,
    ring_mixture,
    sample_mixture,
)
from ._diagnostics import (
    accuracy,
    class_probabilities,
    components_trace,
    inception_style_score,
    mode_coverage,
    pca_energy_modes,
    probe_score,
    train_probe_classifier,
    vc_bound,
)
from ._error import (
    CheckpointFormatError,
    FormatError,
    IdxCountMismatchError,
    IdxFormatError,
    IdxMagicError,
    IdxTruncatedError,
    LcnnGanException,
    NumericalError,
    ParameterError,
    ShapeError,
    TrainingAbortedError,
)
from ._img_util import emit_sample_grid, tile_images, write_pgm
from ._losses import (
    empirical_error,
    gan_discriminator_loss,
    gan_generator_loss,
    lcnn_gan_discriminator_objective,
    lcnn_penalty,
)
from ._nn import (
    Activation,
    DenseLayer,
    ForwardTrace,
    Gradients,
    LayerSpec,
    Network,
    apply_spectral_norm,
    backward,
    forward,
    init_network,
    output_grad_to_net,
    power_iterate,
    spectral_sigma,
)
from ._numerics import Rng, gaussian_sample, matmul, sym_eig, uniform_sample
from ._optim import LEARNING_RATE_PRESETS, AdamState, Optimizer, adam_step, sgd_step
from ._training import (
    Trainer,
    TrainResult,
    schedule_value,
    train_baseline_gan,
    train_gan,
)
from ._types import (
    AdamConfig,
    CoverageReport,
    CSchedule,
    Dataset,
    EnergySpectrum,
    LossReport,
    MixtureSpec,
    ProbeConfig,
    RunLog,
    RunRecord,
    SgdConfig,
    TrainConfig,
    VcBoundReport,
)

__all__ = [
    "Activation",
    "AdamConfig",
    "AdamState",
    "CSchedule",
    "CheckpointFormatError",
    "CoverageReport",
    "Dataset",
    "DenseLayer",
    "EnergySpectrum",
    "FormatError",
    "ForwardTrace",
    "Gradients",
    "IdxCountMismatchError",
    "IdxFormatError",
    "IdxMagicError",
    "IdxTruncatedError",
    "LEARNING_RATE_PRESETS",
    "LayerSpec",
    "LcnnGanException",
    "LossReport",
    "MixtureSpec",
    "Network",
    "NumericalError",
    "Optimizer",
    "ParameterError",
    "ProbeConfig",
    "Rng",
    "RunLog",
    "RunRecord",
    "SgdConfig",
    "ShapeError",
    "TrainConfig",
    "TrainResult",
    "Trainer",
    "TrainingAbortedError",
    "TrainingCheckpoint",
    "VcBoundReport",
    "accuracy",
    "adam_step",
    "apply_spectral_norm",
    "backward",
    "class_probabilities",
    "components_trace",
    "emit_sample_grid",
    "empirical_error",
    "forward",
    "gan_discriminator_loss",
    "gan_generator_loss",
    "gaussian_sample",
    "grid_mixture",
    "image_shape",
    "inception_style_score",
    "init_network",
    "lcnn_gan_discriminator_objective",
    "lcnn_penalty",
    "load_checkpoint",
    "load_idx",
    "load_network",
    "matmul",
    "mode_coverage",
    "noise_batch",
    "output_grad_to_net",
    "pca_energy_modes",
    "power_iterate",
    "probe_score",
    "ring_mixture",
    "sample_mixture",
    "save_checkpoint",
    "save_network",
    "schedule_value",
    "sgd_step",
    "spectral_sigma",
    "sym_eig",
    "tile_images",
    "train_baseline_gan",
    "train_gan",
    "uniform_sample",
    "vc_bound",
    "write_pgm",
]
