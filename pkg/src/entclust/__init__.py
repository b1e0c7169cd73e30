"""Two-stage subspace clustering with contrastive pre-training.

Stage one trains a small encoder so that two augmented views of the same
image embed close together.  Stage two writes each embedded sample as a
convex combination of the others (a row-stochastic coefficient matrix
learned with an entropy regularizer), turns the coefficients into a
similarity graph, and spectrally clusters it.  Everything runs on plain
numpy with a small built-in reverse-mode gradient tape, deterministic per
seed, with all artifacts persisted as plain text.
"""

from .augment import AugmentConfig, augment_pair, resize_bilinear
from .autodiff import Node, Tape
from .config import ExperimentConfig, load_config, override_seed
from .contrastive import (
    PretrainConfig,
    cosine_sim_matrix,
    nt_xent_pair,
    pretrain,
    pretrain_loss,
)
from .datasets import (
    ImageBatch,
    LabeledDataset,
    SynthConfig,
    read_idx,
    subsample_per_class,
    synth_image_classes,
    synth_subspaces,
    write_idx,
)
from .encoder import LinearLayer, MlpConfig, encode, init_params, project
from .linalg import SymEigenResult, matmul, sym_eig
from .metrics import MetricsReport, acc, hungarian, nmi
from .optim import AdamState, adam_step
from .pipeline import (
    resolve_dataset,
    run_all,
    run_cluster,
    run_eval,
    run_pretrain,
    verify_artifacts,
)
from .selfexpr import (
    ClusterStageConfig,
    affinity,
    coeff_from_logits,
    entropy_term,
    fit_coefficients,
    selfexpr_loss,
    ssc_entropy_baseline,
)
from .spectral import (
    SpectralConfig,
    kmeans,
    normalized_laplacian,
    spectral_cluster,
    spectral_embed,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentConfig",
    "augment_pair",
    "resize_bilinear",
    "Node",
    "Tape",
    "ExperimentConfig",
    "load_config",
    "override_seed",
    "PretrainConfig",
    "cosine_sim_matrix",
    "nt_xent_pair",
    "pretrain",
    "pretrain_loss",
    "ImageBatch",
    "LabeledDataset",
    "SynthConfig",
    "read_idx",
    "subsample_per_class",
    "synth_image_classes",
    "synth_subspaces",
    "write_idx",
    "LinearLayer",
    "MlpConfig",
    "encode",
    "init_params",
    "project",
    "SymEigenResult",
    "matmul",
    "sym_eig",
    "MetricsReport",
    "acc",
    "hungarian",
    "nmi",
    "AdamState",
    "adam_step",
    "resolve_dataset",
    "run_all",
    "run_cluster",
    "run_eval",
    "run_pretrain",
    "verify_artifacts",
    "ClusterStageConfig",
    "affinity",
    "coeff_from_logits",
    "entropy_term",
    "fit_coefficients",
    "selfexpr_loss",
    "ssc_entropy_baseline",
    "SpectralConfig",
    "kmeans",
    "normalized_laplacian",
    "spectral_cluster",
    "spectral_embed",
    "__version__",
]
