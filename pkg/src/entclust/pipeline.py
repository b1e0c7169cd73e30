"""Stage orchestration: dataset resolution, pretrain, cluster, evaluate.

Stages hand off through files in the run's output directory, so each one
can run, fail, and be retried independently.  Every stage appends its
artifacts to ``run_manifest.txt``; a finished run's manifest must list
files that all exist and load back cleanly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .augment import resize_bilinear
from .config import ExperimentConfig
from .contrastive import pretrain
from .datasets import (
    ImageBatch,
    LabeledDataset,
    read_idx,
    subsample_per_class,
    synth_image_classes,
    synth_subspaces,
)
from .encoder import LinearLayer, MlpConfig, encode
from .metrics import MetricsReport, acc, nmi
from .persist import (
    load_labels,
    load_loss_history,
    load_manifest,
    load_matrix,
    load_metrics_report,
    load_mlp_params,
    save_labels,
    save_loss_history,
    save_manifest,
    save_matrix,
    save_metrics_report,
    save_mlp_params,
    write_pgm_heatmap,
)
from .selfexpr import affinity, check_coefficient_matrix, fit_coefficients
from .spectral import spectral_cluster

__all__ = [
    "ResolvedData",
    "resolve_dataset",
    "run_pretrain",
    "run_cluster",
    "run_eval",
    "export_heatmap",
    "run_all",
    "verify_artifacts",
]

MANIFEST_NAME = "run_manifest.txt"


@dataclass
class ResolvedData:
    dataset: LabeledDataset
    images: Optional[ImageBatch]  # None for plain-vector sources


def resolve_dataset(cfg: ExperimentConfig) -> ResolvedData:
    """Materialize the configured dataset, deterministic per master seed."""
    if cfg.data_source == "synth":
        return ResolvedData(synth_subspaces(cfg.synth, cfg.seed), None)
    if cfg.data_source == "synth-images":
        ds, batch = synth_image_classes(
            cfg.synth_image_classes,
            cfg.synth_image_per_class,
            cfg.synth_image_height,
            cfg.synth_image_width,
            cfg.seed,
            cfg.synth_image_noise_sigma,
        )
        return ResolvedData(ds, batch)
    if cfg.data_source == "idx":
        with open(cfg.idx_images, "rb") as images_fh, open(cfg.idx_labels, "rb") as labels_fh:
            ds, height, width = read_idx(images_fh, labels_fh)
        if cfg.per_class:
            ds = subsample_per_class(ds, cfg.per_class, cfg.seed)
        return ResolvedData(ds, ImageBatch.from_matrix(ds.samples, height, width, 1))
    # csv
    samples = load_matrix(cfg.csv_samples)
    labels = load_labels(cfg.csv_labels) if cfg.csv_labels else None
    ds = LabeledDataset(samples, labels)
    if cfg.per_class:
        if labels is None:
            raise ValueError("data.per_class requires data.csv_labels")
        ds = subsample_per_class(ds, cfg.per_class, cfg.seed)
    images = None
    if cfg.image_height and cfg.image_width:
        channels = cfg.image_channels or 1
        images = ImageBatch.from_matrix(ds.samples, cfg.image_height, cfg.image_width, channels)
    return ResolvedData(ds, images)


def _encoder_configs(cfg: ExperimentConfig, input_width: int) -> tuple[MlpConfig, MlpConfig]:
    """Resolve empty width lists to the default desk-scale architecture."""
    widths = cfg.encoder_widths or (input_width, 512, 128)
    if widths[0] != input_width:
        raise ValueError(
            f"encoder.widths starts at {widths[0]} but the flattened input width is {input_width}"
        )
    proj = cfg.projection_widths or (widths[-1], 64, 32)
    return MlpConfig(tuple(widths)), MlpConfig(tuple(proj))


def _check_layer_shapes(layers: list[LinearLayer], expected: MlpConfig, who: str) -> None:
    widths = (layers[0].weight.shape[1], *(layer.weight.shape[0] for layer in layers))
    if widths != expected.layer_widths:
        raise ValueError(
            f"saved {who} widths {widths} do not match configured {expected.layer_widths}"
        )


def _update_manifest(out_dir: str, new_files: list[str]) -> list[str]:
    path = os.path.join(out_dir, MANIFEST_NAME)
    existing = load_manifest(path) if os.path.exists(path) else []
    merged = existing + [name for name in new_files if name not in existing]
    save_manifest(path, merged)
    return merged


def run_pretrain(cfg: ExperimentConfig) -> list[str]:
    """Pre-train on the configured images; persist parameters and losses."""
    data = resolve_dataset(cfg)
    if data.images is None:
        raise ValueError(
            f"pretraining needs image data, but data.source = {cfg.data_source} "
            "yields plain vectors"
        )
    aug = cfg.augment_config(data.images.height, data.images.width)
    flat_width = data.images.channels * aug.output_size * aug.output_size
    enc_cfg, proj_cfg = _encoder_configs(cfg, flat_width)
    enc_layers, proj_layers, history = pretrain(
        data.images, enc_cfg, proj_cfg, aug, cfg.pretrain
    )
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    files = save_mlp_params(out, "encoder", enc_layers)
    files += save_mlp_params(out, "projection", proj_layers)
    save_loss_history(os.path.join(out, "pretrain_loss.csv"), history)
    files.append("pretrain_loss.csv")
    _update_manifest(out, files)
    return files


def run_cluster(cfg: ExperimentConfig, identity_encoder: bool = False) -> list[str]:
    """Learn coefficients, build the affinity, cluster, persist all three.

    With ``identity_encoder`` the raw sample matrix stands in for Z; the
    learned path loads the pretrained parameters from the output directory
    and rejects them before training if their shapes disagree with the
    config.
    """
    data = resolve_dataset(cfg)
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    if identity_encoder:
        z_source = data.dataset.samples
    else:
        if data.images is None:
            raise ValueError(
                f"the learned encoder needs image data, but data.source = "
                f"{cfg.data_source} yields plain vectors (use the identity encoder)"
            )
        aug = cfg.augment_config(data.images.height, data.images.width)
        flat_width = data.images.channels * aug.output_size * aug.output_size
        enc_cfg, proj_cfg = _encoder_configs(cfg, flat_width)
        enc_layers = load_mlp_params(out, "encoder")
        proj_layers = load_mlp_params(out, "projection")
        _check_layer_shapes(enc_layers, enc_cfg, "encoder")
        _check_layer_shapes(proj_layers, proj_cfg, "projection")
        # Clustering sees deterministic inputs: plain resize, no augmentation.
        resized = np.stack(
            [
                resize_bilinear(img, aug.output_size, aug.output_size)
                for img in data.images.values
            ]
        )
        features = encode(enc_layers, resized.reshape(data.images.count, -1))
        z_source = (features, proj_layers)

    coefficients, history, head = fit_coefficients(z_source, cfg.cluster)
    weights = affinity(coefficients)
    if cfg.spectral_clusters:
        k = cfg.spectral_clusters
    elif data.dataset.labels is not None:
        k = data.dataset.n_classes
    else:
        raise ValueError("spectral.clusters must be set when the dataset has no labels")
    labels = spectral_cluster(weights, cfg.spectral_config(k))

    save_matrix(os.path.join(out, "C.csv"), coefficients)
    save_matrix(os.path.join(out, "W.csv"), weights)
    save_labels(os.path.join(out, "labels.csv"), labels)
    save_loss_history(os.path.join(out, "cluster_loss.csv"), history)
    files = ["C.csv", "W.csv", "labels.csv", "cluster_loss.csv"]
    if cfg.cluster.fine_tune_projection and head is not None:
        files += save_mlp_params(out, "projection_tuned", head)
    _update_manifest(out, files)
    return files


def run_eval(cfg: ExperimentConfig) -> MetricsReport:
    """Score persisted labels against the dataset's ground truth."""
    data = resolve_dataset(cfg)
    if data.dataset.labels is None:
        raise ValueError("evaluation needs ground-truth labels in the dataset")
    out = cfg.output_dir
    predicted = load_labels(os.path.join(out, "labels.csv"))
    truth = data.dataset.labels
    report = MetricsReport(
        acc=acc(truth, predicted),
        nmi=nmi(truth, predicted),
        n=int(truth.size),
        k_true=int(np.unique(truth).size),
        k_pred=int(np.unique(predicted).size),
        seed=cfg.seed,
    )
    save_metrics_report(os.path.join(out, "metrics.txt"), report)
    _update_manifest(out, ["metrics.txt"])
    return report


def export_heatmap(w_csv_path: str, out_pgm_path: str) -> None:
    """Render an affinity CSV as an 8-bit PGM, brightest at the maximum."""
    write_pgm_heatmap(out_pgm_path, load_matrix(w_csv_path))


def run_all(cfg: ExperimentConfig, identity_encoder: bool = False) -> list[str]:
    """Full pipeline; with the identity encoder the pretrain stage is moot
    and skipped.  Ends by validating every manifest entry."""
    if not identity_encoder:
        run_pretrain(cfg)
    run_cluster(cfg, identity_encoder)
    run_eval(cfg)
    out = cfg.output_dir
    export_heatmap(os.path.join(out, "W.csv"), os.path.join(out, "W.pgm"))
    files = _update_manifest(out, ["W.pgm"])
    verify_artifacts(out)
    return files


def verify_artifacts(out_dir: str) -> None:
    """Check that every manifest entry exists and loads back cleanly.

    C.csv and W.csv additionally get their structural invariants checked:
    row-stochastic zero-diagonal coefficients, symmetric nonnegative
    weights.
    """
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    names = load_manifest(manifest_path)
    for name in names:
        path = os.path.join(out_dir, name)
        if not os.path.exists(path):
            raise ValueError(f"manifest entry missing on disk: {name}")
        if name == "labels.csv":
            load_labels(path)
        elif name == "metrics.txt":
            load_metrics_report(path)
        elif name.endswith("loss.csv"):
            load_loss_history(path)
        elif name == "C.csv":
            check_coefficient_matrix(load_matrix(path))
        elif name == "W.csv":
            w = load_matrix(path)
            if np.max(np.abs(w - w.T)) > 1e-12 or np.any(w < 0.0):
                raise ValueError("persisted W.csv is not symmetric nonnegative")
        elif name.endswith(".pgm"):
            with open(path, "rb") as fh:
                if fh.read(2) != b"P5":
                    raise ValueError(f"{name} is not a binary PGM file")
        elif name.endswith("_manifest.txt"):
            load_mlp_params(out_dir, name.removesuffix("_manifest.txt"))
        elif name.endswith(".csv"):
            load_matrix(path)
        else:
            raise ValueError(f"manifest entry {name!r} has no known loader")
