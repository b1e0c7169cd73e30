"""Experiment configuration: `key = value` files, presets, validation.

The file format is one dotted key per line (`cluster.lambda2 = 75.0`),
`#` comments, UTF-8.  Unknown keys, type mismatches, and constraint
violations are rejected with the file name and line number.  Presets
apply before the file, so explicit lines win over preset values.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .augment import AugmentConfig
from .contrastive import PretrainConfig
from .datasets import SynthConfig
from .selfexpr import ENTROPY_MODES, ClusterStageConfig
from .spectral import SpectralConfig

__all__ = ["ExperimentConfig", "PRESETS", "load_config", "override_seed"]

DATA_SOURCES = ("synth", "synth-images", "idx", "csv")


def _parse_int(text: str) -> int:
    return int(text, 10)


def _parse_float(text: str) -> float:
    return float(text)


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError("expected 'true' or 'false'")


def _parse_str(text: str) -> str:
    return text


def _parse_int_list(text: str) -> tuple[int, ...]:
    if not text:
        return ()
    return tuple(int(part.strip(), 10) for part in text.split(","))


# key -> (parser, default, constraint predicate, constraint description)
_SCHEMA = {
    "seed": (_parse_int, 0, lambda v: v >= 0, "must be >= 0"),
    "output_dir": (_parse_str, "out", lambda v: bool(v), "must be non-empty"),
    "data.source": (_parse_str, "synth", lambda v: v in DATA_SOURCES,
                    f"must be one of {', '.join(DATA_SOURCES)}"),
    "data.idx_images": (_parse_str, "", None, None),
    "data.idx_labels": (_parse_str, "", None, None),
    "data.csv_samples": (_parse_str, "", None, None),
    "data.csv_labels": (_parse_str, "", None, None),
    "data.per_class": (_parse_int, 0, lambda v: v >= 0, "must be >= 0 (0 keeps everything)"),
    "data.image_height": (_parse_int, 0, lambda v: v >= 0, "must be >= 0"),
    "data.image_width": (_parse_int, 0, lambda v: v >= 0, "must be >= 0"),
    "data.image_channels": (_parse_int, 0, lambda v: v in (0, 1, 3),
                            "must be 0 (auto), 1, or 3"),
    "synth.clusters": (_parse_int, 3, lambda v: v >= 2, "must be >= 2"),
    "synth.subspace_dim": (_parse_int, 2, lambda v: v >= 1, "must be >= 1"),
    "synth.ambient_dim": (_parse_int, 20, lambda v: v >= 1, "must be >= 1"),
    "synth.points_per_cluster": (_parse_int, 100, lambda v: v >= 1, "must be >= 1"),
    "synth.noise_sigma": (_parse_float, 0.0, lambda v: v >= 0.0, "must be >= 0"),
    "synth_images.classes": (_parse_int, 10, lambda v: v >= 2, "must be >= 2"),
    "synth_images.per_class": (_parse_int, 100, lambda v: v >= 1, "must be >= 1"),
    "synth_images.height": (_parse_int, 8, lambda v: v >= 1, "must be >= 1"),
    "synth_images.width": (_parse_int, 8, lambda v: v >= 1, "must be >= 1"),
    "synth_images.noise_sigma": (_parse_float, 0.05, lambda v: v >= 0.0, "must be >= 0"),
    "augment.output_size": (_parse_int, 0, lambda v: v >= 0, "must be >= 0 (0 = input size)"),
    "augment.crop_scale_lo": (_parse_float, 0.5, lambda v: 0.0 < v <= 1.0, "must be in (0, 1]"),
    "augment.crop_scale_hi": (_parse_float, 1.0, lambda v: 0.0 < v <= 1.0, "must be in (0, 1]"),
    "augment.rotation_max_degrees": (_parse_float, 15.0, lambda v: v >= 0.0, "must be >= 0"),
    "augment.jitter_strength": (_parse_float, 0.4, lambda v: v >= 0.0, "must be >= 0"),
    "augment.blur_sigma_lo": (_parse_float, 0.1, lambda v: v > 0.0, "must be > 0"),
    "augment.blur_sigma_hi": (_parse_float, 1.0, lambda v: v > 0.0, "must be > 0"),
    "augment.grayscale_prob": (_parse_float, 0.2, lambda v: 0.0 <= v <= 1.0, "must be in [0, 1]"),
    "augment.flip_prob": (_parse_float, 0.5, lambda v: 0.0 <= v <= 1.0, "must be in [0, 1]"),
    "augment.enable_crop": (_parse_bool, True, None, None),
    "augment.enable_flip": (_parse_bool, True, None, None),
    "augment.enable_rotation": (_parse_bool, True, None, None),
    "augment.enable_jitter": (_parse_bool, True, None, None),
    "augment.enable_grayscale": (_parse_bool, True, None, None),
    "augment.enable_blur": (_parse_bool, True, None, None),
    "encoder.widths": (_parse_int_list, (), lambda v: all(w >= 1 for w in v),
                       "every width must be >= 1"),
    "encoder.projection_widths": (_parse_int_list, (), lambda v: all(w >= 1 for w in v),
                                  "every width must be >= 1"),
    "pretrain.temperature": (_parse_float, 0.5, lambda v: v > 0.0, "must be > 0"),
    "pretrain.batch_size": (_parse_int, 64, lambda v: v >= 2, "must be >= 2"),
    "pretrain.epochs": (_parse_int, 10, lambda v: v >= 0, "must be >= 0"),
    "pretrain.learning_rate": (_parse_float, 3.0e-4, lambda v: v > 0.0, "must be > 0"),
    "cluster.lambda1": (_parse_float, 1.0, lambda v: v >= 0.0, "must be >= 0"),
    "cluster.lambda2": (_parse_float, 75.0, lambda v: v >= 0.0, "must be >= 0"),
    "cluster.learning_rate": (_parse_float, 1.0e-5, lambda v: v > 0.0, "must be > 0"),
    "cluster.epochs": (_parse_int, 100, lambda v: v >= 0, "must be >= 0"),
    "cluster.entropy_mode": (_parse_str, "mean-scaled", lambda v: v in ENTROPY_MODES,
                             f"must be one of {', '.join(ENTROPY_MODES)}"),
    "cluster.fine_tune_projection": (_parse_bool, False, None, None),
    "spectral.clusters": (_parse_int, 0, lambda v: v == 0 or v >= 2,
                          "must be 0 (infer from labels) or >= 2"),
    "spectral.kmeans_restarts": (_parse_int, 20, lambda v: v >= 1, "must be >= 1"),
    "spectral.kmeans_max_iters": (_parse_int, 300, lambda v: v >= 1, "must be >= 1"),
    "spectral.degree_floor": (_parse_float, 1e-12, lambda v: v >= 0.0, "must be >= 0"),
}

# Presets carry published per-dataset trade-off values plus the matching
# cluster counts; file lines override them.
PRESETS: dict[str, dict[str, str]] = {
    "default": {},
    "coil20": {
        "cluster.lambda1": "1.0",
        "cluster.lambda2": "75.0",
        "spectral.clusters": "20",
        "augment.output_size": "64",
    },
    "coil40": {
        "cluster.lambda1": "1.0",
        "cluster.lambda2": "75.0",
        "spectral.clusters": "40",
        "augment.output_size": "64",
    },
    "coil100": {
        "cluster.lambda1": "1.0",
        "cluster.lambda2": "15.0",
        "spectral.clusters": "100",
        "augment.output_size": "64",
    },
    "oxflowers17-a": {
        "cluster.lambda1": "0.1",
        "cluster.lambda2": "10.0",
        "spectral.clusters": "17",
    },
    "oxflowers17-b": {
        "cluster.lambda1": "1.0",
        "cluster.lambda2": "6.0",
        "spectral.clusters": "17",
    },
    "mnist1000": {
        "data.per_class": "100",
        "spectral.clusters": "10",
    },
}


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    output_dir: str
    data_source: str
    idx_images: str
    idx_labels: str
    csv_samples: str
    csv_labels: str
    per_class: int
    image_height: int
    image_width: int
    image_channels: int
    synth: SynthConfig
    synth_image_classes: int
    synth_image_per_class: int
    synth_image_height: int
    synth_image_width: int
    synth_image_noise_sigma: float
    augment_values: dict
    encoder_widths: tuple[int, ...]
    projection_widths: tuple[int, ...]
    pretrain: PretrainConfig
    cluster: ClusterStageConfig
    spectral_clusters: int
    kmeans_restarts: int
    kmeans_max_iters: int
    degree_floor: float

    def augment_config(self, height: int, width: int) -> AugmentConfig:
        """Resolve output_size=0 to the source image size (square only)."""
        size = self.augment_values["output_size"]
        if size == 0:
            if height != width:
                raise ValueError(
                    f"augment.output_size must be set explicitly for non-square "
                    f"{height}x{width} images"
                )
            size = height
        v = self.augment_values
        return AugmentConfig(
            output_size=size,
            crop_scale=(v["crop_scale_lo"], v["crop_scale_hi"]),
            rotation_max_degrees=v["rotation_max_degrees"],
            jitter_strength=v["jitter_strength"],
            blur_sigma=(v["blur_sigma_lo"], v["blur_sigma_hi"]),
            grayscale_prob=v["grayscale_prob"],
            flip_prob=v["flip_prob"],
            enable_crop=v["enable_crop"],
            enable_flip=v["enable_flip"],
            enable_rotation=v["enable_rotation"],
            enable_jitter=v["enable_jitter"],
            enable_grayscale=v["enable_grayscale"],
            enable_blur=v["enable_blur"],
        )

    def spectral_config(self, inferred_clusters: int) -> SpectralConfig:
        """Resolve clusters=0 to the count inferred from the dataset labels."""
        k = self.spectral_clusters if self.spectral_clusters else inferred_clusters
        return SpectralConfig(
            clusters=k,
            kmeans_restarts=self.kmeans_restarts,
            kmeans_max_iters=self.kmeans_max_iters,
            degree_floor=self.degree_floor,
            seed=self.seed,
        )


def override_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    """New config with the master seed pushed into every nested config."""
    if seed < 0:
        raise ValueError(f"seed must be >= 0, got {seed}")
    return replace(
        cfg,
        seed=seed,
        pretrain=replace(cfg.pretrain, seed=seed),
        cluster=replace(cfg.cluster, seed=seed),
    )


def _parse_lines(path: str) -> dict[str, tuple[str, str]]:
    entries: dict[str, tuple[str, str]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            where = f"{path}:{line_no}"
            if "=" not in line:
                raise ValueError(f"{where}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _SCHEMA:
                raise ValueError(f"{where}: unknown key {key!r}")
            if key in entries:
                raise ValueError(f"{where}: duplicate key {key!r} (first at {entries[key][1]})")
            entries[key] = (value, where)
    return entries


def _typed_values(entries: dict[str, tuple[str, str]]) -> dict:
    typed = {key: default for key, (_, default, _, _) in _SCHEMA.items()}
    for key, (text, where) in entries.items():
        parser, _, check, constraint = _SCHEMA[key]
        try:
            value = parser(text)
        except ValueError:
            raise ValueError(
                f"{where}: value {text!r} for {key} is not a valid "
                f"{parser.__name__.removeprefix('_parse_').replace('_', ' ')}"
            ) from None
        if check is not None and not check(value):
            raise ValueError(f"{where}: {key} {constraint}, got {text}")
        typed[key] = value
    return typed


def _build(typed: dict) -> ExperimentConfig:
    def group(exc: ValueError, label: str):
        return ValueError(f"invalid {label} configuration: {exc}")

    try:
        synth = SynthConfig(
            clusters=typed["synth.clusters"],
            subspace_dim=typed["synth.subspace_dim"],
            ambient_dim=typed["synth.ambient_dim"],
            points_per_cluster=typed["synth.points_per_cluster"],
            noise_sigma=typed["synth.noise_sigma"],
        )
    except ValueError as exc:
        raise group(exc, "synth.*") from None
    try:
        pretrain = PretrainConfig(
            temperature=typed["pretrain.temperature"],
            batch_size=typed["pretrain.batch_size"],
            epochs=typed["pretrain.epochs"],
            learning_rate=typed["pretrain.learning_rate"],
            seed=typed["seed"],
        )
    except ValueError as exc:
        raise group(exc, "pretrain.*") from None
    try:
        cluster = ClusterStageConfig(
            lambda1=typed["cluster.lambda1"],
            lambda2=typed["cluster.lambda2"],
            learning_rate=typed["cluster.learning_rate"],
            epochs=typed["cluster.epochs"],
            entropy_mode=typed["cluster.entropy_mode"],
            fine_tune_projection=typed["cluster.fine_tune_projection"],
            seed=typed["seed"],
        )
    except ValueError as exc:
        raise group(exc, "cluster.*") from None

    if typed["augment.crop_scale_lo"] > typed["augment.crop_scale_hi"]:
        raise ValueError("augment.crop_scale_lo must not exceed augment.crop_scale_hi")
    if typed["augment.blur_sigma_lo"] > typed["augment.blur_sigma_hi"]:
        raise ValueError("augment.blur_sigma_lo must not exceed augment.blur_sigma_hi")
    source = typed["data.source"]
    if source == "idx" and not (typed["data.idx_images"] and typed["data.idx_labels"]):
        raise ValueError("data.source = idx requires data.idx_images and data.idx_labels")
    if source == "csv" and not typed["data.csv_samples"]:
        raise ValueError("data.source = csv requires data.csv_samples")

    augment_values = {
        key.removeprefix("augment."): typed[key]
        for key in _SCHEMA
        if key.startswith("augment.")
    }
    return ExperimentConfig(
        seed=typed["seed"],
        output_dir=typed["output_dir"],
        data_source=source,
        idx_images=typed["data.idx_images"],
        idx_labels=typed["data.idx_labels"],
        csv_samples=typed["data.csv_samples"],
        csv_labels=typed["data.csv_labels"],
        per_class=typed["data.per_class"],
        image_height=typed["data.image_height"],
        image_width=typed["data.image_width"],
        image_channels=typed["data.image_channels"],
        synth=synth,
        synth_image_classes=typed["synth_images.classes"],
        synth_image_per_class=typed["synth_images.per_class"],
        synth_image_height=typed["synth_images.height"],
        synth_image_width=typed["synth_images.width"],
        synth_image_noise_sigma=typed["synth_images.noise_sigma"],
        augment_values=augment_values,
        encoder_widths=typed["encoder.widths"],
        projection_widths=typed["encoder.projection_widths"],
        pretrain=pretrain,
        cluster=cluster,
        spectral_clusters=typed["spectral.clusters"],
        kmeans_restarts=typed["spectral.kmeans_restarts"],
        kmeans_max_iters=typed["spectral.kmeans_max_iters"],
        degree_floor=typed["spectral.degree_floor"],
    )


def load_config(path: Optional[str] = None, preset: Optional[str] = None) -> ExperimentConfig:
    """Config from preset values overlaid with the optional file."""
    preset = preset or "default"
    if preset not in PRESETS:
        known = ", ".join(sorted(PRESETS))
        raise ValueError(f"unknown preset {preset!r}; available: {known}")
    entries = {
        key: (value, f"preset {preset}") for key, value in PRESETS[preset].items()
    }
    if path is not None:
        entries |= _parse_lines(path)
    return _build(_typed_values(entries))
