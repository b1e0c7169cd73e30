"""Dataset ingestion and synthetic data generation.

Supports the IDX binary format (big-endian headers, unsigned-byte payload),
deterministic per-class subsampling, union-of-subspaces generation with
ground-truth labels, and a class-prototype image generator used as a drop-in
stand-in when no real image files are available.

Every randomized operation is a pure function of its inputs and seed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import BinaryIO, Optional

import numpy as np

from .linalg import as_label_vector, as_matrix

__all__ = [
    "LabeledDataset",
    "ImageBatch",
    "SynthConfig",
    "read_idx",
    "write_idx",
    "subsample_per_class",
    "synth_subspaces",
    "synth_image_classes",
]

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049


@dataclass
class LabeledDataset:
    """Row-per-sample matrix with optional integer ground-truth labels."""

    samples: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.samples = as_matrix(self.samples, "dataset samples")
        if self.labels is not None:
            self.labels = as_label_vector(self.labels, "dataset labels")
            if len(self.labels) != self.samples.shape[0]:
                raise ValueError(
                    f"{self.samples.shape[0]} samples but {len(self.labels)} labels"
                )
            k = int(self.labels.max()) + 1
            present = np.unique(self.labels)
            if self.labels.min() < 0:
                raise ValueError("labels must be non-negative")
            if len(present) != k:
                missing = sorted(set(range(k)) - set(present.tolist()))
                raise ValueError(f"label classes {missing} have no samples")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def n_classes(self) -> int:
        if self.labels is None:
            raise ValueError("dataset has no labels")
        return int(self.labels.max()) + 1


@dataclass
class ImageBatch:
    """Images as an (n, channels, height, width) array with values in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 4:
            raise ValueError(f"image batch must be 4-D (n, c, h, w), got shape {v.shape}")
        if v.shape[1] not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {v.shape[1]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("image batch contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("image values must lie in [0, 1]")
        self.values = v

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def channels(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[2]

    @property
    def width(self) -> int:
        return self.values.shape[3]

    @classmethod
    def from_matrix(cls, samples, height: int, width: int, channels: int = 1) -> "ImageBatch":
        samples = as_matrix(samples, "image samples")
        expected = channels * height * width
        if samples.shape[1] != expected:
            raise ValueError(
                f"sample width {samples.shape[1]} does not match "
                f"{channels}x{height}x{width} = {expected}"
            )
        return cls(samples.reshape(samples.shape[0], channels, height, width))

    def to_matrix(self) -> np.ndarray:
        return self.values.reshape(self.count, -1)


# -- IDX format -------------------------------------------------------------

def _read_exact(stream: BinaryIO, n: int, what: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise ValueError(f"short read: expected {n} bytes of {what}, got {len(data)}")
    return data


def read_idx(image_stream: BinaryIO, label_stream: BinaryIO) -> tuple[LabeledDataset, int, int]:
    """Parse paired IDX image/label streams.

    Pixels are mapped to [0, 1] by division by 255; labels are copied
    verbatim.  Returns the dataset plus the image height and width.
    """
    magic, count, rows, cols = struct.unpack(">IIII", _read_exact(image_stream, 16, "image header"))
    if magic != IDX_IMAGE_MAGIC:
        raise ValueError(f"not an IDX file: image magic {magic}, expected {IDX_IMAGE_MAGIC}")
    lmagic, lcount = struct.unpack(">II", _read_exact(label_stream, 8, "label header"))
    if lmagic != IDX_LABEL_MAGIC:
        raise ValueError(f"not an IDX file: label magic {lmagic}, expected {IDX_LABEL_MAGIC}")
    if count != lcount:
        raise ValueError(f"image/label count mismatch: {count} images vs {lcount} labels")

    payload = _read_exact(image_stream, count * rows * cols, "image payload")
    pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.float64) / 255.0
    labels = np.frombuffer(_read_exact(label_stream, count, "label payload"), dtype=np.uint8)
    ds = LabeledDataset(pixels.reshape(count, rows * cols), labels.astype(np.int64))
    return ds, int(rows), int(cols)


def write_idx(image_stream: BinaryIO, label_stream: BinaryIO, ds: LabeledDataset,
              height: int, width: int) -> None:
    """Inverse of read_idx (debug path); reproduces the payload bytes exactly."""
    if ds.labels is None:
        raise ValueError("cannot write IDX without labels")
    if ds.samples.shape[1] != height * width:
        raise ValueError(
            f"sample width {ds.samples.shape[1]} does not match {height}x{width}"
        )
    image_stream.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, ds.n, height, width))
    image_stream.write(np.rint(ds.samples * 255.0).astype(np.uint8).tobytes())
    label_stream.write(struct.pack(">II", IDX_LABEL_MAGIC, ds.n))
    label_stream.write(ds.labels.astype(np.uint8).tobytes())


# -- subsampling ------------------------------------------------------------

def subsample_per_class(ds: LabeledDataset, per_class: int, seed: int) -> LabeledDataset:
    """Exactly ``per_class`` samples of each class, shuffled by seed."""
    if ds.labels is None:
        raise ValueError("subsample_per_class needs a labeled dataset")
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    chosen = []
    for cls in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == cls)
        if len(members) < per_class:
            raise ValueError(
                f"class {cls} has only {len(members)} samples, need {per_class}"
            )
        chosen.append(rng.choice(members, size=per_class, replace=False))
    idx = np.concatenate(chosen)
    idx = idx[rng.permutation(len(idx))]
    return LabeledDataset(ds.samples[idx], ds.labels[idx])


# -- synthetic data ---------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Union-of-subspaces generator settings."""

    clusters: int
    subspace_dim: int
    ambient_dim: int
    points_per_cluster: int
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.clusters < 2:
            raise ValueError(f"need at least 2 clusters, got {self.clusters}")
        if self.subspace_dim < 1:
            raise ValueError(f"subspace dim must be >= 1, got {self.subspace_dim}")
        if self.subspace_dim >= self.ambient_dim:
            raise ValueError(
                f"subspace dim {self.subspace_dim} must be below ambient dim {self.ambient_dim}"
            )
        if self.points_per_cluster < self.subspace_dim + 1:
            raise ValueError(
                f"need at least {self.subspace_dim + 1} points per cluster, "
                f"got {self.points_per_cluster}"
            )
        if self.noise_sigma < 0.0:
            raise ValueError(f"noise sigma must be >= 0, got {self.noise_sigma}")


def synth_subspaces(cfg: SynthConfig, seed: int) -> LabeledDataset:
    """Labeled points on a union of random linear subspaces.

    Each cluster gets a random orthonormal basis (QR of a seeded Gaussian
    matrix); points are Gaussian combinations of the basis plus isotropic
    ambient noise of the configured sigma.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    blocks = []
    labels = []
    for cls in range(cfg.clusters):
        gauss = rng.normal(size=(cfg.ambient_dim, cfg.subspace_dim))
        basis, _ = np.linalg.qr(gauss)
        coeffs = rng.normal(size=(cfg.points_per_cluster, cfg.subspace_dim))
        points = coeffs @ basis.T
        if cfg.noise_sigma > 0.0:
            points = points + cfg.noise_sigma * rng.normal(size=points.shape)
        blocks.append(points)
        labels.append(np.full(cfg.points_per_cluster, cls, dtype=np.int64))
    return LabeledDataset(np.vstack(blocks), np.concatenate(labels))


def synth_image_classes(
    clusters: int,
    per_class: int,
    height: int,
    width: int,
    seed: int,
    noise_sigma: float = 0.05,
) -> tuple[LabeledDataset, ImageBatch]:
    """Class-prototype images: smooth random pattern per class plus noise.

    A stand-in for real image datasets in end-to-end smoke runs: classes are
    compact and well separated in pixel space, so any reasonable pipeline
    should beat chance on them.
    """
    if clusters < 2 or per_class < 1:
        raise ValueError("need clusters >= 2 and per_class >= 1")
    if height < 2 or width < 2:
        raise ValueError("images must be at least 2x2")
    if noise_sigma < 0.0:
        raise ValueError(f"noise sigma must be >= 0, got {noise_sigma}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    ys = np.linspace(0.0, 2.0, height)
    xs = np.linspace(0.0, 2.0, width)
    images = np.empty((clusters * per_class, 1, height, width))
    labels = np.empty(clusters * per_class, dtype=np.int64)
    row = 0
    for cls in range(clusters):
        # Low-frequency prototype: bilinear interpolation of a random 3x3 grid.
        grid = rng.uniform(0.0, 1.0, size=(3, 3))
        y0 = np.clip(np.floor(ys).astype(int), 0, 1)
        x0 = np.clip(np.floor(xs).astype(int), 0, 1)
        fy = (ys - y0)[:, None]
        fx = (xs - x0)[None, :]
        proto = (
            grid[y0][:, x0] * (1 - fy) * (1 - fx)
            + grid[y0][:, x0 + 1] * (1 - fy) * fx
            + grid[y0 + 1][:, x0] * fy * (1 - fx)
            + grid[y0 + 1][:, x0 + 1] * fy * fx
        )
        proto = 0.15 + 0.7 * (proto - proto.min()) / max(np.ptp(proto), 1e-12)
        for _ in range(per_class):
            img = proto + rng.normal(0.0, noise_sigma, size=proto.shape)
            images[row, 0] = np.clip(img, 0.0, 1.0)
            labels[row] = cls
            row += 1
    batch = ImageBatch(images)
    return LabeledDataset(batch.to_matrix(), labels), batch
