"""File formats for run artifacts.

Matrices travel as headerless CSV with one row per line and values in
17-significant-digit scientific notation, which round-trips float64 exactly:
write -> read -> write reproduces the bytes.  Labels are one integer per
line.  Metrics go out as fixed ``key=value`` lines, affinity heatmaps as
binary PGM (P5), and every run directory carries a manifest of one relative
path per line.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .encoder import LinearLayer
from .linalg import as_label_vector, as_matrix

__all__ = [
    "save_matrix",
    "load_matrix",
    "save_labels",
    "load_labels",
    "save_loss_history",
    "load_loss_history",
    "save_mlp_params",
    "load_mlp_params",
    "save_metrics_report",
    "load_metrics_report",
    "write_pgm_heatmap",
    "save_manifest",
    "load_manifest",
]

_VALUE_FMT = "%.16e"  # 17 significant digits


def save_matrix(path, a) -> None:
    a = as_matrix(a, "matrix to save")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in a:
            fh.write(",".join(_VALUE_FMT % v for v in row))
            fh.write("\n")


def load_matrix(path) -> np.ndarray:
    a = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return as_matrix(a, f"matrix from {path}")


def save_labels(path, labels) -> None:
    labels = as_label_vector(labels, "labels to save")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in labels:
            fh.write(f"{int(v)}\n")


def load_labels(path) -> np.ndarray:
    raw = np.loadtxt(path, dtype=np.int64, ndmin=1)
    return as_label_vector(raw, f"labels from {path}")


def save_loss_history(path, losses) -> None:
    """CSV of (epoch, loss), no header."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for epoch, loss in enumerate(losses):
            fh.write(f"{epoch},{_VALUE_FMT % loss}\n")


def load_loss_history(path) -> list[float]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read().strip()
    if not text:  # zero-epoch run
        return []
    rows = np.loadtxt(io.StringIO(text), delimiter=",", dtype=np.float64, ndmin=2)
    return [float(v) for v in rows[:, 1]]


# -- MLP parameter bundles --------------------------------------------------

def save_mlp_params(out_dir, prefix: str, layers: list[LinearLayer]) -> list[str]:
    """One CSV per weight/bias plus ``<prefix>_manifest.txt`` of shapes.

    Returns the written file names, relative to ``out_dir``.
    """
    written = []
    manifest_lines = []
    for i, layer in enumerate(layers):
        for part, value in (("weight", layer.weight), ("bias", layer.bias)):
            fname = f"{prefix}_layer{i}_{part}.csv"
            save_matrix(os.path.join(out_dir, fname), value)
            manifest_lines.append(f"{fname} {value.shape[0]} {value.shape[1]}")
            written.append(fname)
    manifest_name = f"{prefix}_manifest.txt"
    with open(os.path.join(out_dir, manifest_name), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(manifest_lines) + "\n")
    written.append(manifest_name)
    return written


def load_mlp_params(out_dir, prefix: str) -> list[LinearLayer]:
    manifest_path = os.path.join(out_dir, f"{prefix}_manifest.txt")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        entries = [line.split() for line in fh if line.strip()]
    by_name = {}
    for fname, rows, cols in entries:
        value = load_matrix(os.path.join(out_dir, fname))
        if value.shape != (int(rows), int(cols)):
            raise ValueError(
                f"{fname}: shape {value.shape} does not match manifest "
                f"({rows}, {cols})"
            )
        by_name[fname] = value
    layers = []
    i = 0
    while f"{prefix}_layer{i}_weight.csv" in by_name:
        layers.append(
            LinearLayer(
                by_name[f"{prefix}_layer{i}_weight.csv"],
                by_name[f"{prefix}_layer{i}_bias.csv"],
            )
        )
        i += 1
    if not layers:
        raise ValueError(f"no layers found for prefix {prefix!r} in {out_dir}")
    return layers


# -- metrics report ---------------------------------------------------------

_METRIC_KEYS = ("acc", "nmi", "n", "k_true", "k_pred", "seed")


def save_metrics_report(path, report) -> None:
    """Fixed ``key=value`` lines: acc, nmi, n, k_true, k_pred, seed."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"acc={report.acc:.12g}\n")
        fh.write(f"nmi={report.nmi:.12g}\n")
        fh.write(f"n={report.n}\n")
        fh.write(f"k_true={report.k_true}\n")
        fh.write(f"k_pred={report.k_pred}\n")
        fh.write(f"seed={report.seed}\n")


def load_metrics_report(path) -> dict:
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            if key not in _METRIC_KEYS:
                raise ValueError(f"unknown metrics key {key!r} in {path}")
            out[key] = float(value) if key in ("acc", "nmi") else int(value)
    missing = [k for k in _METRIC_KEYS if k not in out]
    if missing:
        raise ValueError(f"metrics report {path} missing keys: {missing}")
    return out


# -- affinity heatmap -------------------------------------------------------

def write_pgm_heatmap(path, w) -> None:
    """8-bit binary PGM; pixel = round(255 * w_ij / max(W)), all-zero -> black."""
    w = as_matrix(w, "heatmap input")
    if w.shape[0] != w.shape[1]:
        raise ValueError(f"heatmap input must be square, got shape {w.shape}")
    peak = float(np.max(w))
    if peak <= 0.0:
        pixels = np.zeros(w.shape, dtype=np.uint8)
    else:
        pixels = np.rint(255.0 * w / peak).astype(np.uint8)
    rows, cols = w.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


# -- run manifest -----------------------------------------------------------

def save_manifest(path, entries: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in entries:
            fh.write(entry + "\n")


def load_manifest(path) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]
