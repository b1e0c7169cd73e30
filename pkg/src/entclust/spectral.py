"""Affinity matrix to cluster labels: Laplacian, eigenmap, k-means.

Symmetric normalized Laplacian, embedding by the k smallest eigenpairs
with row normalization, then seeded k-means++ with restarts.  Every stage
is deterministic per (input, config, seed); restart seeds are derived from
the master seed by index so the winner does not depend on scheduling.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .linalg import SYM_EIG_ASYMMETRY_TOL, as_matrix, sym_eig

__all__ = [
    "SpectralConfig",
    "normalized_laplacian",
    "spectral_embed",
    "kmeans",
    "spectral_cluster",
]


@dataclass(frozen=True)
class SpectralConfig:
    clusters: int
    kmeans_restarts: int = 20
    kmeans_max_iters: int = 300
    degree_floor: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.clusters < 2:
            raise ValueError(f"clusters must be >= 2, got {self.clusters}")
        if self.kmeans_restarts < 1:
            raise ValueError(f"kmeans_restarts must be >= 1, got {self.kmeans_restarts}")
        if self.kmeans_max_iters < 1:
            raise ValueError(f"kmeans_max_iters must be >= 1, got {self.kmeans_max_iters}")
        if self.degree_floor < 0.0:
            raise ValueError(f"degree_floor must be >= 0, got {self.degree_floor}")


def _check_affinity(w: np.ndarray) -> np.ndarray:
    """Validate symmetry and nonnegativity, then symmetrize exactly."""
    n = w.shape[0]
    if w.shape[1] != n:
        raise ValueError(f"affinity must be square, got shape {w.shape}")
    gap = float(np.max(np.abs(w - w.T))) if n else 0.0
    if gap > SYM_EIG_ASYMMETRY_TOL:
        raise ValueError(f"affinity asymmetry {gap:.3e} exceeds {SYM_EIG_ASYMMETRY_TOL:.1e}")
    if np.any(w < 0.0):
        raise ValueError("affinity entries must be nonnegative")
    return (w + w.T) / 2.0


def normalized_laplacian(w, degree_floor: float = 1e-12) -> np.ndarray:
    """L = I - D^(-1/2) W D^(-1/2) with degrees clamped from below.

    With a zero floor an isolated vertex (zero degree) is rejected by
    index instead of dividing by zero.
    """
    w = _check_affinity(as_matrix(w, "affinity"))
    if degree_floor < 0.0:
        raise ValueError(f"degree_floor must be >= 0, got {degree_floor}")
    n = w.shape[0]
    degrees = np.sum(w, axis=1)
    if degree_floor == 0.0 and np.any(degrees == 0.0):
        vertex = int(np.flatnonzero(degrees == 0.0)[0])
        raise ValueError(f"vertex {vertex} is isolated (zero degree) and degree_floor is 0")
    inv_sqrt = 1.0 / np.sqrt(np.maximum(degrees, degree_floor))
    lap = -(w * inv_sqrt[:, None]) * inv_sqrt[None, :]
    lap[np.arange(n), np.arange(n)] += 1.0
    return (lap + lap.T) / 2.0


def spectral_embed(w, k: int, degree_floor: float = 1e-12) -> np.ndarray:
    """Rows of the k smallest Laplacian eigenvectors, L2-normalized.

    Rows that are exactly zero before normalization stay zero and are
    reported with a warning rather than rejected.
    """
    w = as_matrix(w, "affinity")
    n = w.shape[0]
    if not (1 <= k <= n):
        raise ValueError(f"embedding dimension k={k} must lie in [1, {n}]")
    lap = normalized_laplacian(w, degree_floor)
    decomposition = sym_eig(lap)
    e = decomposition.eigenvectors[:, :k].copy()
    norms = np.linalg.norm(e, axis=1)
    zero = norms == 0.0
    if np.any(zero):
        rows = [int(i) for i in np.flatnonzero(zero)]
        warnings.warn(f"spectral embedding rows {rows} are zero and stay unnormalized")
        norms = np.where(zero, 1.0, norms)
    return e / norms[:, None]


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.sum(diff * diff, axis=2)


def _plus_plus_centers(points: np.ndarray, k: int, rng) -> np.ndarray:
    """Seeding by squared-distance-weighted draws; ties fall back to uniform."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:  # all remaining points coincide with chosen centers
            idx = int(rng.integers(n))
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(points: np.ndarray, k: int, rng, max_iters: int):
    """One seeded k-means run; returns (labels, inertia, inertia history).

    The history records inertia after each center update; the sequence is
    non-increasing, including across empty-cluster repairs, because a
    seized point becomes its cluster's sole member and recenters onto it.
    """
    n = points.shape[0]
    centers = _plus_plus_centers(points, k, rng)
    labels = np.full(n, -1)
    history: list[float] = []
    for _ in range(max_iters):
        d2 = _sq_dists(points, centers)
        new_labels = np.argmin(d2, axis=1)
        counts = np.bincount(new_labels, minlength=k)
        own = d2[np.arange(n), new_labels].copy()
        for j in range(k):
            if counts[j] == 0:
                # Seize the farthest point, but never a cluster's last member.
                eligible = counts[new_labels] > 1
                victim = int(np.argmax(np.where(eligible, own, -np.inf)))
                counts[new_labels[victim]] -= 1
                new_labels[victim] = j
                counts[j] = 1
                own[victim] = -np.inf
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centers[j] = points[labels == j].mean(axis=0)
        history.append(float(np.sum(_sq_dists(points, centers)[np.arange(n), labels])))
    inertia = float(np.sum(_sq_dists(points, centers)[np.arange(n), labels]))
    return labels, inertia, history


def kmeans(e, cfg: SpectralConfig) -> np.ndarray:
    """Best-of-restarts k-means labels; winner by (inertia, restart index)."""
    e = as_matrix(e, "embedding")
    n = e.shape[0]
    if n < cfg.clusters:
        raise ValueError(f"cannot split {n} points into {cfg.clusters} clusters")
    best_inertia = np.inf
    best_labels = None
    for restart in range(cfg.kmeans_restarts):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, restart]))
        labels, inertia, _ = _lloyd(e, cfg.clusters, rng, cfg.kmeans_max_iters)
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    return best_labels


def spectral_cluster(w, cfg: SpectralConfig) -> np.ndarray:
    """Labels for an affinity matrix: embed the graph, then cluster rows."""
    embedding = spectral_embed(w, cfg.clusters, cfg.degree_floor)
    return kmeans(embedding, cfg)
