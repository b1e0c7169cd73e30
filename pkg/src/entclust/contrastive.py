"""Contrastive pre-training: similarity, paired-view loss, training loop.

A batch of N images becomes 2N augmented views whose rows interleave the
two views of each sample: rows (2k, 2k+1) are a positive pair.  The loss
for a row is the negative log-probability of its partner under a softmax
over that row's similarities to every other row (only the row itself is
excluded from the denominator).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augment import AugmentConfig, augment_pair
from .autodiff import Node, Tape, normalize_rows_kernel, softmax_rows_kernel
from .datasets import ImageBatch
from .encoder import (
    LinearLayer,
    MlpConfig,
    dict_to_params,
    encode_on_tape,
    init_params,
    params_to_dict,
    register_param_leaves,
)
from .linalg import as_matrix
from .optim import AdamState, adam_step

__all__ = [
    "PretrainConfig",
    "cosine_sim_matrix",
    "nt_xent_pair",
    "pair_mask",
    "pretrain_loss",
    "pretrain_loss_on_tape",
    "pretrain",
]


@dataclass(frozen=True)
class PretrainConfig:
    temperature: float = 0.5
    batch_size: int = 64
    epochs: int = 10
    learning_rate: float = 3.0e-4
    seed: int = 0

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")


def _check_paired_rows(two_n: int):
    if two_n % 2 != 0:
        raise ValueError(f"paired views need an even row count, got {two_n}")
    if two_n < 4:
        raise ValueError(
            f"need at least two sample pairs (4 rows), got {two_n}: "
            "a single pair has no negatives"
        )


def pair_mask(two_n: int) -> np.ndarray:
    """0/1 matrix marking each row's positive partner (rows 2k and 2k+1)."""
    _check_paired_rows(two_n)
    mask = np.zeros((two_n, two_n))
    idx = np.arange(two_n)
    mask[idx, idx ^ 1] = 1.0
    return mask


def cosine_sim_matrix(z) -> np.ndarray:
    """Pairwise cosine similarities of the rows of z; diagonal is 1."""
    z = as_matrix(z, "embeddings")
    zn = normalize_rows_kernel(z)
    return zn @ zn.T


def nt_xent_pair(sim, i: int, j: int, temperature: float) -> float:
    """Loss of the ordered positive pair (i, j) given a similarity matrix.

    Computes -log softmax(sim[i]/T)[j] with entry i removed from the
    denominator, via a max-shifted sum of exponentials.  This arithmetic is
    deliberately independent of the training-path softmax so the two can
    cross-check each other.
    """
    sim = as_matrix(sim, "similarity")
    n = sim.shape[0]
    if sim.shape[1] != n:
        raise ValueError(f"similarity matrix must be square, got {sim.shape}")
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"pair indices ({i}, {j}) out of range for {n} rows")
    if i == j:
        raise ValueError("a row cannot be its own positive pair")
    if temperature <= 0.0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    row = sim[i] / temperature
    others = np.delete(row, i)
    m = np.max(others)
    log_denominator = m + np.log(np.sum(np.exp(others - m)))
    return float(log_denominator - row[j])


def pretrain_loss(z, temperature: float = 0.5) -> float:
    """Mean pair loss over interleaved view rows (2k, 2k+1)."""
    z = as_matrix(z, "embeddings")
    if temperature <= 0.0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    two_n = z.shape[0]
    _check_paired_rows(two_n)
    sim = normalize_rows_kernel(z)
    sim = sim @ sim.T
    # Mirrors the tape composition operation for operation so both paths
    # produce bit-identical values.
    logits = sim * (1.0 / temperature)
    p = softmax_rows_kernel(logits, excluded=np.eye(two_n, dtype=bool))
    mask = pair_mask(two_n)
    picked = mask * np.log(p + (1.0 - mask))
    return float(np.sum(picked) * (-1.0 / two_n))


def pretrain_loss_on_tape(tape: Tape, z: Node, temperature: float) -> Node:
    """Tape version of pretrain_loss for gradient flow into the encoder.

    The partner entries are selected by multiplying with a 0/1 mask after
    shifting the unselected probabilities by +1, so the logarithm never sees
    the structurally zero diagonal.
    """
    if temperature <= 0.0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    two_n = z.shape[0]
    _check_paired_rows(two_n)
    zn = tape.row_normalize(z)
    sim = tape.matmul(zn, tape.transpose(zn))
    logits = tape.scale(sim, 1.0 / temperature)
    p = tape.row_softmax(logits, excluded=np.eye(two_n, dtype=bool))
    mask = pair_mask(two_n)
    shifted = tape.add(p, tape.constant(1.0 - mask, name="partner filler"))
    picked = tape.multiply(tape.constant(mask, name="partner mask"), tape.log(shifted))
    return tape.scale(tape.sum(picked), -1.0 / two_n)


def _augmented_batch(
    images: ImageBatch,
    batch_indices: np.ndarray,
    aug_cfg: AugmentConfig,
    seed: int,
    epoch: int,
) -> np.ndarray:
    """Interleaved flattened view matrix for one batch of sample indices.

    Each sample's draw stream depends only on (seed, epoch, sample index),
    never on batch membership or processing order.
    """
    width = images.channels * aug_cfg.output_size * aug_cfg.output_size
    views = np.empty((2 * batch_indices.size, width))
    for slot, sample_index in enumerate(batch_indices):
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, epoch, int(sample_index)])
        )
        view_a, view_b = augment_pair(images.values[sample_index], aug_cfg, rng)
        views[2 * slot] = view_a.reshape(-1)
        views[2 * slot + 1] = view_b.reshape(-1)
    return views


def pretrain(
    images: ImageBatch,
    encoder_cfg: MlpConfig,
    projection_cfg: MlpConfig,
    aug_cfg: AugmentConfig,
    cfg: PretrainConfig,
) -> tuple[list[LinearLayer], list[LinearLayer], list[float]]:
    """Train encoder and projection head on augmented pairs with Adam.

    Returns the trained layers and the per-epoch mean loss (weighted by
    views, so unequal batch sizes do not skew the epoch average).  With
    epochs=0 the freshly initialized parameters come back untouched.
    """
    if images.count < 2:
        raise ValueError(f"need at least 2 samples to form a pair batch, got {images.count}")
    flat_width = images.channels * aug_cfg.output_size * aug_cfg.output_size
    if encoder_cfg.input_width != flat_width:
        raise ValueError(
            f"encoder input width {encoder_cfg.input_width} does not match "
            f"augmented view width {flat_width} "
            f"({images.channels} x {aug_cfg.output_size} x {aug_cfg.output_size})"
        )
    if len(projection_cfg.layer_widths) != 3:
        raise ValueError(
            f"projection head must have exactly 2 layers (3 widths), "
            f"got widths {projection_cfg.layer_widths}"
        )
    if projection_cfg.input_width != encoder_cfg.output_width:
        raise ValueError(
            f"projection input width {projection_cfg.input_width} does not match "
            f"encoder output width {encoder_cfg.output_width}"
        )
    aug_cfg.validate_for(images.height, images.width)

    enc_layers = init_params(encoder_cfg, cfg.seed)
    proj_layers = init_params(projection_cfg, cfg.seed + 1)
    state = AdamState.for_params(
        params_to_dict(enc_layers, "encoder") | params_to_dict(proj_layers, "projection"),
        cfg.learning_rate,
    )

    history: list[float] = []
    for epoch in range(cfg.epochs):
        order = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, epoch])
        ).permutation(images.count)
        loss_total = 0.0
        views_total = 0
        for start in range(0, images.count, cfg.batch_size):
            batch_indices = order[start : start + cfg.batch_size]
            if batch_indices.size < 2:
                break  # final partial batch too small to provide negatives
            views = _augmented_batch(images, batch_indices, aug_cfg, cfg.seed, epoch)

            tape = Tape()
            enc_nodes = register_param_leaves(tape, enc_layers, "encoder")
            proj_nodes = register_param_leaves(tape, proj_layers, "projection")
            x = tape.constant(views, name="views")
            h = encode_on_tape(tape, enc_nodes, x)
            z = encode_on_tape(tape, proj_nodes, h)
            loss = pretrain_loss_on_tape(tape, z, cfg.temperature)

            node_grads = tape.gradients(loss)
            grads = {node.name: g for node, g in node_grads.items()}
            params = params_to_dict(enc_layers, "encoder") | params_to_dict(
                proj_layers, "projection"
            )
            params = adam_step(params, grads, state)
            enc_layers = dict_to_params(params, "encoder", len(enc_layers))
            proj_layers = dict_to_params(params, "projection", len(proj_layers))

            loss_total += float(loss.value) * 2 * batch_indices.size
            views_total += 2 * batch_indices.size
        history.append(loss_total / views_total)
    return enc_layers, proj_layers, history
