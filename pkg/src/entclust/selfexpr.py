"""Self-expressive coefficient learning with an entropy regularizer.

Each sample is reconstructed as a convex combination of the others: row i
of the coefficient matrix C holds the weights, sums to 1, and has a zero
diagonal entry.  Both constraints are enforced structurally by a masked
row-softmax over free logits, so the training problem stays unconstrained.
The loss trades squared reconstruction error against exp of the summed
entropy term, which rewards concentrated rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .autodiff import Node, Tape, softmax_rows_kernel, xlogx_kernel
from .encoder import (
    LinearLayer,
    dict_to_params,
    encode_on_tape,
    params_to_dict,
    project,
    register_param_leaves,
)
from .linalg import as_matrix
from .optim import AdamState, adam_step

__all__ = [
    "ClusterStageConfig",
    "ENTROPY_MODES",
    "coeff_from_logits",
    "check_coefficient_matrix",
    "entropy_term",
    "selfexpr_loss",
    "fit_coefficients",
    "affinity",
    "pairwise_distances",
    "ssc_entropy_rows",
    "ssc_entropy_baseline",
]

ENTROPY_MODES = ("literal", "mean-scaled")

# The mean-scaled mode divides the entropy sum by n before exponentiating.
# The literal mode underflows to exactly 0 (with vanishing gradient) once n
# reaches a few dozen, because the sum scales like -n times the row entropy;
# it is kept for small-n work and fidelity to the plain formula.


@dataclass(frozen=True)
class ClusterStageConfig:
    lambda1: float = 1.0
    lambda2: float = 75.0
    learning_rate: float = 1.0e-5
    epochs: int = 100
    entropy_mode: str = "mean-scaled"
    fine_tune_projection: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.lambda1 < 0.0 or self.lambda2 < 0.0:
            raise ValueError(
                f"lambda1 and lambda2 must be >= 0, got {self.lambda1}, {self.lambda2}"
            )
        if self.lambda1 == 0.0 and self.lambda2 == 0.0:
            raise ValueError("at least one of lambda1, lambda2 must be > 0")
        if self.learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        _check_mode(self.entropy_mode)


def _check_mode(mode: str):
    if mode not in ENTROPY_MODES:
        raise ValueError(f"entropy mode must be one of {ENTROPY_MODES}, got {mode!r}")


def _check_square(c: np.ndarray, who: str) -> int:
    if c.shape[0] != c.shape[1]:
        raise ValueError(f"{who} must be square, got shape {c.shape}")
    return c.shape[0]


def coeff_from_logits(a) -> np.ndarray:
    """Row-stochastic coefficients with an exactly zero diagonal.

    Row-wise softmax of the logits with the diagonal excluded from the
    support, stabilized by row-max subtraction, so any finite logits give
    rows that sum to 1 and a diagonal of exact zeros.
    """
    a = as_matrix(a, "coefficient logits")
    n = _check_square(a, "coefficient logits")
    if n < 2:
        raise ValueError(f"need at least 2 samples for off-diagonal support, got {n}")
    return softmax_rows_kernel(a, excluded=np.eye(n, dtype=bool))


def check_coefficient_matrix(c: np.ndarray) -> None:
    """Reject anything that is not a valid coefficient matrix."""
    c = as_matrix(c, "coefficients")
    n = _check_square(c, "coefficient matrix")
    if np.any(np.diagonal(c) != 0.0):
        raise ValueError("coefficient matrix diagonal must be exactly zero")
    if np.any(c < 0.0) or np.any(c > 1.0):
        raise ValueError("coefficient entries must lie in [0, 1]")
    sums = np.sum(c, axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-12):
        row = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"coefficient row {row} sums to {sums[row]!r}, expected 1")


def _entropy_value(c: np.ndarray, mode: str) -> float:
    s = np.sum(xlogx_kernel(c))
    if mode == "literal":
        return float(np.exp(s))
    return float(np.exp(s * (1.0 / c.shape[0])))


def entropy_term(c, mode: str = "mean-scaled") -> float:
    """exp of the summed c*ln(c) term, optionally divided by n first.

    Always in (0, 1] for row-stochastic input: the sum is <= 0 and hits 0
    only when every row is one-hot.
    """
    c = as_matrix(c, "coefficients")
    _check_square(c, "coefficient matrix")
    _check_mode(mode)
    if np.any(c < 0.0) or np.any(c > 1.0):
        raise ValueError("coefficient entries must lie in [0, 1]")
    return _entropy_value(c, mode)


def selfexpr_loss(z, c, lambda1: float, lambda2: float, mode: str = "mean-scaled") -> float:
    """lambda1 * ||Z - CZ||_F^2 + lambda2 * entropy term.

    Row i of Z is reconstructed as sum_j c_ij z_j, so the matrix product is
    C @ Z on stacked row vectors.
    """
    z = as_matrix(z, "embeddings")
    c = as_matrix(c, "coefficients")
    _check_mode(mode)
    n = _check_square(c, "coefficient matrix")
    if z.shape[0] != n:
        raise ValueError(
            f"coefficient matrix is {n}x{n} but z has {z.shape[0]} rows"
        )
    resid = z - c @ z
    rec = np.sum(resid * resid)
    return float(rec * lambda1 + _entropy_value(c, mode) * lambda2)


def _loss_on_tape(
    tape: Tape, z: Node, c: Node, lambda1: float, lambda2: float, mode: str
) -> Node:
    resid = tape.subtract(z, tape.matmul(c, z))
    rec = tape.frobenius_sq(resid)
    s = tape.sum(tape.xlogx(c))
    if mode == "literal":
        ent = tape.exp(s)
    else:
        ent = tape.exp(tape.scale(s, 1.0 / c.shape[0]))
    return tape.add(tape.scale(rec, lambda1), tape.scale(ent, lambda2))


ZSource = Union[np.ndarray, tuple[np.ndarray, list[LinearLayer]]]


def fit_coefficients(
    z_source: ZSource, cfg: ClusterStageConfig
) -> tuple[np.ndarray, list[float], Optional[list[LinearLayer]]]:
    """Learn the coefficient matrix by full-batch Adam on free logits.

    ``z_source`` is either a fixed embedding matrix, or a pair (features,
    projection layers) where features come from the frozen encoder.  With
    ``fine_tune_projection`` set the projection head trains jointly with
    the logits; it then must be supplied through the pair form.

    Returns the final coefficients, the per-epoch loss evaluated before
    each update, and the (possibly updated) projection head, or None when
    no head was involved.  Logits start at zero, so with epochs=0 the
    coefficients are uniform over each row's off-diagonal entries.
    """
    if isinstance(z_source, tuple):
        features, proj_layers = z_source
        features = as_matrix(features, "features")
    else:
        features, proj_layers = None, None
        z_fixed = as_matrix(z_source, "embeddings")

    if cfg.fine_tune_projection and proj_layers is None:
        raise ValueError(
            "fine_tune_projection requires (features, projection layers), "
            "got a fixed embedding matrix"
        )
    if proj_layers is not None and not cfg.fine_tune_projection:
        # Head frozen: evaluate it once and treat z as fixed.
        z_fixed = project(proj_layers, features)

    n = features.shape[0] if cfg.fine_tune_projection else z_fixed.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")

    logits = np.zeros((n, n))
    diag = np.eye(n, dtype=bool)
    params = {"coeff.logits": logits}
    if cfg.fine_tune_projection:
        params |= params_to_dict(proj_layers, "projection")
    state = AdamState.for_params(params, cfg.learning_rate)

    history: list[float] = []
    for _ in range(cfg.epochs):
        tape = Tape()
        a = tape.leaf(params["coeff.logits"], name="coeff.logits")
        c = tape.row_softmax(a, excluded=diag)
        if cfg.fine_tune_projection:
            proj_nodes = register_param_leaves(
                tape, dict_to_params(params, "projection", len(proj_layers)), "projection"
            )
            z = encode_on_tape(tape, proj_nodes, tape.constant(features, name="features"))
        else:
            z = tape.constant(z_fixed, name="embeddings")
        loss = _loss_on_tape(tape, z, c, cfg.lambda1, cfg.lambda2, cfg.entropy_mode)

        node_grads = tape.gradients(loss)
        grads = {node.name: g for node, g in node_grads.items()}
        params = adam_step(params, grads, state)
        history.append(float(loss.value))

    final_c = coeff_from_logits(params["coeff.logits"])
    if proj_layers is None:
        head = None
    elif cfg.fine_tune_projection:
        head = dict_to_params(params, "projection", len(proj_layers))
    else:
        head = proj_layers
    return final_c, history, head


def affinity(c) -> np.ndarray:
    """Symmetric nonnegative graph weights W = (|C| + |C^T|) / 2."""
    c = as_matrix(c, "coefficients")
    _check_square(c, "affinity input")
    a = np.abs(c)
    return (a + a.T) / 2.0


def pairwise_distances(x) -> np.ndarray:
    """Unsquared Euclidean distances between all row pairs."""
    x = as_matrix(x, "samples")
    diff = x[:, None, :] - x[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def ssc_entropy_rows(x, gamma: float) -> np.ndarray:
    """Closed-form row-stochastic weights before symmetrization.

    Minimizing sum_ij w_ij d_ij + gamma * sum_ij w_ij ln w_ij over each
    row's off-diagonal simplex gives a softmax of -d_ij / gamma.
    """
    x = as_matrix(x, "samples")
    if x.shape[0] < 2:
        raise ValueError(f"need at least 2 samples, got {x.shape[0]}")
    if gamma <= 0.0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    d = pairwise_distances(x)
    return softmax_rows_kernel(d * (-1.0 / gamma), excluded=np.eye(x.shape[0], dtype=bool))


def ssc_entropy_baseline(x, gamma: float) -> np.ndarray:
    """The closed-form baseline affinity: symmetrized softmax weights."""
    return affinity(ssc_entropy_rows(x, gamma))
