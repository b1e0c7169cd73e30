"""Shared oracle machinery for the test suite.

Everything here is deliberately independent of the package internals: finite
differences instead of the tape, permutation enumeration instead of the
assignment solver, projected gradient instead of the closed-form weights.
"""

import itertools

import numpy as np


def finite_diff_grad(fn, theta, step=1.0e-6):
    """Central-difference gradient of a scalar function of one array."""
    theta = np.asarray(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    flat = theta.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        h = step * max(1.0, abs(flat[i]))
        bumped = flat.copy()
        bumped[i] = flat[i] + h
        hi = fn(bumped.reshape(theta.shape))
        bumped[i] = flat[i] - h
        lo = fn(bumped.reshape(theta.shape))
        out[i] = (hi - lo) / (2.0 * h)
    return grad


def grad_rel_err(analytic, numeric):
    """Frobenius error of ``analytic`` against ``numeric``, safe near zero."""
    diff = np.linalg.norm(np.asarray(analytic) - np.asarray(numeric))
    return diff / max(1.0, np.linalg.norm(np.asarray(numeric)))


def brute_force_assignment(cost):
    """Minimum-cost row-to-column assignment by exhaustive enumeration."""
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    best_perm = None
    best_total = np.inf
    for perm in itertools.permutations(range(n)):
        total = sum(cost[i, perm[i]] for i in range(n))
        if total < best_total:
            best_total = total
            best_perm = perm
    return np.asarray(best_perm, dtype=np.int64), float(best_total)


def project_rows_to_simplex(v):
    """Euclidean projection of each row of ``v`` onto the probability simplex."""
    v = np.asarray(v, dtype=np.float64)
    n, m = v.shape
    u = np.sort(v, axis=1)[:, ::-1]
    cumsum = np.cumsum(u, axis=1)
    ks = np.arange(1, m + 1, dtype=np.float64)
    cond = u + (1.0 - cumsum) / ks > 0.0
    rho = m - np.argmax(cond[:, ::-1], axis=1) - 1
    theta = (cumsum[np.arange(n), rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta[:, None], 0.0)


def pg_entropy_weights(x, gamma, iters=100_000, step=1.0e-3):
    """Projected-gradient minimizer of the per-row entropic weight objective.

    Each row i minimizes sum_j w_ij d_ij + gamma * sum_j w_ij ln w_ij over the
    simplex on the off-diagonal entries, with d the unsquared Euclidean
    distance.  Returns the full n-by-n matrix with a zero diagonal.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    diffs = x[:, None, :] - x[None, :, :]
    d = np.sqrt(np.sum(diffs * diffs, axis=2))
    off = ~np.eye(n, dtype=bool)
    d_free = d[off].reshape(n, n - 1)
    w = np.full((n, n - 1), 1.0 / (n - 1))
    for _ in range(iters):
        grad = d_free + gamma * (np.log(np.maximum(w, 1.0e-300)) + 1.0)
        w = project_rows_to_simplex(w - step * grad)
    full = np.zeros((n, n))
    full[off] = w.reshape(-1)
    return full
