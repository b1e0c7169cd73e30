"""Minimal reverse-mode gradient engine over a fixed primitive vocabulary.

The tape records array-valued nodes in construction order, which is already
a topological order (a primitive can only consume nodes that exist).  The
backward pass walks the records in reverse and dispatches on the primitive
kind, so every vector-Jacobian product lives in one auditable table.

Anything not in ``Tape.PRIMITIVES`` must be composed from what is; attempts
to record an unknown kind fail at construction time, never during backward.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

__all__ = ["Node", "Tape"]


# ---------------------------------------------------------------------------
# Shared numeric kernels.  The plain (off-tape) code paths call these same
# functions so that tape and non-tape forward passes agree bit-for-bit.
# ---------------------------------------------------------------------------

def relu_kernel(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax_rows_kernel(x: np.ndarray, excluded: Optional[np.ndarray] = None) -> np.ndarray:
    """Row-wise softmax; entries where ``excluded`` is True get exactly 0.

    Stabilized by subtracting the row maximum over the support before
    exponentiation.  Every row must keep at least one supported entry.
    """
    if excluded is None:
        work = x
    else:
        if excluded.shape != x.shape:
            raise ValueError(
                f"softmax exclusion mask shape {excluded.shape} does not match input {x.shape}"
            )
        if np.any(excluded.all(axis=1)):
            row = int(np.flatnonzero(excluded.all(axis=1))[0])
            raise ValueError(f"softmax row {row} has no supported entries")
        work = np.where(excluded, -np.inf, x)
    shifted = work - np.max(work, axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=1, keepdims=True)


def normalize_rows_kernel(x: np.ndarray) -> np.ndarray:
    """Rows scaled to unit Euclidean norm; rejects zero-norm rows by index."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        row = int(np.flatnonzero(norms[:, 0] == 0.0)[0])
        raise ValueError(f"cannot normalize row {row}: zero norm")
    return x / norms


def xlogx_kernel(x: np.ndarray) -> np.ndarray:
    """Elementwise x*ln(x) with the convention 0*ln(0) = 0."""
    out = np.zeros_like(x)
    pos = x > 0.0
    out[pos] = x[pos] * np.log(x[pos])
    return out


class Node:
    """One record on a tape: a primitive kind, its parents, its value."""

    __slots__ = ("tape", "index", "kind", "parents", "value", "meta", "name")

    def __init__(self, tape, index, kind, parents, value, meta=None, name=None):
        self.tape = tape
        self.index = index
        self.kind = kind
        self.parents = parents
        self.value = value
        self.meta = meta
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"<Node {self.index} {self.kind} shape={self.value.shape}{tag}>"


class Tape:
    """Records a computation and replays it backwards for gradients."""

    PRIMITIVES = frozenset(
        {
            "leaf",
            "constant",
            "matmul",
            "transpose",
            "add",
            "subtract",
            "scale",
            "multiply",
            "relu",
            "exp",
            "log",
            "xlogx",
            "sum",
            "row_softmax",
            "row_normalize",
            "frobenius_sq",
        }
    )

    def __init__(self):
        self.nodes: list[Node] = []

    # -- node construction --------------------------------------------------

    def _record(self, kind, parents, value, meta=None, name=None) -> Node:
        if kind not in self.PRIMITIVES:
            raise ValueError(f"unsupported primitive {kind!r}")
        for p in parents:
            if p.tape is not self:
                raise ValueError("cannot mix nodes from different tapes")
        node = Node(self, len(self.nodes), kind, tuple(parents), value, meta, name)
        self.nodes.append(node)
        return node

    def _as_value(self, a, who: str) -> np.ndarray:
        v = np.asarray(a, dtype=np.float64)
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{who} value contains non-finite entries")
        return v

    def leaf(self, value, name: Optional[str] = None) -> Node:
        """Register a trainable parameter; backward always yields its gradient."""
        return self._record("leaf", (), self._as_value(value, name or "leaf"), name=name)

    def constant(self, value, name: Optional[str] = None) -> Node:
        """A fixed input; no gradient is reported for it."""
        return self._record("constant", (), self._as_value(value, name or "constant"), name=name)

    # -- primitives ---------------------------------------------------------

    def matmul(self, a: Node, b: Node) -> Node:
        if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
            raise ValueError(
                f"matmul dimension mismatch: left is {a.value.shape}, right is {b.value.shape}"
            )
        return self._record("matmul", (a, b), a.value @ b.value)

    def transpose(self, a: Node) -> Node:
        return self._record("transpose", (a,), a.value.T)

    def add(self, a: Node, b: Node) -> Node:
        self._check_addable(a, b, "add")
        return self._record("add", (a, b), a.value + b.value)

    def subtract(self, a: Node, b: Node) -> Node:
        self._check_addable(a, b, "subtract")
        return self._record("subtract", (a, b), a.value - b.value)

    @staticmethod
    def _check_addable(a: Node, b: Node, op: str):
        # Same shape, or b a single-row matrix broadcast over a's rows (bias add).
        if a.value.shape == b.value.shape:
            return
        if (
            a.value.ndim == 2
            and b.value.ndim == 2
            and b.value.shape == (1, a.value.shape[1])
        ):
            return
        raise ValueError(f"{op} shape mismatch: {a.value.shape} vs {b.value.shape}")

    def scale(self, a: Node, s: float) -> Node:
        s = float(s)
        if not np.isfinite(s):
            raise ValueError("scale factor must be finite")
        return self._record("scale", (a,), a.value * s, meta=s)

    def multiply(self, a: Node, b: Node) -> Node:
        if a.value.shape != b.value.shape:
            raise ValueError(
                f"multiply shape mismatch: {a.value.shape} vs {b.value.shape}"
            )
        return self._record("multiply", (a, b), a.value * b.value)

    def relu(self, a: Node) -> Node:
        return self._record("relu", (a,), relu_kernel(a.value))

    def exp(self, a: Node) -> Node:
        return self._record("exp", (a,), np.exp(a.value))

    def log(self, a: Node) -> Node:
        return self._record("log", (a,), np.log(a.value))

    def xlogx(self, a: Node) -> Node:
        return self._record("xlogx", (a,), xlogx_kernel(a.value))

    def sum(self, a: Node) -> Node:
        return self._record("sum", (a,), np.sum(a.value))

    def row_softmax(self, a: Node, excluded: Optional[np.ndarray] = None) -> Node:
        if a.value.ndim != 2:
            raise ValueError(f"row_softmax needs a 2-D input, got shape {a.value.shape}")
        mask = None if excluded is None else np.asarray(excluded, dtype=bool)
        return self._record("row_softmax", (a,), softmax_rows_kernel(a.value, mask), meta=mask)

    def row_normalize(self, a: Node) -> Node:
        if a.value.ndim != 2:
            raise ValueError(f"row_normalize needs a 2-D input, got shape {a.value.shape}")
        return self._record("row_normalize", (a,), normalize_rows_kernel(a.value))

    def frobenius_sq(self, a: Node) -> Node:
        return self._record("frobenius_sq", (a,), np.sum(a.value * a.value))

    # -- backward -----------------------------------------------------------

    def gradients(self, loss: Node) -> dict[Node, np.ndarray]:
        """Gradient of the scalar ``loss`` with respect to every leaf.

        Returns a dict keyed by leaf node; leaves the loss does not depend on
        map to zeros of their shape.
        """
        if loss.tape is not self:
            raise ValueError("loss node does not belong to this tape")
        if loss.value.size != 1:
            raise ValueError(f"loss must be scalar, got shape {loss.value.shape}")

        grads: list[Optional[np.ndarray]] = [None] * len(self.nodes)
        grads[loss.index] = np.ones_like(loss.value)

        def accum(node: Node, g: np.ndarray):
            if grads[node.index] is None:
                grads[node.index] = np.zeros_like(node.value)
            grads[node.index] += g

        for node in reversed(self.nodes[: loss.index + 1]):
            g = grads[node.index]
            if g is None or node.kind in ("leaf", "constant"):
                continue
            _BACKWARD[node.kind](node, g, accum)

        out: dict[Node, np.ndarray] = {}
        for node in self.nodes:
            if node.kind == "leaf":
                g = grads[node.index]
                out[node] = np.zeros_like(node.value) if g is None else g
        return out


# ---------------------------------------------------------------------------
# Vector-Jacobian products, one entry per differentiable primitive.
# ---------------------------------------------------------------------------

def _vjp_matmul(node, g, accum):
    a, b = node.parents
    accum(a, g @ b.value.T)
    accum(b, a.value.T @ g)


def _vjp_transpose(node, g, accum):
    accum(node.parents[0], g.T)


def _vjp_add(node, g, accum):
    a, b = node.parents
    accum(a, g)
    if b.value.shape == a.value.shape:
        accum(b, g)
    else:  # bias row broadcast over rows
        accum(b, np.sum(g, axis=0, keepdims=True))


def _vjp_subtract(node, g, accum):
    a, b = node.parents
    accum(a, g)
    accum(b, -g)


def _vjp_scale(node, g, accum):
    accum(node.parents[0], g * node.meta)


def _vjp_multiply(node, g, accum):
    a, b = node.parents
    accum(a, g * b.value)
    accum(b, g * a.value)


def _vjp_relu(node, g, accum):
    a = node.parents[0]
    accum(a, g * (a.value > 0.0))


def _vjp_exp(node, g, accum):
    accum(node.parents[0], g * node.value)


def _vjp_log(node, g, accum):
    accum(node.parents[0], g / node.parents[0].value)


def _vjp_xlogx(node, g, accum):
    # d(x ln x)/dx = ln x + 1 for x > 0; entries at x <= 0 are structural
    # zeros in every composition here and contribute nothing.
    x = node.parents[0].value
    d = np.zeros_like(x)
    pos = x > 0.0
    d[pos] = np.log(x[pos]) + 1.0
    accum(node.parents[0], g * d)


def _vjp_sum(node, g, accum):
    a = node.parents[0]
    accum(a, np.broadcast_to(g, a.value.shape).copy())


def _vjp_row_softmax(node, g, accum):
    p = node.value
    inner = np.sum(g * p, axis=1, keepdims=True)
    accum(node.parents[0], (g - inner) * p)


def _vjp_row_normalize(node, g, accum):
    x = node.parents[0].value
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    dot = np.sum(g * x, axis=1, keepdims=True)
    accum(node.parents[0], g / norms - x * (dot / norms**3))


def _vjp_frobenius_sq(node, g, accum):
    a = node.parents[0]
    accum(a, 2.0 * a.value * g)


_BACKWARD: dict[str, Callable] = {
    "matmul": _vjp_matmul,
    "transpose": _vjp_transpose,
    "add": _vjp_add,
    "subtract": _vjp_subtract,
    "scale": _vjp_scale,
    "multiply": _vjp_multiply,
    "relu": _vjp_relu,
    "exp": _vjp_exp,
    "log": _vjp_log,
    "xlogx": _vjp_xlogx,
    "sum": _vjp_sum,
    "row_softmax": _vjp_row_softmax,
    "row_normalize": _vjp_row_normalize,
    "frobenius_sq": _vjp_frobenius_sq,
}
