"""Feed-forward encoder and two-layer projection head.

Layers apply an affine map followed by a rectifier, except the final layer
which stays linear.  Both a plain numpy forward pass and a tape-recorded
forward pass are provided; they execute the same kernels in the same order,
so their outputs agree bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Node, Tape, relu_kernel
from .linalg import as_matrix

__all__ = [
    "MlpConfig",
    "LinearLayer",
    "init_params",
    "encode",
    "project",
    "encode_on_tape",
    "params_to_dict",
    "dict_to_params",
    "register_param_leaves",
]


@dataclass(frozen=True)
class MlpConfig:
    """Layer widths from input to output, rectifier on all but the last."""

    layer_widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValueError(f"need at least input and output widths, got {widths}")
        if any(w < 1 for w in widths):
            raise ValueError(f"all layer widths must be >= 1, got {widths}")

    @property
    def input_width(self) -> int:
        return self.layer_widths[0]

    @property
    def output_width(self) -> int:
        return self.layer_widths[-1]


@dataclass
class LinearLayer:
    """One affine layer: weight is (out x in), bias a (1 x out) row."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = as_matrix(self.weight, "layer weight")
        self.bias = as_matrix(self.bias, "layer bias")
        if self.bias.shape != (1, self.weight.shape[0]):
            raise ValueError(
                f"bias shape {self.bias.shape} does not match weight {self.weight.shape}"
            )


def init_params(cfg: MlpConfig, seed: int) -> list[LinearLayer]:
    """Weights uniform in +-sqrt(6/fan_in), biases zero; deterministic per seed."""
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in zip(cfg.layer_widths[:-1], cfg.layer_widths[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weight = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        layers.append(LinearLayer(weight, np.zeros((1, fan_out))))
    return layers


def _check_input(layers: list[LinearLayer], batch: np.ndarray, who: str):
    fan_in = layers[0].weight.shape[1]
    if batch.shape[1] != fan_in:
        raise ValueError(
            f"{who} expects input width {fan_in}, got batch of shape {batch.shape}"
        )


def encode(layers: list[LinearLayer], batch) -> np.ndarray:
    """Forward pass: affine + rectifier per layer, final layer linear."""
    x = as_matrix(batch, "encoder input")
    _check_input(layers, x, "encoder")
    last = len(layers) - 1
    for i, layer in enumerate(layers):
        x = x @ layer.weight.T + layer.bias
        if i < last:
            x = relu_kernel(x)
    return x


def project(layers: list[LinearLayer], h) -> np.ndarray:
    """The two-layer projection head: affine, rectifier, affine."""
    if len(layers) != 2:
        raise ValueError(f"projection head must have exactly 2 layers, got {len(layers)}")
    return encode(layers, h)


# -- tape plumbing ----------------------------------------------------------

def register_param_leaves(
    tape: Tape, layers: list[LinearLayer], prefix: str
) -> list[tuple[Node, Node]]:
    """Register every weight/bias as a named leaf; names match params_to_dict."""
    nodes = []
    for i, layer in enumerate(layers):
        w = tape.leaf(layer.weight, name=f"{prefix}.{i}.weight")
        b = tape.leaf(layer.bias, name=f"{prefix}.{i}.bias")
        nodes.append((w, b))
    return nodes


def encode_on_tape(tape: Tape, layer_nodes: list[tuple[Node, Node]], x: Node) -> Node:
    last = len(layer_nodes) - 1
    for i, (w, b) in enumerate(layer_nodes):
        x = tape.add(tape.matmul(x, tape.transpose(w)), b)
        if i < last:
            x = tape.relu(x)
    return x


def params_to_dict(layers: list[LinearLayer], prefix: str) -> dict[str, np.ndarray]:
    out = {}
    for i, layer in enumerate(layers):
        out[f"{prefix}.{i}.weight"] = layer.weight
        out[f"{prefix}.{i}.bias"] = layer.bias
    return out


def dict_to_params(values: dict[str, np.ndarray], prefix: str, n_layers: int) -> list[LinearLayer]:
    return [
        LinearLayer(values[f"{prefix}.{i}.weight"], values[f"{prefix}.{i}.bias"])
        for i in range(n_layers)
    ]
