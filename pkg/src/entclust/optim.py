"""Adam optimizer with bias correction, over named parameter dicts."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamState", "adam_step"]


@dataclass
class AdamState:
    """Per-parameter first/second moment estimates plus the step counter.

    Owned by exactly one training loop at a time; ``adam_step`` advances
    ``step`` by one and updates the moments in place.
    """

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict = field(default_factory=dict)
    second_moment: dict = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: dict, learning_rate: float, **kwargs) -> "AdamState":
        state = cls(learning_rate=float(learning_rate), **kwargs)
        for name, value in params.items():
            state.first_moment[name] = np.zeros_like(value)
            state.second_moment[name] = np.zeros_like(value)
        return state


def adam_step(params: dict, grads: dict, state: AdamState) -> dict:
    """One Adam update; returns the new parameter dict.

    Standard recurrence with bias correction.  Rejects non-finite gradients
    before touching any state, naming the offending parameter.
    """
    if set(params) != set(state.first_moment):
        raise ValueError("parameter names do not match optimizer state")
    for name in params:
        g = grads[name]
        if g.shape != params[name].shape:
            raise ValueError(
                f"gradient shape {g.shape} does not match parameter {name!r} "
                f"shape {params[name].shape}"
            )
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter {name!r}")

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    out = {}
    for name, p in params.items():
        g = grads[name]
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        out[name] = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return out
