"""Adam with bias correction over named parameter arrays"""
from dataclasses import dataclass, field
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from core.autodiff import Tensor
from core.exceptions import DomainError, ShapeError


@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr > 0:
            raise DomainError(f"learning rate must be positive, got {self.lr}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise DomainError(f"Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")
        if not self.eps > 0:
            raise DomainError(f"Adam eps must be positive, got {self.eps}")


@dataclass
class AdamState:
    """First/second moments keyed by parameter name, plus the step counter"""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
              state: AdamState, hyper: AdamHyper) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One Adam update. Arrays in `params` are modified in place and also returned.

    The step counter is incremented before the bias corrections, so the first
    call with g = 1 moves every coordinate by lr / (1 + eps).
    """
    for name, value in params.items():
        if name not in grads:
            raise ShapeError(f"no gradient for parameter {name!r}")
        if np.shape(grads[name]) != np.shape(value):
            raise ShapeError(f"gradient for {name!r} has shape {np.shape(grads[name])}, "
                             f"parameter has {np.shape(value)}")

    state.step += 1
    bc1 = 1.0 - hyper.beta1 ** state.step
    bc2 = 1.0 - hyper.beta2 ** state.step

    for name, value in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if name not in state.m:
            state.m[name] = np.zeros_like(value, dtype=np.float64)
            state.v[name] = np.zeros_like(value, dtype=np.float64)

        state.m[name] *= hyper.beta1
        state.m[name] += (1.0 - hyper.beta1) * g
        state.v[name] *= hyper.beta2
        state.v[name] += (1.0 - hyper.beta2) * (g * g)

        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        value -= hyper.lr * m_hat / (np.sqrt(v_hat) + hyper.eps)

    return dict(params), state


class Adam:
    """Adam over a fixed group of named tensors"""

    def __init__(self, params: Sequence[Tensor], hyper: AdamHyper):
        names = [p.name for p in params]
        if len(set(names)) != len(names) or not all(names):
            raise ShapeError(f"optimizer parameters need unique names, got {names}")
        self.params = list(params)
        self.hyper = hyper
        self.state = AdamState()

    def step(self, grads: Mapping[Tensor, np.ndarray]):
        values = {p.name: p.value for p in self.params}
        named_grads = {p.name: grads.get(p, np.zeros_like(p.value)) for p in self.params}
        adam_step(values, named_grads, self.state, self.hyper)
