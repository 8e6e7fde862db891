"""
SGD with momentum and L2 weight decay.
"""

import logging
from typing import Dict, Iterable, List

import numpy as np

from minusface.errors import StateError
from minusface.nn.tensor import Tensor

logger = logging.getLogger(__name__)


def sgd_step(
    params: Iterable[Tensor],
    velocity: Dict[int, np.ndarray],
    lr: float,
    momentum: float,
    weight_decay: float,
) -> None:
    """
    One in-place update of every parameter, then clear its gradient.

    v <- momentum * v + grad + weight_decay * p
    p <- p - lr * v

    Args:
        params: Parameters with populated gradients
        velocity: Momentum buffers keyed by id(param); updated in place
        lr: Learning rate
        momentum: Momentum coefficient
        weight_decay: L2 coefficient
    """
    params = list(params)
    missing = [p.name or repr(p) for p in params if p.grad is None]
    if missing:
        raise StateError(f"sgd_step: no gradient for {', '.join(missing)}")

    for p in params:
        step = p.grad + weight_decay * p.data
        v = velocity.get(id(p))
        v = step if v is None else momentum * v + step
        velocity[id(p)] = v
        p.data = (p.data - lr * v).astype(p.data.dtype, copy=False)
        p.grad = None


class SGD:
    """Holds the parameter list and momentum buffers for repeated sgd_step calls."""

    def __init__(self, params: Iterable[Tensor], momentum: float = 0.9, weight_decay: float = 0.0):
        self.params: List[Tensor] = list(params)
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity: Dict[int, np.ndarray] = {}

    def step(self, lr: float) -> None:
        sgd_step(self.params, self.velocity, lr, self.momentum, self.weight_decay)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
