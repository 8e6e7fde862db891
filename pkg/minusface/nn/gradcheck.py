"""
Central finite-difference gradient checks for the engine's ops.
"""

from typing import Callable, Dict, Sequence

import numpy as np

from minusface.nn.tensor import Tensor


def numerical_gradient(fn: Callable[[], Tensor], tensor: Tensor, eps: float = 1e-3) -> np.ndarray:
    """d fn() / d tensor by central differences, perturbing tensor.data in place."""
    tensor.data = np.ascontiguousarray(tensor.data)
    grad = np.zeros_like(tensor.data, dtype=np.float64)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = fn().item()
        flat[i] = original - eps
        minus = fn().item()
        flat[i] = original
        out[i] = (plus - minus) / (2 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-8)
    return float(np.linalg.norm(analytic - numeric) / scale)


def gradient_check(
    fn: Callable[[], Tensor],
    tensors: Sequence[Tensor],
    eps: float = 1e-3,
) -> Dict[str, float]:
    """
    Compare backward() gradients of a scalar-valued fn against central
    differences for each tensor.

    Tensors should hold float64 data; fn must rebuild the graph from them on
    every call.

    Returns:
        Relative error per tensor (keyed by name, or position when unnamed)
    """
    for t in tensors:
        t.grad = None
    fn().backward()
    analytic = [np.array(t.grad, dtype=np.float64) for t in tensors]

    errors = {}
    for index, (t, a) in enumerate(zip(tensors, analytic)):
        numeric = numerical_gradient(fn, t, eps)
        errors[t.name or str(index)] = relative_error(a, numeric)
    return errors
