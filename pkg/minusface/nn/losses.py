"""
Training objectives: mean L1 reconstruction loss and the angular-margin
(ArcFace / additive-cosine) softmax loss.
"""

import logging
import math
from typing import TYPE_CHECKING, Union

import numpy as np

from minusface.errors import InvalidArgumentError
from minusface.nn.tensor import Tensor

if TYPE_CHECKING:
    from minusface.nn.network import ArcFaceHead

logger = logging.getLogger(__name__)

NORM_EPS = 1e-12


def _as_tensor(value: Union[Tensor, np.ndarray, float]) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def l1_loss(a: Union[Tensor, np.ndarray], b: Union[Tensor, np.ndarray]) -> Tensor:
    """Mean absolute difference over all elements."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"l1_loss: shape mismatch {a.shape} vs {b.shape}")
    diff = a.data - b.data
    n = max(diff.size, 1)
    value = np.asarray(np.abs(diff).sum() / n, dtype=a.data.dtype)

    def grad_fn(g):
        sign = np.sign(diff) * (g / n)
        a.accumulate(sign)
        b.accumulate(-sign)

    return Tensor.from_op(value, (a, b), grad_fn)


def _normalize_rows(x: np.ndarray):
    norms = np.sqrt((x * x).sum(axis=1, keepdims=True)) + NORM_EPS
    return x / norms, norms


def _normalize_backward(dy: np.ndarray, y: np.ndarray, norms: np.ndarray) -> np.ndarray:
    # y = x / |x|  =>  dx = (dy - y <y, dy>) / |x|
    return (dy - y * (y * dy).sum(axis=1, keepdims=True)) / norms


def cosine_logits(embeddings: np.ndarray, weight: np.ndarray) -> np.ndarray:
    """(B, d) x (n, d) -> (B, n) cosines between normalized rows."""
    e, _ = _normalize_rows(np.asarray(embeddings, dtype=np.float64))
    w, _ = _normalize_rows(np.asarray(weight, dtype=np.float64))
    return np.clip(e @ w.T, -1.0, 1.0)


def _margin_target(cos_y: np.ndarray, margin: float, margin_type: str):
    """Target-class logit after the margin and its derivative w.r.t. cos_y."""
    if margin_type == "cosine":
        return cos_y - margin, np.ones_like(cos_y)

    cos_m, sin_m = math.cos(margin), math.sin(margin)
    # past theta + m > pi the arc margin stops being monotone; fall back to a linear penalty
    threshold = math.cos(math.pi - margin)
    fallback = math.sin(math.pi - margin) * margin

    sin_y = np.sqrt(np.clip(1.0 - cos_y * cos_y, NORM_EPS, None))
    phi = cos_y * cos_m - sin_y * sin_m
    dphi = cos_m + sin_m * cos_y / sin_y
    use_arc = cos_y > threshold
    return np.where(use_arc, phi, cos_y - fallback), np.where(use_arc, dphi, 1.0)


def arcface_loss(embeddings: Tensor, labels, head: "ArcFaceHead") -> Tensor:
    """
    Angular-margin softmax cross-entropy.

    The target-class cosine is replaced by cos(theta_y + m) (or cos(theta_y) - m
    for the additive-cosine variant), every logit is multiplied by the head's
    scale, and the loss is the batch mean of a log-sum-exp cross-entropy.

    Args:
        embeddings: (B, d) embeddings
        labels: (B,) integer class indices
        head: Angular-margin head holding the (n, d) class weights

    Returns:
        Scalar loss tensor
    """
    embeddings = _as_tensor(embeddings)
    weight = head.weight
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if embeddings.ndim != 2 or embeddings.shape[1] != weight.shape[1]:
        raise InvalidArgumentError(
            f"arcface_loss: embeddings {embeddings.shape} do not match head dim {weight.shape[1]}"
        )
    if labels.shape[0] != embeddings.shape[0]:
        raise InvalidArgumentError(f"arcface_loss: {labels.shape[0]} labels for {embeddings.shape[0]} embeddings")
    n_classes = weight.shape[0]
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise InvalidArgumentError(f"arcface_loss: labels must lie in [0, {n_classes})")

    e_hat, e_norms = _normalize_rows(embeddings.data.astype(np.float64))
    w_hat, w_norms = _normalize_rows(weight.data.astype(np.float64))
    cos = np.clip(e_hat @ w_hat.T, -1.0, 1.0)

    rows = np.arange(labels.size)
    target, dtarget = _margin_target(cos[rows, labels], head.margin, head.margin_type)
    logits = cos.copy()
    logits[rows, labels] = target
    logits *= head.scale

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    batch = max(labels.size, 1)
    loss = (log_norm - shifted[rows, labels]).sum() / batch

    def grad_fn(g):
        probs = np.exp(shifted - log_norm[:, None])
        dlogits = probs
        dlogits[rows, labels] -= 1.0
        dlogits *= float(g) / batch
        dcos = dlogits * head.scale
        dcos[rows, labels] *= dtarget
        if embeddings.requires_grad:
            embeddings.accumulate(_normalize_backward(dcos @ w_hat, e_hat, e_norms))
        if weight.requires_grad:
            weight.accumulate(_normalize_backward(dcos.T @ e_hat, w_hat, w_norms))

    return Tensor.from_op(np.asarray(loss, dtype=embeddings.data.dtype), (embeddings, weight), grad_fn)
