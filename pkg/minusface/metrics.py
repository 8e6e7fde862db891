"""
Image-quality and recognition metrics: SSIM, PSNR, cosine verification
accuracy and TPR at a fixed FPR.
"""

import logging
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.signal import convolve

from minusface.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
PSNR_CAP = 100.0


@lru_cache(maxsize=None)
def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    g /= g.sum()
    window = np.outer(g, g)
    window.setflags(write=False)
    return window


def _check_pair(a, b) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.ndim < 2:
        raise InvalidArgumentError(f"expected an image with at least 2 dims, got {a.shape}")
    return a, b


def ssim(a, b) -> float:
    """
    Single-scale SSIM for unit dynamic range.

    11x11 Gaussian window (sigma 1.5), valid-region filtering, averaged over
    channels and positions. Accepts (H, W) or (..., H, W) arrays.
    """
    a, b = _check_pair(a, b)
    h, w = a.shape[-2:]
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise InvalidArgumentError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}")
    if np.array_equal(a, b):
        return 1.0

    a = a.reshape(-1, h, w)
    b = b.reshape(-1, h, w)
    window = _gaussian_window()[None]

    def blur(x):
        return convolve(x, window, mode="valid", method="direct")

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a * mu_a
    var_b = blur(b * b) - mu_b * mu_b
    cov = blur(a * b) - mu_a * mu_b

    numerator = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    denominator = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(numerator / denominator))


def psnr(a, b) -> float:
    """10 log10(1 / MSE) in dB, capped at 100 dB (identical inputs)."""
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP
    return min(10.0 * np.log10(1.0 / mse), PSNR_CAP)


def cosine_similarity(embeddings_a, embeddings_b) -> np.ndarray:
    """Row-wise cosine similarity of two (N, d) embedding arrays."""
    a = np.asarray(embeddings_a, dtype=np.float64)
    b = np.asarray(embeddings_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise InvalidArgumentError(f"paired embeddings must share an (N, d) shape, got {a.shape} and {b.shape}")
    dot = np.sum(a * b, axis=1)
    norm = np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
    return dot / np.maximum(norm, 1e-12)


def best_threshold_accuracy(scores, same) -> Tuple[float, float]:
    """
    Exhaustive threshold sweep: a pair is predicted 'same' when its score
    exceeds the threshold. Candidates are the midpoints between consecutive
    distinct scores plus one threshold below and one above all scores.

    Returns:
        (best accuracy, its threshold)
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    same = np.asarray(same, dtype=bool).reshape(-1)
    if scores.size == 0:
        raise InvalidArgumentError("verification needs at least one pair")
    if scores.shape != same.shape:
        raise InvalidArgumentError(f"{scores.size} scores for {same.size} labels")

    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    sorted_same = same[order]
    unique = np.unique(sorted_scores)
    candidates = np.concatenate([
        [unique[0] - 1.0],
        (unique[:-1] + unique[1:]) / 2.0,
        [unique[-1] + 1.0],
    ])

    # negatives at or below k, positives above k
    neg_cum = np.concatenate([[0], np.cumsum(~sorted_same)])
    pos_cum = np.concatenate([[0], np.cumsum(sorted_same)])
    k = np.searchsorted(sorted_scores, candidates, side="right")
    correct = neg_cum[k] + (pos_cum[-1] - pos_cum[k])
    best = int(np.argmax(correct))
    return float(correct[best] / scores.size), float(candidates[best])


def verify_pairs(embeddings_a, embeddings_b, same_labels) -> Tuple[float, float]:
    """Cosine-similarity verification accuracy at the best threshold: (accuracy, threshold)."""
    if len(embeddings_a) == 0:
        raise InvalidArgumentError("verification needs at least one pair")
    scores = cosine_similarity(embeddings_a, embeddings_b)
    return best_threshold_accuracy(scores, same_labels)


def tpr_at_fpr(scores, labels, target_fpr: float = 1e-2) -> float:
    """
    True positive rate at the smallest threshold whose empirical FPR is at
    most target_fpr (a pair is positive when score >= threshold).
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels, dtype=bool).reshape(-1)
    if scores.shape != labels.shape:
        raise InvalidArgumentError(f"{scores.size} scores for {labels.size} labels")
    if not 0.0 < target_fpr < 1.0:
        raise InvalidArgumentError(f"target_fpr must lie in (0, 1), got {target_fpr}")
    negatives = scores[~labels]
    positives = scores[labels]
    if negatives.size == 0:
        raise InvalidArgumentError("tpr_at_fpr needs at least one negative pair")

    candidates = np.concatenate([np.unique(scores), [np.inf]])
    neg_sorted = np.sort(negatives)
    pos_sorted = np.sort(positives)
    fpr = (negatives.size - np.searchsorted(neg_sorted, candidates, side="left")) / negatives.size
    ok = np.flatnonzero(fpr <= target_fpr)
    threshold = candidates[ok[0]]
    if positives.size == 0:
        return 0.0
    return float((positives.size - np.searchsorted(pos_sorted, threshold, side="left")) / positives.size)


def mean_image_floor(originals) -> Tuple[np.ndarray, np.ndarray]:
    """
    SSIM of every original against the set's pixelwise mean image.

    Returns:
        (mean image, per-image SSIM scores)
    """
    originals = np.asarray(originals, dtype=np.float64)
    if originals.ndim < 3 or len(originals) == 0:
        raise InvalidArgumentError(f"expected a non-empty image stack, got {originals.shape}")
    mean_image = originals.mean(axis=0)
    scores = np.array([ssim(mean_image, x) for x in originals])
    return mean_image, scores
