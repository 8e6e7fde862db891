"""
Spatial <-> high-dimensional mappings (encode e, decode d).

Both mappings upsample each pixel into a constant block (8x8 for DCT8,
2x2 for HAAR2), transform every block, and regroup coefficients of equal
frequency across blocks into (H, W) channels. Decoding inverts the block
transform and average-pools each block, so d(e(X)) = X exactly and d is
linear.

Arrays may carry leading batch dimensions: images are (..., 3, H, W) and
representations are (..., C, H, W).
"""

import logging
from functools import lru_cache

import numpy as np
from scipy.fft import dctn, idctn

from minusface.errors import InvalidArgumentError
from minusface.models import MappingKind, MappingSpec

logger = logging.getLogger(__name__)

COLORS = 3
BLOCK = 8


def _float_array(data) -> np.ndarray:
    """Keep float64 inputs in float64, everything else becomes float32."""
    arr = np.asarray(data)
    if arr.dtype == np.float64:
        return arr
    return arr.astype(np.float32, copy=False)


def dct8_forward(block) -> np.ndarray:
    """Orthonormal 2-D DCT-II of an 8x8 block."""
    arr = np.asarray(block, dtype=np.float64)
    if arr.shape != (BLOCK, BLOCK):
        raise InvalidArgumentError(f"dct8_forward expects an 8x8 block, got {arr.shape}")
    return dctn(arr, type=2, norm="ortho")


def dct8_inverse(coeffs) -> np.ndarray:
    """Exact inverse of dct8_forward."""
    arr = np.asarray(coeffs, dtype=np.float64)
    if arr.shape != (BLOCK, BLOCK):
        raise InvalidArgumentError(f"dct8_inverse expects 8x8 coefficients, got {arr.shape}")
    return idctn(arr, type=2, norm="ortho")


def _haar_forward(blocks: np.ndarray, axes) -> np.ndarray:
    """Orthonormal single-level Haar over two length-2 axes; output index 0 = low, 1 = high."""
    out = blocks
    for axis in axes:
        lo = np.take(out, [0], axis=axis) + np.take(out, [1], axis=axis)
        hi = np.take(out, [0], axis=axis) - np.take(out, [1], axis=axis)
        out = np.concatenate([lo, hi], axis=axis) / np.sqrt(2.0)
    return out


# Orthonormal Haar is its own inverse on each axis.
_haar_inverse = _haar_forward


def _check_image(arr: np.ndarray) -> None:
    if arr.ndim < 3 or arr.shape[-3] != COLORS:
        raise InvalidArgumentError(f"expected a (..., 3, H, W) image, got shape {arr.shape}")
    if arr.shape[-2] < 1 or arr.shape[-1] < 1:
        raise InvalidArgumentError(f"image dimensions must be positive, got {arr.shape[-2:]}")


def _check_rep(arr: np.ndarray, spec: MappingSpec) -> None:
    if arr.ndim < 3 or arr.shape[-3] != spec.channels:
        raise InvalidArgumentError(
            f"{spec.kind.value} expects {spec.channels} channels, got shape {arr.shape}"
        )


def encode(image, spec: MappingSpec = MappingSpec()) -> np.ndarray:
    """
    Map a (..., 3, H, W) image to its (..., C, H, W) high-dimensional representation.

    Args:
        image: Spatial image(s)
        spec: Active mapping

    Returns:
        Representation with C = spec.channels
    """
    arr = _float_array(image)
    _check_image(arr)
    f = spec.upsample_factor
    lead = arr.shape[:-3]
    h, w = arr.shape[-2:]

    # replicate-upsample, then view as (..., k, H, i, W, j) blocks
    up = np.repeat(np.repeat(arr, f, axis=-2), f, axis=-1)
    blocks = up.reshape(*lead, COLORS, h, f, w, f)
    nd = blocks.ndim
    # -> (..., k, i, j, H, W)
    blocks = np.moveaxis(blocks, (nd - 4, nd - 2), (nd - 2, nd - 1))

    if spec.kind is MappingKind.DCT8:
        coeffs = dctn(blocks, type=2, norm="ortho", axes=(nd - 4, nd - 3))
    else:
        coeffs = _haar_forward(blocks, axes=(nd - 4, nd - 3))

    return coeffs.reshape(*lead, spec.channels, h, w).astype(arr.dtype, copy=False)


def decode(rep, spec: MappingSpec = MappingSpec()) -> np.ndarray:
    """
    Map a (..., C, H, W) representation back to a (..., 3, H, W) image.

    Linear for any input; the exact inverse of encode on encode's range.
    """
    arr = _float_array(rep)
    _check_rep(arr, spec)
    f = spec.upsample_factor
    lead = arr.shape[:-3]
    h, w = arr.shape[-2:]

    coeffs = arr.reshape(*lead, COLORS, f, f, h, w)
    nd = coeffs.ndim
    if spec.kind is MappingKind.DCT8:
        blocks = idctn(coeffs, type=2, norm="ortho", axes=(nd - 4, nd - 3))
    else:
        blocks = _haar_inverse(coeffs, axes=(nd - 4, nd - 3))

    # average-pool every block
    return blocks.mean(axis=(nd - 4, nd - 3)).astype(arr.dtype, copy=False)


def project(rep, spec: MappingSpec = MappingSpec()) -> np.ndarray:
    """P = encode(decode(x)): the idempotent projection onto valid representations."""
    return encode(decode(rep, spec), spec)


@lru_cache(maxsize=None)
def _decode_matrix(kind: MappingKind) -> np.ndarray:
    spec = MappingSpec(kind=kind)
    basis = np.eye(spec.channels, dtype=np.float64).reshape(spec.channels, spec.channels, 1, 1)
    columns = decode(basis, spec)[:, :, 0, 0]
    matrix = np.ascontiguousarray(columns.T)
    matrix.setflags(write=False)
    return matrix


def decode_matrix(spec: MappingSpec = MappingSpec()) -> np.ndarray:
    """
    The (3, C) matrix M with decode(x)[k, h, w] = sum_c M[k, c] x[c, h, w].

    decode is pixelwise in the channel direction, so this fixed channel
    projection reproduces it exactly inside a computation graph.
    """
    return _decode_matrix(spec.kind)


def dc_channels(spec: MappingSpec = MappingSpec()) -> np.ndarray:
    """Indices of the per-color (0, 0) / LL channels."""
    return np.arange(COLORS) * spec.coefficients_per_color
