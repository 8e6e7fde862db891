"""
Differentiable ops of the closed layer set: conv2d (3x3, stride 1/2),
nearest x2 upsample, relu, 2x2 / global average pool, linear, elementwise
add/sub/scale, edge pad / crop, and a fixed channel projection used to run the decoder
inside a graph.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from minusface.errors import InvalidArgumentError
from minusface.nn.tensor import Tensor


def _check_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise InvalidArgumentError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "add")

    def grad_fn(g):
        a.accumulate(g)
        b.accumulate(g)

    return Tensor.from_op(a.data + b.data, (a, b), grad_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_shape(a, b, "sub")

    def grad_fn(g):
        a.accumulate(g)
        b.accumulate(-g)

    return Tensor.from_op(a.data - b.data, (a, b), grad_fn)


def scale(a: Tensor, factor: float) -> Tensor:
    def grad_fn(g):
        a.accumulate(g * factor)

    return Tensor.from_op(a.data * factor, (a,), grad_fn)


def total(a: Tensor) -> Tensor:
    """Sum of all elements."""
    def grad_fn(g):
        a.accumulate(np.broadcast_to(g, a.shape))

    return Tensor.from_op(np.asarray(a.data.sum(), dtype=a.data.dtype), (a,), grad_fn)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def grad_fn(g):
        x.accumulate(g * mask)

    return Tensor.from_op(x.data * mask, (x,), grad_fn)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1) -> Tensor:
    """
    3x3 (or any odd k x k) convolution with 'same'-style padding k // 2.

    Args:
        x: (B, Cin, H, W)
        weight: (Cout, Cin, k, k)
        bias: (Cout,)
        stride: 1 or 2

    Returns:
        (B, Cout, ceil(H / stride), ceil(W / stride))
    """
    if x.ndim != 4:
        raise InvalidArgumentError(f"conv2d expects (B, C, H, W) input, got {x.shape}")
    cout, cin, k, k2 = weight.shape
    if k != k2 or k % 2 == 0:
        raise InvalidArgumentError(f"conv2d expects an odd square kernel, got {weight.shape}")
    if x.shape[1] != cin:
        raise InvalidArgumentError(f"conv2d: input has {x.shape[1]} channels, weight expects {cin}")
    if stride not in (1, 2):
        raise InvalidArgumentError(f"conv2d stride must be 1 or 2, got {stride}")

    pad = k // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    # (B, Cin, Ho, Wo, k, k)
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    ho, wo = windows.shape[2], windows.shape[3]
    out = np.tensordot(windows, weight.data, axes=([1, 4, 5], [1, 2, 3]))  # (B, Ho, Wo, Cout)
    out = out.transpose(0, 3, 1, 2) + bias.data.reshape(1, cout, 1, 1)

    def grad_fn(g):
        if weight.requires_grad:
            weight.accumulate(np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3])))
        if bias.requires_grad:
            bias.accumulate(g.sum(axis=(0, 2, 3)))
        if x.requires_grad:
            cols = np.tensordot(g, weight.data, axes=([1], [0]))  # (B, Ho, Wo, Cin, k, k)
            dxp = np.zeros_like(xp)
            for i in range(k):
                for j in range(k):
                    dxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += \
                        cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            x.accumulate(dxp[:, :, pad:pad + x.shape[2], pad:pad + x.shape[3]])

    return Tensor.from_op(np.ascontiguousarray(out, dtype=x.data.dtype), (x, weight, bias), grad_fn)


def avg_pool2x2(x: Tensor) -> Tensor:
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise InvalidArgumentError(f"avg_pool2x2 needs even spatial dims, got {(h, w)}")
    out = x.data.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))

    def grad_fn(g):
        x.accumulate(np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25)

    return Tensor.from_op(out, (x,), grad_fn)


def global_avg_pool(x: Tensor) -> Tensor:
    """(B, C, H, W) -> (B, C)."""
    b, c, h, w = x.shape
    out = x.data.mean(axis=(2, 3))

    def grad_fn(g):
        x.accumulate(np.broadcast_to(g[:, :, None, None] / (h * w), x.shape))

    return Tensor.from_op(out, (x,), grad_fn)


def upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbour x2 upsampling."""
    b, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def grad_fn(g):
        x.accumulate(g.reshape(b, c, h, 2, w, 2).sum(axis=(3, 5)))

    return Tensor.from_op(out, (x,), grad_fn)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """(B, in) @ (out, in).T + (out,)."""
    if x.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise InvalidArgumentError(f"linear: input {x.shape} does not match weight {weight.shape}")
    out = x.data @ weight.data.T + bias.data

    def grad_fn(g):
        if weight.requires_grad:
            weight.accumulate(g.T @ x.data)
        if bias.requires_grad:
            bias.accumulate(g.sum(axis=0))
        if x.requires_grad:
            x.accumulate(g @ weight.data)

    return Tensor.from_op(out, (x, weight, bias), grad_fn)


def channel_project(x: Tensor, matrix: np.ndarray) -> Tensor:
    """
    Fixed (non-trainable) per-pixel channel map: out[b, o] = sum_c M[o, c] x[b, c].

    Args:
        x: (B, Cin, H, W)
        matrix: (Cout, Cin)
    """
    m = np.asarray(matrix, dtype=x.data.dtype)
    if x.ndim != 4 or m.ndim != 2 or x.shape[1] != m.shape[1]:
        raise InvalidArgumentError(f"channel_project: input {x.shape} does not match matrix {m.shape}")
    out = np.einsum("oc,bchw->bohw", m, x.data)

    def grad_fn(g):
        x.accumulate(np.einsum("oc,bohw->bchw", m, g))

    return Tensor.from_op(out, (x,), grad_fn)


def pad_bottom_right(x: Tensor, height: int, width: int) -> Tensor:
    """Zero-pad (B, C, H, W) at the bottom and right edges up to (height, width)."""
    b, c, h, w = x.shape
    if height < h or width < w:
        raise InvalidArgumentError(f"pad_bottom_right: target {(height, width)} is smaller than {(h, w)}")
    if (height, width) == (h, w):
        return x
    out = np.pad(x.data, ((0, 0), (0, 0), (0, height - h), (0, width - w)))

    def grad_fn(g):
        x.accumulate(g[:, :, :h, :w])

    return Tensor.from_op(out, (x,), grad_fn)


def crop_top_left(x: Tensor, height: int, width: int) -> Tensor:
    """Keep the top-left (height, width) window of a (B, C, H, W) tensor."""
    b, c, h, w = x.shape
    if height > h or width > w:
        raise InvalidArgumentError(f"crop_top_left: target {(height, width)} exceeds {(h, w)}")
    if (height, width) == (h, w):
        return x

    def grad_fn(g):
        full = np.zeros(x.shape, dtype=g.dtype)
        full[:, :, :height, :width] = g
        x.accumulate(full)

    return Tensor.from_op(np.ascontiguousarray(x.data[:, :, :height, :width]), (x,), grad_fn)
