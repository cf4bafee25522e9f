"""Layer primitives: pure forward/backward functions on numpy arrays.

Every forward returns ``(output, cache)`` and every backward takes the
upstream gradient plus that cache.  Nothing here owns parameters or
state; composition and parameter bookkeeping live in
:mod:`cuneo.nn.model`.  All functions preserve the input dtype, so the
same code path runs float32 training and float64 gradient checking.

Conventions: feature maps are ``(N, C, H, W)``, dense activations are
``(N, D)``.  Convolutions are valid (no padding), stride 1.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


# ---------------------------------------------------------------------------
# convolution

def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Cross-correlate ``x (N,C,H,W)`` with ``w (F,C,k,k)`` plus bias ``b (F,)``."""
    n, c, h, width = x.shape
    f, cw, kh, kw = w.shape
    if cw != c:
        raise ValueError(f"kernel expects {cw} channels, input has {c}")
    if kh > h or kw > width:
        raise ValueError(f"kernel {kh}x{kw} larger than input {h}x{width}")
    view = sliding_window_view(x, (kh, kw), axis=(2, 3))  # (N, C, OH, OW, kh, kw)
    y = np.tensordot(view, w, axes=([1, 4, 5], [1, 2, 3]))  # (N, OH, OW, F)
    y = np.ascontiguousarray(y.transpose(0, 3, 1, 2))
    y += b[None, :, None, None]
    return y, (x, w)


def conv2d_backward(dy: np.ndarray, cache):
    x, w = cache
    _, _, kh, kw = w.shape
    _, _, oh, ow = dy.shape
    view = sliding_window_view(x, (kh, kw), axis=(2, 3))
    db = dy.sum(axis=(0, 2, 3))
    dw = np.tensordot(dy, view, axes=([0, 2, 3], [0, 2, 3]))  # (F, C, kh, kw)
    dx = np.zeros_like(x)
    # scatter dy*w back one kernel offset at a time; same flop count as the
    # forward pass but avoids materializing an (N,OH,OW,C,kh,kw) temporary
    for i in range(kh):
        for j in range(kw):
            part = np.tensordot(dy, w[:, :, i, j], axes=([1], [0]))  # (N, OH, OW, C)
            dx[:, :, i : i + oh, j : j + ow] += part.transpose(0, 3, 1, 2)
    return dx, dw, db


# ---------------------------------------------------------------------------
# max pooling

def maxpool_forward(x: np.ndarray, size: int = 2, stride: int = 2):
    n, c, h, w = x.shape
    if size < 1 or stride < 1:
        raise ValueError("pool size and stride must be >= 1")
    if size > h or size > w:
        raise ValueError(f"pool window {size} larger than input {h}x{w}")
    view = sliding_window_view(x, (size, size), axis=(2, 3))[:, :, ::stride, ::stride]
    oh, ow = view.shape[2], view.shape[3]
    flat = view.reshape(n, c, oh, ow, size * size)
    idx = flat.argmax(axis=-1)
    y = np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(y), (x.shape, size, stride, idx)


def maxpool_backward(dy: np.ndarray, cache):
    x_shape, size, stride, idx = cache
    n, c, h, w = x_shape
    oh, ow = idx.shape[2], idx.shape[3]
    dx = np.zeros(x_shape, dtype=dy.dtype)
    if stride == size and h == oh * size and w == ow * size:
        # non-overlapping tiling: scatter within each window, reshape back
        dxw = np.zeros((n, c, oh, ow, size * size), dtype=dy.dtype)
        np.put_along_axis(dxw, idx[..., None], dy[..., None], axis=-1)
        dx[:] = (
            dxw.reshape(n, c, oh, ow, size, size)
            .transpose(0, 1, 2, 4, 3, 5)
            .reshape(n, c, h, w)
        )
        return dx
    rows = (np.arange(oh) * stride)[None, None, :, None] + idx // size
    cols = (np.arange(ow) * stride)[None, None, None, :] + idx % size
    ni = np.arange(n)[:, None, None, None]
    ci = np.arange(c)[None, :, None, None]
    np.add.at(dx, (np.broadcast_to(ni, idx.shape), np.broadcast_to(ci, idx.shape), rows, cols), dy)
    return dx


# ---------------------------------------------------------------------------
# elementwise / shape

def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(dy: np.ndarray, cache):
    return dy * cache


def flatten_forward(x: np.ndarray):
    return x.reshape(x.shape[0], -1), x.shape


def flatten_backward(dy: np.ndarray, cache):
    return dy.reshape(cache)


# ---------------------------------------------------------------------------
# dense

def dense_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    if x.ndim != 2:
        raise ValueError(f"dense layer expects (N, D) input, got shape {x.shape}")
    if x.shape[1] != w.shape[0]:
        raise ValueError(f"dense weight expects {w.shape[0]} features, input has {x.shape[1]}")
    return x @ w + b, (x, w)


def dense_backward(dy: np.ndarray, cache):
    x, w = cache
    dx = dy @ w.T
    dw = x.T @ dy
    db = dy.sum(axis=0)
    return dx, dw, db


# ---------------------------------------------------------------------------
# softmax

def softmax_forward(z: np.ndarray):
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)
    return p, p


def softmax_backward(dy: np.ndarray, cache):
    p = cache
    inner = (dy * p).sum(axis=-1, keepdims=True)
    return p * (dy - inner)
