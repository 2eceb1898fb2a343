"""Dense float32 inference kernels.

Tensors are plain numpy float32 arrays, row-major, at most 4 dims
(batch, channel, height, width).  conv2d is fixed to the 3x3 / stride 1 /
zero-pad 1 configuration the models use and is implemented as im2col plus
one matmul; the naive reference loop lives in the test suite, not here.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeMismatch


def _as_f32(x, name, ndim=None):
    x = np.asarray(x)
    if x.dtype != np.float32:
        x = x.astype(np.float32)
    if ndim is not None and x.ndim != ndim:
        raise ShapeMismatch(f"{name} must have {ndim} dims, got shape {x.shape}")
    return x


def conv2d(x, w, b):
    """3x3 cross-correlation, stride 1, zero padding 1.

    x: (N, C, H, W); w: (O, C, 3, 3); b: (O,).  Spatial dims are preserved.
    """
    x = _as_f32(x, "x", 4)
    w = _as_f32(w, "w", 4)
    b = _as_f32(b, "b", 1)
    n, c, h, wd = x.shape
    o, ci, kh, kw = w.shape
    if (kh, kw) != (3, 3):
        raise ShapeMismatch(f"kernel must be 3x3, got {kh}x{kw}")
    if ci != c:
        raise ShapeMismatch(f"channel mismatch: input {c}, kernel {ci}")
    if b.shape != (o,):
        raise ShapeMismatch(f"bias must have shape ({o},), got {b.shape}")

    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    # (N, C, H, W, 3, 3) view -> (N, H*W, C*9) columns.
    win = sliding_window_view(xp, (3, 3), axis=(2, 3))
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(n, h * wd, c * 9)
    out = cols @ w.reshape(o, c * 9).T.astype(np.float32) + b
    return np.ascontiguousarray(out.transpose(0, 2, 1).reshape(n, o, h, wd))


def relu(x):
    """Elementwise max(0, x)."""
    return np.maximum(np.asarray(x, dtype=np.float32), np.float32(0.0))


def maxpool2(x):
    """2x2 max pooling with stride 2; spatial dims must be even."""
    x = _as_f32(x, "x", 4)
    n, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeMismatch(f"maxpool2 needs even spatial dims, got {h}x{w}")
    return x.reshape(n, c, h // 2, 2, w // 2, 2).max(axis=(3, 5))


def linear(x, w, b):
    """Affine map x @ w.T + b with x: (N, F), w: (O, F), b: (O,)."""
    x = _as_f32(x, "x", 2)
    w = _as_f32(w, "w", 2)
    b = _as_f32(b, "b", 1)
    if x.shape[1] != w.shape[1]:
        raise ShapeMismatch(
            f"feature mismatch: input {x.shape[1]}, weight {w.shape[1]}")
    if b.shape != (w.shape[0],):
        raise ShapeMismatch(f"bias must have shape ({w.shape[0]},)")
    return x @ w.T + b


def batchnorm_inference(x, gamma, beta, mean, var, eps=1e-5):
    """Per-channel inference batchnorm on (N, C, H, W) input."""
    x = _as_f32(x, "x", 4)
    c = x.shape[1]
    params = []
    for name, p in (("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)):
        p = _as_f32(p, name, 1)
        if p.shape != (c,):
            raise ShapeMismatch(f"{name} must have shape ({c},), got {p.shape}")
        params.append(p)
    gamma, beta, mean, var = params
    scale = gamma / np.sqrt(var + np.float32(eps))
    shift = beta - mean * scale
    return x * scale[None, :, None, None] + shift[None, :, None, None]
