"""Differentiable building blocks with explicit forward/backward passes.

Each forward returns ``(output, cache)``; the matching backward consumes
the cache and the upstream gradient. Everything is float64 NumPy so the
analytic gradients can be checked against central finite differences.

Convolutions accumulate over kernel offsets (27 strided views for a
3x3x3 kernel); this keeps forward and backward exact mirror images and
is plenty fast at desk scale.
"""

from __future__ import annotations

import numpy as np

NORM_EPS = 1e-5


def conv3d_forward(x: np.ndarray, w: np.ndarray, stride: int = 1):
    """'Same'-padded 3D convolution, stride 1 or 2.

    x: (B, Cin, X, Y, Z); w: (Cout, Cin, k, k, k) with odd k.
    """
    k = w.shape[2]
    p = k // 2
    b, cin, xs, ys, zs = x.shape
    out_dims = tuple((d + 2 * p - k) // stride + 1 for d in (xs, ys, zs))
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p), (p, p))) if p else x
    y = np.zeros((b, w.shape[0], *out_dims), dtype=x.dtype)
    for dx in range(k):
        for dy in range(k):
            for dz in range(k):
                view = xp[
                    :, :,
                    dx : dx + stride * out_dims[0] : stride,
                    dy : dy + stride * out_dims[1] : stride,
                    dz : dz + stride * out_dims[2] : stride,
                ]
                y += np.einsum("oi,bixyz->boxyz", w[:, :, dx, dy, dz], view)
    return y, (xp, w, stride, x.shape, out_dims)


def conv3d_backward(gy: np.ndarray, cache):
    xp, w, stride, x_shape, out_dims = cache
    k = w.shape[2]
    p = k // 2
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(w)
    for dx in range(k):
        for dy in range(k):
            for dz in range(k):
                sl = (
                    slice(None), slice(None),
                    slice(dx, dx + stride * out_dims[0], stride),
                    slice(dy, dy + stride * out_dims[1], stride),
                    slice(dz, dz + stride * out_dims[2], stride),
                )
                gw[:, :, dx, dy, dz] = np.einsum("boxyz,bixyz->oi", gy, xp[sl])
                gxp[sl] += np.einsum("oi,boxyz->bixyz", w[:, :, dx, dy, dz], gy)
    if p:
        gx = gxp[:, :, p : p + x_shape[2], p : p + x_shape[3], p : p + x_shape[4]]
    else:
        gx = gxp
    return gx, gw


def bias_forward(x: np.ndarray, b: np.ndarray):
    return x + b[None, :, None, None, None], None


def bias_backward(gy: np.ndarray, _cache):
    return gy, gy.sum(axis=(0, 2, 3, 4))


def instance_norm_forward(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray):
    """Per-sample, per-channel normalization over spatial voxels, affine."""
    mu = x.mean(axis=(2, 3, 4), keepdims=True)
    var = x.var(axis=(2, 3, 4), keepdims=True)
    inv_std = 1.0 / np.sqrt(var + NORM_EPS)
    xhat = (x - mu) * inv_std
    y = gamma[None, :, None, None, None] * xhat + beta[None, :, None, None, None]
    return y, (xhat, inv_std, gamma)


def instance_norm_backward(gy: np.ndarray, cache):
    xhat, inv_std, gamma = cache
    n = xhat.shape[2] * xhat.shape[3] * xhat.shape[4]
    ggamma = (gy * xhat).sum(axis=(0, 2, 3, 4))
    gbeta = gy.sum(axis=(0, 2, 3, 4))
    gxhat = gy * gamma[None, :, None, None, None]
    s1 = gxhat.sum(axis=(2, 3, 4), keepdims=True)
    s2 = (gxhat * xhat).sum(axis=(2, 3, 4), keepdims=True)
    gx = inv_std / n * (n * gxhat - s1 - xhat * s2)
    return gx, ggamma, gbeta


def relu_forward(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(gy: np.ndarray, mask):
    return gy * mask


def upsample2_forward(x: np.ndarray):
    """Nearest-neighbor x2 along each spatial axis."""
    y = x.repeat(2, axis=2).repeat(2, axis=3).repeat(2, axis=4)
    return y, x.shape


def upsample2_backward(gy: np.ndarray, x_shape):
    b, c, xs, ys, zs = x_shape
    return gy.reshape(b, c, xs, 2, ys, 2, zs, 2).sum(axis=(3, 5, 7))


def matmul_forward(x: np.ndarray, w: np.ndarray):
    """Batched token projection: (B, n, din) @ (din, dout)."""
    return x @ w, (x, w)


def matmul_backward(gy: np.ndarray, cache):
    x, w = cache
    gx = gy @ w.T
    gw = np.einsum("bni,bnj->ij", x, gy)
    return gx, gw
