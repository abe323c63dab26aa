"""Kernelized linear self-attention with a strictly positive feature map.

Attention weights are never materialized: with the feature map
``phi(x) = elu(x) + 1`` the attended output is

    out_i = (phi(q_i) . sum_j phi(k_j) v_j^T) / (phi(q_i) . sum_j phi(k_j))

so cost is O(n * d^2) in the token count n instead of O(n^2 * d).
``phi > 0`` everywhere keeps every denominator strictly positive. Heads
are computed independently, concatenated, then output-projected.

``dense_attention_oracle`` evaluates the identical formula by building
the explicit n x n kernel matrix; it exists purely as the slow
cross-check the fast path is tested against.
"""

from __future__ import annotations

import numpy as np


def feature_map(x: np.ndarray) -> np.ndarray:
    """elu(x) + 1, elementwise; strictly positive."""
    return np.where(x > 0, x + 1.0, np.exp(np.minimum(x, 0.0)))


def feature_map_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def _split_heads(x: np.ndarray, heads: int) -> np.ndarray:
    b, n, d = x.shape
    return x.reshape(b, n, heads, d // heads).transpose(0, 2, 1, 3)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    b, h, n, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, n, h * dh)


def linear_attention_forward(tokens: np.ndarray, wq, wk, wv, wo, heads: int):
    """tokens: (B, n, d) -> (B, n, d), plus the backward cache."""
    q_pre = tokens @ wq
    k_pre = tokens @ wk
    v = tokens @ wv
    qf = _split_heads(feature_map(q_pre), heads)
    kf = _split_heads(feature_map(k_pre), heads)
    vh = _split_heads(v, heads)

    s = np.einsum("bhnd,bhne->bhde", kf, vh)  # running sum of phi(k) v^T
    z = kf.sum(axis=2)                        # running sum of phi(k)
    num = np.einsum("bhnd,bhde->bhne", qf, s)
    den = np.einsum("bhnd,bhd->bhn", qf, z)
    out_h = num / den[..., None]
    concat = _merge_heads(out_h)
    out = concat @ wo
    cache = (tokens, wq, wk, wv, wo, heads, q_pre, k_pre, qf, kf, vh, s, z, den, out_h, concat)
    return out, cache


def linear_attention_backward(gout: np.ndarray, cache):
    (tokens, wq, wk, wv, wo, heads, q_pre, k_pre,
     qf, kf, vh, s, z, den, out_h, concat) = cache

    gwo = np.einsum("bni,bnj->ij", concat, gout)
    gconcat = gout @ wo.T
    g_out_h = _split_heads(gconcat, heads)

    gnum = g_out_h / den[..., None]
    gden = -(g_out_h * out_h).sum(axis=-1) / den

    gqf = np.einsum("bhne,bhde->bhnd", gnum, s) + gden[..., None] * z[:, :, None, :]
    gs = np.einsum("bhnd,bhne->bhde", qf, gnum)
    gz = np.einsum("bhn,bhnd->bhd", gden, qf)
    gkf = np.einsum("bhde,bhne->bhnd", gs, vh) + gz[:, :, None, :]
    gvh = np.einsum("bhde,bhnd->bhne", gs, kf)

    gq_pre = _merge_heads(gqf) * feature_map_grad(q_pre)
    gk_pre = _merge_heads(gkf) * feature_map_grad(k_pre)
    gv = _merge_heads(gvh)

    gwq = np.einsum("bni,bnj->ij", tokens, gq_pre)
    gwk = np.einsum("bni,bnj->ij", tokens, gk_pre)
    gwv = np.einsum("bni,bnj->ij", tokens, gv)
    gtokens = gq_pre @ wq.T + gk_pre @ wk.T + gv @ wv.T
    return gtokens, gwq, gwk, gwv, gwo


def linear_attention(tokens: np.ndarray, wq, wk, wv, wo, heads: int) -> np.ndarray:
    """Public op: accepts (n, d) or (B, n, d) tokens."""
    squeeze = tokens.ndim == 2
    t = tokens[None] if squeeze else tokens
    out, _ = linear_attention_forward(np.asarray(t, dtype=np.float64), wq, wk, wv, wo, heads)
    return out[0] if squeeze else out


def dense_attention_oracle(tokens: np.ndarray, wq, wk, wv, wo, heads: int) -> np.ndarray:
    """Same formula via the explicit n x n kernel matrix (test oracle)."""
    squeeze = tokens.ndim == 2
    t = np.asarray(tokens[None] if squeeze else tokens, dtype=np.float64)
    qf = _split_heads(feature_map(t @ wq), heads)
    kf = _split_heads(feature_map(t @ wk), heads)
    vh = _split_heads(t @ wv, heads)
    kermat = np.einsum("bhnd,bhmd->bhnm", qf, kf)  # phi(q_i) . phi(k_j)
    weights = kermat / kermat.sum(axis=-1, keepdims=True)
    out_h = np.einsum("bhnm,bhme->bhne", weights, vh)
    out = _merge_heads(out_h) @ wo
    return out[0] if squeeze else out
