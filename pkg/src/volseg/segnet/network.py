"""Network assembly: encoder, attention bottleneck, decoder, head.

Weights live in a flat ``name -> float64 array`` dict whose layout is
fixed by :func:`volseg.segnet.config.parameter_shapes`. ``forward``
returns per-voxel class scores shaped (B, num_classes, *patch_size);
``forward_backward`` additionally maps an upstream score gradient to a
gradient dict with the same keys as the weights.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from . import layers
from .attention import linear_attention_backward, linear_attention_forward
from .config import NetworkConfig, parameter_shapes

Weights = dict[str, np.ndarray]


def init_weights(config: NetworkConfig, rng: np.random.Generator | None = None) -> Weights:
    """He-scaled conv kernels, Xavier-scaled projections, identity norms."""
    if rng is None:
        rng = np.random.default_rng(config.seed)
    weights: Weights = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith("norm.gamma"):
            weights[name] = np.ones(shape)
        elif name.endswith("norm.beta") or name == "head.b":
            weights[name] = np.zeros(shape)
        elif name.endswith("conv.w") or ".up.w" in name or ".merge.w" in name or name == "head.w":
            fan_in = int(np.prod(shape[1:]))
            weights[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
        else:  # attention / embed projections
            fan_in = shape[0]
            weights[name] = rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=shape)
    return weights


def _conv_block(x, weights, prefix, stride):
    y, c_conv = layers.conv3d_forward(x, weights[f"{prefix}.conv.w"], stride=stride)
    norm_key = prefix.replace(".conv", "") + ".norm"
    y, c_norm = layers.instance_norm_forward(
        y, weights[f"{norm_key}.gamma"], weights[f"{norm_key}.beta"]
    )
    y, c_relu = layers.relu_forward(y)
    return y, (c_conv, c_norm, c_relu)


def _check_input(x: np.ndarray, config: NetworkConfig) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        x = x[None, None]
    elif x.ndim == 4:
        x = x[:, None]
    if x.ndim != 5 or x.shape[1] != 1 or x.shape[2:] != config.patch_size:
        raise ShapeMismatch(
            f"expected patches shaped {config.patch_size} (optionally batched), got {x.shape}"
        )
    return x


def forward(x: np.ndarray, weights: Weights, config: NetworkConfig) -> np.ndarray:
    scores, _ = forward_with_cache(x, weights, config)
    return scores


def forward_with_cache(x: np.ndarray, weights: Weights, config: NetworkConfig):
    x = _check_input(x, config)
    cache: dict = {}

    feats = []
    h, cache["stem"] = _conv_block(x, weights, "stem", stride=1)
    feats.append(h)
    for i in range(1, config.depth + 1):
        h, cache[f"enc{i}"] = _conv_block(h, weights, f"enc{i}", stride=2)
        feats.append(h)

    # bottleneck: flatten voxels to tokens, attend, project back, residual
    bot = feats[-1]
    b, c_bot = bot.shape[0], bot.shape[1]
    spatial = bot.shape[2:]
    tokens = bot.reshape(b, c_bot, -1).transpose(0, 2, 1)
    emb, c_emb = layers.matmul_forward(tokens, weights["attn.embed.w"])
    att, c_att = linear_attention_forward(
        emb, weights["attn.wq"], weights["attn.wk"], weights["attn.wv"],
        weights["attn.wo"], config.attention_heads,
    )
    unemb, c_unemb = layers.matmul_forward(att, weights["attn.unembed.w"])
    g = bot + unemb.transpose(0, 2, 1).reshape(b, c_bot, *spatial)
    cache["attn"] = (c_emb, c_att, c_unemb, spatial)

    h = g
    for i in range(config.depth, 0, -1):
        up, c_up = layers.upsample2_forward(h)
        u, c_upconv = layers.conv3d_forward(up, weights[f"dec{i}.up.w"], stride=1)
        u, c_upnorm = layers.instance_norm_forward(
            u, weights[f"dec{i}.upnorm.gamma"], weights[f"dec{i}.upnorm.beta"]
        )
        u, c_uprelu = layers.relu_forward(u)
        skip = feats[i - 1]
        merged = np.concatenate([u, skip], axis=1)
        m, c_merge = layers.conv3d_forward(merged, weights[f"dec{i}.merge.w"], stride=1)
        m, c_norm = layers.instance_norm_forward(
            m, weights[f"dec{i}.norm.gamma"], weights[f"dec{i}.norm.beta"]
        )
        h, c_relu = layers.relu_forward(m)
        cache[f"dec{i}"] = (c_up, c_upconv, c_upnorm, c_uprelu, u.shape[1], c_merge, c_norm, c_relu)

    scores, c_head = layers.conv3d_forward(h, weights["head.w"], stride=1)
    scores, c_bias = layers.bias_forward(scores, weights["head.b"])
    cache["head"] = (c_head, c_bias)
    return scores, cache


def backward(gscores: np.ndarray, cache: dict, config: NetworkConfig) -> Weights:
    """Gradient dict (same keys as weights) from the score gradient."""
    grads: Weights = {}

    c_head, c_bias = cache["head"]
    g, grads["head.b"] = layers.bias_backward(gscores, c_bias)
    g, grads["head.w"] = layers.conv3d_backward(g, c_head)

    gskips: dict[int, np.ndarray] = {}
    for i in range(1, config.depth + 1):
        c_up, c_upconv, c_upnorm, c_uprelu, c_up_chan, c_merge, c_norm, c_relu = cache[f"dec{i}"]
        g = layers.relu_backward(g, c_relu)
        g, grads[f"dec{i}.norm.gamma"], grads[f"dec{i}.norm.beta"] = (
            layers.instance_norm_backward(g, c_norm)
        )
        g, grads[f"dec{i}.merge.w"] = layers.conv3d_backward(g, c_merge)
        gu, gskip = g[:, :c_up_chan], g[:, c_up_chan:]
        gskips[i - 1] = gskip
        gu = layers.relu_backward(gu, c_uprelu)
        gu, grads[f"dec{i}.upnorm.gamma"], grads[f"dec{i}.upnorm.beta"] = (
            layers.instance_norm_backward(gu, c_upnorm)
        )
        gu, grads[f"dec{i}.up.w"] = layers.conv3d_backward(gu, c_upconv)
        g = layers.upsample2_backward(gu, c_up)

    # g is now the gradient at the bottleneck output (residual sum)
    c_emb, c_att, c_unemb, spatial = cache["attn"]
    b, c_bot = g.shape[0], g.shape[1]
    g_unemb = g.reshape(b, c_bot, -1).transpose(0, 2, 1)
    g_att, grads["attn.unembed.w"] = layers.matmul_backward(g_unemb, c_unemb)
    g_emb, grads["attn.wq"], grads["attn.wk"], grads["attn.wv"], grads["attn.wo"] = (
        linear_attention_backward(g_att, c_att)
    )
    g_tokens, grads["attn.embed.w"] = layers.matmul_backward(g_emb, c_emb)
    g_bot = g + g_tokens.transpose(0, 2, 1).reshape(b, c_bot, *spatial)

    g = g_bot
    for i in range(config.depth, 0, -1):
        if i in gskips:
            g = g + gskips[i]
        c_conv, c_norm, c_relu = cache[f"enc{i}"]
        g = layers.relu_backward(g, c_relu)
        g, grads[f"enc{i}.norm.gamma"], grads[f"enc{i}.norm.beta"] = (
            layers.instance_norm_backward(g, c_norm)
        )
        g, grads[f"enc{i}.conv.w"] = layers.conv3d_backward(g, c_conv)

    if 0 in gskips:
        g = g + gskips[0]
    c_conv, c_norm, c_relu = cache["stem"]
    g = layers.relu_backward(g, c_relu)
    g, grads["stem.norm.gamma"], grads["stem.norm.beta"] = (
        layers.instance_norm_backward(g, c_norm)
    )
    _, grads["stem.conv.w"] = layers.conv3d_backward(g, c_conv)
    return grads
