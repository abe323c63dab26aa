"""Sliding-window inference over whole volumes.

The volume is z-score normalized, tiled by the configured patch size
with 50% overlap (reflect-padded where smaller than a patch), per-voxel
class scores are averaged across overlapping windows, and the mask is
the score argmax with ties breaking to background.
"""

from __future__ import annotations

import numpy as np

from ..volcore import LabelMask, VoxelGrid
from . import network
from .config import NetworkConfig
from .network import Weights
from .preprocess import zscore_normalize


def _window_starts(dim: int, patch: int) -> list[int]:
    if dim <= patch:
        return [0]
    step = max(1, patch // 2)
    starts = list(range(0, dim - patch + 1, step))
    if starts[-1] != dim - patch:
        starts.append(dim - patch)
    return starts


def _pad_to_patch(data: np.ndarray, patch: tuple[int, int, int]) -> np.ndarray:
    pads = [(0, max(0, p - d)) for d, p in zip(data.shape, patch)]
    if not any(hi for _, hi in pads):
        return data
    # reflect needs >= 2 samples along the axis; single-voxel axes repeat
    if all(d > 1 for d in data.shape):
        return np.pad(data, pads, mode="reflect")
    return np.pad(data, pads, mode="edge")


def predict_scores(grid: VoxelGrid, weights: Weights, config: NetworkConfig) -> np.ndarray:
    """Window-averaged class scores shaped (num_classes, *grid.dims)."""
    normalized = zscore_normalize(grid)
    data = _pad_to_patch(normalized.data, config.patch_size)
    dims = data.shape
    patch = config.patch_size

    score_sum = np.zeros((config.num_classes, *dims))
    counts = np.zeros(dims)
    starts = [_window_starts(d, p) for d, p in zip(dims, patch)]
    for sx in starts[0]:
        for sy in starts[1]:
            for sz in starts[2]:
                window = data[sx : sx + patch[0], sy : sy + patch[1], sz : sz + patch[2]]
                scores = network.forward(window, weights, config)[0]
                region = (
                    slice(None),
                    slice(sx, sx + patch[0]),
                    slice(sy, sy + patch[1]),
                    slice(sz, sz + patch[2]),
                )
                score_sum[region] += scores
                counts[region[1:]] += 1
    mean = score_sum / counts
    nx, ny, nz = grid.dims
    return mean[:, :nx, :ny, :nz]


def sliding_window_infer(grid: VoxelGrid, weights: Weights, config: NetworkConfig) -> LabelMask:
    """Segment a whole volume; returns a mask on the input lattice."""
    scores = predict_scores(grid, weights, config)
    # argmax with ties to background: strict inequality against class 0
    fg = scores[1] > scores[0]
    return LabelMask(grid, fg.astype(np.uint8))
