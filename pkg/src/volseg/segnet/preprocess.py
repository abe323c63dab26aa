"""Intensity preprocessing."""

from __future__ import annotations

import numpy as np

from ..volcore import VoxelGrid

SD_FLOOR = 1e-8


def zscore_normalize(grid: VoxelGrid) -> VoxelGrid:
    """Zero-mean unit-SD intensities (population SD over all voxels).

    Constant volumes map to all zeros via the SD floor. Idempotent to
    within float rounding.
    """
    data = grid.data
    mean = data.mean()
    sd = data.std()
    return grid.with_data((data - mean) / max(sd, SD_FLOOR))
