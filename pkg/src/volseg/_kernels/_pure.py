"""Pure NumPy/SciPy kernel implementations.

This is the fallback backend used when the compiled extension is not
available; results are numerically identical (nearest-neighbor searches
are exact on both paths).
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

name = "pure"


def surface_mask(vox: np.ndarray) -> np.ndarray:
    """Boolean volume marking foreground voxels that touch background.

    6-connectivity; out-of-bounds counts as background.
    """
    fg = vox.astype(bool)
    interior = fg.copy()
    # a voxel is interior only if all six face neighbors are foreground
    for axis in range(3):
        lo = np.zeros_like(fg)
        hi = np.zeros_like(fg)
        sl_lo = [slice(None)] * 3
        sl_hi = [slice(None)] * 3
        sl_lo[axis] = slice(1, None)
        sl_hi[axis] = slice(None, -1)
        lo[tuple(sl_lo)] = fg[tuple(sl_hi)]
        hi[tuple(sl_hi)] = fg[tuple(sl_lo)]
        interior &= lo & hi
    return fg & ~interior


def confusion_counts(pred: np.ndarray, ref: np.ndarray) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) voxel counts over the whole grid."""
    p = pred.astype(bool).ravel()
    r = ref.astype(bool).ravel()
    tp = int(np.count_nonzero(p & r))
    fp = int(np.count_nonzero(p & ~r))
    fn = int(np.count_nonzero(~p & r))
    tn = p.size - tp - fp - fn
    return tp, fp, fn, tn


def min_dists(query: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance from each query point to its nearest target.

    Points are (n, 3) float64 arrays in physical (mm) coordinates.
    """
    tree = cKDTree(np.ascontiguousarray(target))
    d, _ = tree.query(np.ascontiguousarray(query), k=1)
    return np.asarray(d, dtype=np.float64)
