"""Per-case overlap, boundary, and volumetric segmentation metrics.

Overlap metrics come from voxelwise TP/FP/FN/TN counts over the full
grid (accuracy included: background dominates, which is why whole-organ
accuracy sits near 0.99 on body MRI). The boundary metric is the 95th
percentile Hausdorff distance between 6-connected surface voxel sets,
in millimetres, combining the two directed distances with `max`.

Undefined values (0/0 ratios, HD95 of an empty prediction) are carried
as None, never conflated with 0. A prediction with zero foreground
against a non-empty reference is a *failure*: overlap scores are 0 by
convention, HD95 stays undefined, and the record is flagged so cohort
aggregation can exclude it from boundary averages.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np

from ._kernels import get_backend
from .errors import EmptyMask
from .volcore import SegmentationPair, mask_count, surface_voxels, voxel_volume_ml


@dataclass(frozen=True)
class ConfusionCounts:
    """Voxelwise contingency over the whole grid."""

    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricsRecord:
    """All per-case metrics; None marks an undefined value."""

    dsc: float | None
    jaccard: float | None
    precision: float | None
    recall: float | None
    accuracy: float | None
    hd95_mm: float | None
    volume_pred_ml: float
    volume_ref_ml: float
    volume_error_ml: float
    failure: bool

    def to_dict(self) -> dict:
        return asdict(self)


def confusion(pair: SegmentationPair) -> ConfusionCounts:
    """Count TP/FP/FN/TN voxels of a geometry-matched pair."""
    tp, fp, fn, tn = get_backend().confusion_counts(
        pair.prediction.voxels, pair.reference.voxels
    )
    return ConfusionCounts(tp, fp, fn, tn)


def _ratio(num: int, den: int) -> float | None:
    return None if den == 0 else num / den


def overlap_metrics(c: ConfusionCounts) -> tuple[
    float | None, float | None, float | None, float | None, float | None
]:
    """(dsc, jaccard, precision, recall, accuracy); 0/0 cases are None."""
    dsc = _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)
    jaccard = _ratio(c.tp, c.tp + c.fp + c.fn)
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    accuracy = _ratio(c.tp + c.tn, c.total)
    return dsc, jaccard, precision, recall, accuracy


def _surface_points_mm(mask) -> np.ndarray:
    idx = surface_voxels(mask)
    return idx.astype(np.float64) * np.asarray(mask.spacing, dtype=np.float64)


def percentile_linear(values: np.ndarray, q: float) -> float:
    """q-th percentile with linear interpolation between order statistics."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("percentile of empty set")
    pos = (q / 100.0) * (v.size - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, v.size - 1)
    frac = pos - lo
    return float(v[lo] + frac * (v[hi] - v[lo]))


def hd95(pair: SegmentationPair) -> float:
    """95th-percentile symmetric Hausdorff distance in mm.

    Directed distance A->B is the 95th percentile of each A surface
    voxel's Euclidean distance (in mm, via spacing) to the nearest B
    surface voxel; the result is max of the two directions.

    Raises:
        EmptyMask: if either mask has no foreground.
    """
    if not pair.prediction.voxels.any() or not pair.reference.voxels.any():
        raise EmptyMask("hd95 needs non-empty prediction and reference")
    a = _surface_points_mm(pair.prediction)
    b = _surface_points_mm(pair.reference)
    backend = get_backend()
    d_ab = percentile_linear(backend.min_dists(a, b), 95.0)
    d_ba = percentile_linear(backend.min_dists(b, a), 95.0)
    return max(d_ab, d_ba)


def mask_volume_ml(mask) -> float:
    """Foreground volume of one mask in millilitres."""
    return mask_count(mask) * voxel_volume_ml(mask.grid)


def volumes(pair: SegmentationPair) -> tuple[float, float, float]:
    """(predicted mL, reference mL, signed error mL = pred - ref)."""
    pred_ml = mask_volume_ml(pair.prediction)
    ref_ml = mask_volume_ml(pair.reference)
    return pred_ml, ref_ml, pred_ml - ref_ml


def evaluate_pair(pair: SegmentationPair) -> MetricsRecord:
    """Full per-case record, applying the empty-prediction failure policy."""
    c = confusion(pair)
    dsc, jaccard, precision, recall, accuracy = overlap_metrics(c)
    pred_ml, ref_ml, err_ml = volumes(pair)

    pred_empty = not pair.prediction.voxels.any()
    ref_empty = not pair.reference.voxels.any()
    failure = pred_empty and not ref_empty

    if failure:
        dsc, jaccard, recall = 0.0, 0.0, 0.0
        hd = None
    elif pred_empty or ref_empty:
        hd = None
    else:
        hd = hd95(pair)

    return MetricsRecord(
        dsc=dsc,
        jaccard=jaccard,
        precision=precision,
        recall=recall,
        accuracy=accuracy,
        hd95_mm=hd,
        volume_pred_ml=pred_ml,
        volume_ref_ml=ref_ml,
        volume_error_ml=err_ml,
        failure=failure,
    )
