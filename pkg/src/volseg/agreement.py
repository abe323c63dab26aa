"""Observer agreement statistics and manual-vs-automated volume regression.

Cohen's kappa is computed voxelwise per scan from the 2x2 contingency of
two binary masks over the full grid, then averaged across scans for
study summaries. Volume agreement uses simple least squares with
intercept, reporting R^2 = 1 - SSE/SST.

Study input is a declarative JSON-lines manifest (same family as the
cohort manifest): a header line with mode/reader metadata followed by
one case per line pointing at the two mask files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import niftio, segmetrics
from .errors import DegenerateX, GeometryMismatch, SchemaError, TooFewPoints
from .volcore import LabelMask, SegmentationPair, require_same_geometry


@dataclass(frozen=True)
class KappaResult:
    kappa: float | None  # None when expected agreement is 1 (both raters constant, equal)
    p_observed: float
    p_expected: float
    n_voxels: int


@dataclass(frozen=True)
class RegressionFit:
    slope: float
    intercept: float
    r_squared: float
    n: int


def cohen_kappa(mask_a: LabelMask, mask_b: LabelMask) -> KappaResult:
    """Chance-corrected voxelwise agreement between two raters' masks."""
    require_same_geometry(mask_a, mask_b)
    a = mask_a.voxels.astype(bool).ravel()
    b = mask_b.voxels.astype(bool).ravel()
    n = a.size
    n11 = int(np.count_nonzero(a & b))
    n10 = int(np.count_nonzero(a & ~b))
    n01 = int(np.count_nonzero(~a & b))
    n00 = n - n11 - n10 - n01

    p_o = (n11 + n00) / n
    pa1 = (n11 + n10) / n
    pb1 = (n11 + n01) / n
    p_e = pa1 * pb1 + (1 - pa1) * (1 - pb1)
    if p_e == 1.0:
        return KappaResult(kappa=None, p_observed=p_o, p_expected=p_e, n_voxels=n)
    return KappaResult(
        kappa=(p_o - p_e) / (1.0 - p_e), p_observed=p_o, p_expected=p_e, n_voxels=n
    )


def kappa_from_contingency(n11: int, n10: int, n01: int, n00: int) -> KappaResult:
    """Kappa straight from 2x2 counts (rater A rows, rater B columns)."""
    n = n11 + n10 + n01 + n00
    if n <= 0:
        raise ValueError("contingency is empty")
    p_o = (n11 + n00) / n
    pa1 = (n11 + n10) / n
    pb1 = (n11 + n01) / n
    p_e = pa1 * pb1 + (1 - pa1) * (1 - pb1)
    if p_e == 1.0:
        return KappaResult(kappa=None, p_observed=p_o, p_expected=p_e, n_voxels=n)
    return KappaResult(
        kappa=(p_o - p_e) / (1.0 - p_e), p_observed=p_o, p_expected=p_e, n_voxels=n
    )


def ols_fit(xs, ys) -> RegressionFit:
    """Least-squares line ys ~ slope*xs + intercept, with R^2.

    Raises:
        TooFewPoints: n < 2.
        DegenerateX: all xs equal.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-D and the same length")
    n = x.size
    if n < 2:
        raise TooFewPoints(f"regression needs >= 2 points, got {n}")
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0.0:
        raise DegenerateX("all x values equal; slope undefined")
    sxy = float(((x - xm) * (y - ym)).sum())
    slope = sxy / sxx
    intercept = ym - slope * xm
    sse = float(((y - (slope * x + intercept)) ** 2).sum())
    sst = float(((y - ym) ** 2).sum())
    r_squared = 1.0 if sst == 0.0 else 1.0 - sse / sst
    return RegressionFit(slope=slope, intercept=intercept, r_squared=r_squared, n=n)


def mean_sd(values) -> tuple[float | None, float | None]:
    """Sample mean and n-1 SD, ignoring None entries.

    Empty input gives (None, None); a single value gives SD None.
    """
    vals = [v for v in values if v is not None]
    if not vals:
        return None, None
    mean = float(np.mean(vals))
    if len(vals) < 2:
        return mean, None
    return mean, float(np.std(vals, ddof=1))


# --- observer studies ---------------------------------------------------------

STUDY_METRICS = ("dsc", "precision", "jaccard", "recall", "hd95_mm")


@dataclass(frozen=True)
class StudyCase:
    case_id: str
    mask_a_path: str
    mask_b_path: str
    group: str | None = None


@dataclass(frozen=True)
class ObserverStudy:
    mode: str  # "inter" | "intra"
    reader_a: str
    reader_b: str
    cases: tuple[StudyCase, ...]
    timepoint_a: str | None = None
    timepoint_b: str | None = None

    def __post_init__(self):
        if self.mode not in ("inter", "intra"):
            raise SchemaError(f"study mode must be inter or intra, got {self.mode!r}")
        if self.mode == "intra":
            if self.reader_a != self.reader_b:
                raise SchemaError("intra mode requires the same reader for both masks")
            if not self.timepoint_a or not self.timepoint_b or self.timepoint_a == self.timepoint_b:
                raise SchemaError("intra mode requires two distinct timepoints")
        elif self.reader_a == self.reader_b:
            raise SchemaError("inter mode requires two different readers")
        if not self.cases:
            raise SchemaError("study has no cases")
        seen = set()
        for c in self.cases:
            if c.case_id in seen:
                raise SchemaError(f"duplicate study case id {c.case_id!r}")
            seen.add(c.case_id)


@dataclass
class StudyCaseResult:
    case_id: str
    group: str | None
    metrics: segmetrics.MetricsRecord
    kappa: KappaResult


@dataclass
class StudySummary:
    mode: str
    rows: dict  # label -> {metric: (mean, sd)}, plus kappa
    per_case: list = field(default_factory=list)


def load_study(path: str | Path) -> ObserverStudy:
    """Parse a study manifest (JSONL: header line, then one case per line)."""
    lines = Path(path).read_text().splitlines()
    records = []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append((i, json.loads(line)))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {i}: invalid JSON ({exc})") from exc
    if not records:
        raise SchemaError("study manifest is empty")
    _, header = records[0]
    if "mode" not in header:
        raise SchemaError("first line must be a header with a 'mode' field")
    cases = []
    for i, rec in records[1:]:
        for key in ("case_id", "mask_a_path", "mask_b_path"):
            if key not in rec:
                raise SchemaError(f"line {i}: missing field {key!r}")
        cases.append(
            StudyCase(
                case_id=str(rec["case_id"]),
                mask_a_path=str(rec["mask_a_path"]),
                mask_b_path=str(rec["mask_b_path"]),
                group=rec.get("group"),
            )
        )
    return ObserverStudy(
        mode=str(header["mode"]),
        reader_a=str(header.get("reader_a", "A")),
        reader_b=str(header.get("reader_b", "B")),
        timepoint_a=header.get("timepoint_a"),
        timepoint_b=header.get("timepoint_b"),
        cases=tuple(cases),
    )


def run_observer_study(study: ObserverStudy, base_dir: str | Path = ".") -> StudySummary:
    """Evaluate every case pair and summarize per group and overall.

    Per case: DSC/precision/Jaccard/recall/HD95 between the two raters'
    masks plus voxelwise kappa. Summary rows carry (mean, n-1 SD) per
    metric; kappa averages ignore undefined values.
    """
    base = Path(base_dir)
    per_case: list[StudyCaseResult] = []
    for case in study.cases:
        try:
            mask_a = niftio.read_mask(base / case.mask_a_path)
            mask_b = niftio.read_mask(base / case.mask_b_path)
            pair = SegmentationPair(prediction=mask_a, reference=mask_b)
            record = segmetrics.evaluate_pair(pair)
            kap = cohen_kappa(mask_a, mask_b)
        except Exception as exc:
            raise type(exc)(f"case {case.case_id!r}: {exc}") from exc
        per_case.append(StudyCaseResult(case.case_id, case.group, record, kap))

    def row(results: list[StudyCaseResult]) -> dict:
        out = {}
        for m in STUDY_METRICS:
            out[m] = mean_sd(getattr(r.metrics, m) for r in results)
        out["kappa"] = mean_sd(r.kappa.kappa for r in results)
        out["n"] = len(results)
        return out

    rows = {"ALL": row(per_case)}
    groups = sorted({r.group for r in per_case if r.group is not None})
    for g in groups:
        rows[g] = row([r for r in per_case if r.group == g])
    return StudySummary(mode=study.mode, rows=rows, per_case=per_case)
