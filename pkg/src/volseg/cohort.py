"""Cohort manifests, stratified evaluation, benchmarking, and reports.

A manifest is line-oriented JSON (one case per line, optional leading
``{"manifest_version": 1}`` header) binding each case's image,
reference, and per-model prediction paths to its group and QC status.
Exclusion (human QC verdict) and failure (model produced an empty mask)
are distinct states: excluded cases are listed but never averaged;
failed cases aggregate with zero overlap scores and no HD95
contribution.

Reports go to a directory as ``summary.csv`` (Table-style rows,
"mean (sd)" cells), ``summary.json`` (raw numbers), ``cases.jsonl``,
and ``scatter.csv`` (manual vs predicted volumes per case).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from . import niftio, segmetrics
from .agreement import RegressionFit, mean_sd, ols_fit
from .errors import (
    DegenerateX,
    DuplicateCaseId,
    MissingFile,
    MissingPrediction,
    SchemaError,
    TooFewPoints,
)
from .volcore import SegmentationPair

GROUPS = ("Normal", "AcutePancreatitis", "ChronicPancreatitis")
GROUP_LABELS = {
    "ALL": "ALL",
    "ChronicPancreatitis": "Chronic Pancreatitis",
    "AcutePancreatitis": "Acute Pancreatitis",
    "Normal": "Normal",
}
ROW_ORDER = ("ALL", "ChronicPancreatitis", "AcutePancreatitis", "Normal")
METRIC_COLUMNS = ("dsc", "precision", "accuracy", "jaccard", "recall", "hd95_mm")
QC_STATUSES = ("included", "excluded_low_quality")


@dataclass(frozen=True)
class CaseEntry:
    case_id: str
    group: str
    sex: str
    age_years: float
    field_strength: float
    fat_suppressed: bool
    image_path: str
    reference_path: str
    prediction_paths: dict = field(default_factory=dict)
    qc_status: str = "included"
    qc_reason: str | None = None

    @property
    def included(self) -> bool:
        return self.qc_status == "included"


@dataclass(frozen=True)
class CohortManifest:
    cases: tuple[CaseEntry, ...]
    base_dir: Path = Path(".")

    def included(self) -> list[CaseEntry]:
        return [c for c in self.cases if c.included]

    def excluded(self) -> list[CaseEntry]:
        return [c for c in self.cases if not c.included]

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p


def _validate_case(rec: dict, line_no: int) -> CaseEntry:
    def need(key):
        if key not in rec:
            raise SchemaError(f"line {line_no}: missing field {key!r}")
        return rec[key]

    group = need("group")
    if group not in GROUPS:
        raise SchemaError(f"line {line_no}: group {group!r} not one of {GROUPS}")
    sex = need("sex")
    if sex not in ("F", "M"):
        raise SchemaError(f"line {line_no}: sex {sex!r} must be F or M")
    try:
        age = float(need("age_years"))
    except (TypeError, ValueError):
        raise SchemaError(f"line {line_no}: age_years {rec.get('age_years')!r} not a number")
    if age < 0:
        raise SchemaError(f"line {line_no}: age_years must be >= 0")
    fs = float(need("field_strength"))
    if fs not in (1.5, 3.0):
        raise SchemaError(f"line {line_no}: field_strength {fs} must be 1.5 or 3.0")
    qc = rec.get("qc_status", "included")
    if qc not in QC_STATUSES:
        raise SchemaError(f"line {line_no}: qc_status {qc!r} not one of {QC_STATUSES}")
    preds = rec.get("prediction_paths", {})
    if not isinstance(preds, dict):
        raise SchemaError(f"line {line_no}: prediction_paths must be an object")
    return CaseEntry(
        case_id=str(need("case_id")),
        group=group,
        sex=sex,
        age_years=age,
        field_strength=fs,
        fat_suppressed=bool(need("fat_suppressed")),
        image_path=str(need("image_path")),
        reference_path=str(need("reference_path")),
        prediction_paths={str(k): str(v) for k, v in preds.items()},
        qc_status=qc,
        qc_reason=rec.get("qc_reason"),
    )


def load_manifest(path: str | Path, check_files: bool = True) -> CohortManifest:
    """Parse and validate a JSON-lines cohort manifest.

    Raises SchemaError (with line number), DuplicateCaseId, and
    MissingFile when an included case's image or reference is absent.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    cases: list[CaseEntry] = []
    seen: set[str] = set()
    for line_no, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {line_no}: invalid JSON ({exc})") from exc
        if line_no == 1 and "manifest_version" in rec:
            continue
        case = _validate_case(rec, line_no)
        if case.case_id in seen:
            raise DuplicateCaseId(f"line {line_no}: duplicate case id {case.case_id!r}")
        seen.add(case.case_id)
        cases.append(case)
    if not cases:
        raise SchemaError("manifest has no cases")
    manifest = CohortManifest(cases=tuple(cases), base_dir=path.parent)
    if check_files:
        for c in manifest.included():
            for kind, rel in (("image", c.image_path), ("reference", c.reference_path)):
                if not manifest.resolve(rel).exists():
                    raise MissingFile(f"case {c.case_id!r}: {kind} file {rel} not found")
    return manifest


def save_manifest(manifest: CohortManifest, path: str | Path) -> None:
    lines = [json.dumps({"manifest_version": 1})]
    for c in manifest.cases:
        rec = {
            "case_id": c.case_id,
            "group": c.group,
            "sex": c.sex,
            "age_years": c.age_years,
            "field_strength": c.field_strength,
            "fat_suppressed": c.fat_suppressed,
            "image_path": c.image_path,
            "reference_path": c.reference_path,
            "prediction_paths": c.prediction_paths,
            "qc_status": c.qc_status,
        }
        if c.qc_reason:
            rec["qc_reason"] = c.qc_reason
        lines.append(json.dumps(rec, sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def manifest_from_csv(path: str | Path) -> CohortManifest:
    """CSV import: same fields as JSONL, predictions in `prediction:<model>` columns."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    cases: list[CaseEntry] = []
    seen: set[str] = set()
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        for line_no, row in enumerate(reader, start=2):
            rec = {k: v for k, v in row.items() if not k.startswith("prediction:") and v != ""}
            if "fat_suppressed" in rec:
                rec["fat_suppressed"] = rec["fat_suppressed"].strip().lower() in ("1", "true", "yes")
            preds = {
                k.split(":", 1)[1]: v
                for k, v in row.items()
                if k.startswith("prediction:") and v
            }
            rec["prediction_paths"] = preds
            case = _validate_case(rec, line_no)
            if case.case_id in seen:
                raise DuplicateCaseId(f"line {line_no}: duplicate case id {case.case_id!r}")
            seen.add(case.case_id)
            cases.append(case)
    if not cases:
        raise SchemaError("CSV manifest has no cases")
    return CohortManifest(cases=tuple(cases), base_dir=path.parent)


# --- evaluation ---------------------------------------------------------------

@dataclass(frozen=True)
class AggregateRow:
    group: str
    metrics: dict  # metric -> (mean, sd); None where no defined values
    n_included: int
    n_failed: int
    n_excluded: int


@dataclass
class CaseResult:
    case_id: str
    group: str
    record: segmetrics.MetricsRecord


@dataclass
class CohortResult:
    model: str
    per_case: list[CaseResult]
    aggregates: dict[str, AggregateRow]
    excluded: list[CaseEntry]

    def aggregate_all(self) -> AggregateRow:
        return self.aggregates["ALL"]


def _prediction_mask(manifest: CohortManifest, case: CaseEntry, model: str,
                     weights=None, config=None):
    rel = case.prediction_paths.get(model)
    if rel is not None:
        p = manifest.resolve(rel)
        if not p.exists():
            raise MissingFile(f"case {case.case_id!r}: prediction file {rel} not found")
        return niftio.read_mask(p)
    if weights is not None and config is not None:
        from .segnet import sliding_window_infer

        grid, _ = niftio.read_nifti(manifest.resolve(case.image_path))
        return sliding_window_infer(grid, weights, config)
    raise MissingPrediction(f"case {case.case_id!r}: no prediction for model {model!r}")


def _aggregate_value(record: segmetrics.MetricsRecord, metric: str):
    value = getattr(record, metric)
    if record.failure and metric in ("dsc", "jaccard", "precision", "recall") and value is None:
        return 0.0  # empty-prediction failure contributes zero overlap
    if metric == "hd95_mm" and record.failure:
        return None
    return value


def _aggregate(group: str, results: list[CaseResult], n_excluded: int) -> AggregateRow:
    metrics = {}
    for m in METRIC_COLUMNS + ("volume_error_ml",):
        metrics[m] = mean_sd(_aggregate_value(r.record, m) for r in results)
    return AggregateRow(
        group=group,
        metrics=metrics,
        n_included=len(results),
        n_failed=sum(1 for r in results if r.record.failure),
        n_excluded=n_excluded,
    )


def evaluate_cohort(manifest: CohortManifest, model: str,
                    weights=None, config=None) -> CohortResult:
    """Per-case metrics plus ALL/CP/AP/Normal aggregate rows.

    Predictions come from the manifest's files for ``model``; when
    ``weights``/``config`` are given, cases without a prediction file
    are segmented with the network instead.
    """
    per_case: list[CaseResult] = []
    for case in sorted(manifest.included(), key=lambda c: c.case_id):
        try:
            ref = niftio.read_mask(manifest.resolve(case.reference_path))
            pred = _prediction_mask(manifest, case, model, weights, config)
            pair = SegmentationPair(prediction=pred, reference=ref)
            record = segmetrics.evaluate_pair(pair)
        except (MissingPrediction, MissingFile):
            raise
        except Exception as exc:
            raise type(exc)(f"case {case.case_id!r}: {exc}") from exc
        per_case.append(CaseResult(case.case_id, case.group, record))

    excluded = manifest.excluded()
    n_excl = {g: sum(1 for c in excluded if c.group == g) for g in GROUPS}
    aggregates = {"ALL": _aggregate("ALL", per_case, len(excluded))}
    for g in GROUPS:
        aggregates[g] = _aggregate(
            g, [r for r in per_case if r.group == g], n_excl[g]
        )
    return CohortResult(model=model, per_case=per_case, aggregates=aggregates,
                        excluded=list(excluded))


def benchmark(manifest: CohortManifest, models: list[str]) -> list[dict]:
    """One comparison row per model over ALL included cases, DSC-descending."""
    if len(models) < 2:
        raise ValueError("benchmark needs at least two models")
    rows = []
    for model in models:
        agg = evaluate_cohort(manifest, model).aggregate_all()
        rows.append(
            {
                "model": model,
                "dsc": agg.metrics["dsc"],
                "jaccard": agg.metrics["jaccard"],
                "hd95_mm": agg.metrics["hd95_mm"],
                "n_included": agg.n_included,
                "n_failed": agg.n_failed,
            }
        )
    rows.sort(key=lambda r: (-(r["dsc"][0] if r["dsc"][0] is not None else -1), r["model"]))
    return rows


# --- volume regression --------------------------------------------------------

VOLUME_STRATA = ("Normal", "Diseased", "ALL")


@dataclass
class VolumeReport:
    fits: dict  # stratum -> RegressionFit | None
    errors: dict  # stratum -> message for strata that could not be fit
    scatter: list[dict]  # case_id, group, manual_ml, predicted_ml


def volume_report(manifest: CohortManifest, model: str,
                  exclusions: list[str] | None = None,
                  weights=None, config=None) -> VolumeReport:
    """OLS fits of predicted vs manual volumes for Normal/Diseased/ALL.

    ``exclusions`` drops further case ids (e.g. poor-quality scans) on
    top of the manifest's QC exclusions.
    """
    drop = set(exclusions or [])
    scatter = []
    for case in sorted(manifest.included(), key=lambda c: c.case_id):
        if case.case_id in drop:
            continue
        ref = niftio.read_mask(manifest.resolve(case.reference_path))
        pred = _prediction_mask(manifest, case, model, weights, config)
        pair = SegmentationPair(prediction=pred, reference=ref)
        pred_ml, ref_ml, _ = segmetrics.volumes(pair)
        scatter.append(
            {
                "case_id": case.case_id,
                "group": case.group,
                "manual_ml": ref_ml,
                "predicted_ml": pred_ml,
            }
        )

    def stratum_cases(name: str):
        if name == "ALL":
            return scatter
        if name == "Diseased":
            return [s for s in scatter if s["group"] != "Normal"]
        return [s for s in scatter if s["group"] == name]

    fits: dict = {}
    errors: dict = {}
    for name in VOLUME_STRATA:
        rows = stratum_cases(name)
        try:
            fits[name] = ols_fit(
                [r["manual_ml"] for r in rows], [r["predicted_ml"] for r in rows]
            )
        except (TooFewPoints, DegenerateX) as exc:
            fits[name] = None
            errors[name] = f"{type(exc).__name__}: {exc}"
    return VolumeReport(fits=fits, errors=errors, scatter=scatter)


# --- report emission ----------------------------------------------------------

def _fmt_cell(pair) -> str:
    mean, sd = pair
    if mean is None:
        return ""
    if sd is None:
        return f"{mean:.4f}"
    return f"{mean:.4f} ({sd:.4f})"


def summary_csv_text(result: CohortResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    header = ["Group", "n", "Failed", "Excluded",
              "DSC (SD)", "Precision (SD)", "Accuracy (SD)",
              "Jaccard (SD)", "Recall (SD)", "HD95 (SD)"]
    writer.writerow(header)
    for key in ROW_ORDER:
        agg = result.aggregates[key]
        writer.writerow(
            [GROUP_LABELS[key], agg.n_included, agg.n_failed, agg.n_excluded]
            + [_fmt_cell(agg.metrics[m]) for m in METRIC_COLUMNS]
        )
    return buf.getvalue()


def benchmark_csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["Model", "DSC (SD)", "Jaccard (SD)", "HD95 (SD)", "n", "Failed"])
    for r in rows:
        writer.writerow(
            [r["model"], _fmt_cell(r["dsc"]), _fmt_cell(r["jaccard"]),
             _fmt_cell(r["hd95_mm"]), r["n_included"], r["n_failed"]]
        )
    return buf.getvalue()


def write_report(result: CohortResult, outdir: str | Path,
                 volume: VolumeReport | None = None,
                 annotations: dict | None = None) -> None:
    """Emit summary.csv, summary.json, cases.jsonl (and scatter.csv).

    ``annotations`` is an arbitrary user-supplied mapping (e.g. published
    values to compare an external-validation run against); it is echoed
    verbatim into summary.json, never interpreted.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "summary.csv").write_text(summary_csv_text(result))

    summary = {
        "model": result.model,
        "rows": {
            key: {
                "label": GROUP_LABELS[key],
                "n_included": agg.n_included,
                "n_failed": agg.n_failed,
                "n_excluded": agg.n_excluded,
                "metrics": {
                    m: {"mean": agg.metrics[m][0], "sd": agg.metrics[m][1]}
                    for m in agg.metrics
                },
            }
            for key, agg in result.aggregates.items()
        },
        "excluded_cases": [
            {"case_id": c.case_id, "group": c.group, "qc_reason": c.qc_reason}
            for c in result.excluded
        ],
    }
    if volume is not None:
        summary["volume_regression"] = {
            name: (
                None
                if volume.fits[name] is None
                else {
                    "slope": volume.fits[name].slope,
                    "intercept": volume.fits[name].intercept,
                    "r_squared": volume.fits[name].r_squared,
                    "n": volume.fits[name].n,
                }
            )
            for name in VOLUME_STRATA
        }
        summary["volume_regression_errors"] = volume.errors
    if annotations:
        summary["annotations"] = annotations
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")

    with (outdir / "cases.jsonl").open("w") as fh:
        for r in result.per_case:
            rec = {"case_id": r.case_id, "group": r.group, **r.record.to_dict()}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")

    if volume is not None:
        with (outdir / "scatter.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["case_id", "group", "manual_ml", "predicted_ml"])
            for row in volume.scatter:
                writer.writerow(
                    [row["case_id"], row["group"], repr(row["manual_ml"]),
                     repr(row["predicted_ml"])]
                )
