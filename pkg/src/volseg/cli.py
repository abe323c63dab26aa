"""Command-line entry points.

Subcommands: segment, metrics, cohort-eval, benchmark, agreement,
train, serve. Exit codes: 0 success, 1 usage error, 2 data error
(any :class:`VolsegError`). ``--json`` switches machine output on where
supported. The default service port honors ``VOLSEG_PORT``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import VolsegError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="volseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="segment a NIfTI volume with saved weights")
    p.add_argument("input", help="input volume (.nii or .nii.gz)")
    p.add_argument("--weights", required=True, help="weights container file")
    p.add_argument("--modality", required=True, choices=["T1", "T2"])
    p.add_argument("--out", required=True, help="output mask path (.nii[.gz])")

    p = sub.add_parser("metrics", help="compare a prediction mask against a reference")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--json", action="store_true", dest="as_json")

    p = sub.add_parser("cohort-eval", help="evaluate one model over a cohort manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--report", required=True, help="output report directory")
    p.add_argument("--exclude", default="", help="comma-separated case ids to drop from regression")

    p = sub.add_parser("benchmark", help="compare multiple models' prediction sets")
    p.add_argument("--manifest", required=True)
    p.add_argument("--models", required=True, help="comma-separated model names")
    p.add_argument("--out", default=None, help="optional CSV output path")

    p = sub.add_parser("agreement", help="run an inter/intra observer study")
    p.add_argument("--study", required=True, help="study manifest (JSONL)")
    p.add_argument("--json", action="store_true", dest="as_json")

    p = sub.add_parser("train", help="train the toy network")
    p.add_argument("--config", required=True, help="network config JSON file")
    p.add_argument("--data", required=True, help="data dir with images/ and labels/")
    p.add_argument("--out", required=True, help="output weights path")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--augment", action="store_true")
    p.add_argument("--loss-curve", default=None, help="optional CSV for the loss curve")
    p.add_argument("--modality", default=None, choices=["T1", "T2"])

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--port", type=int, default=int(os.environ.get("VOLSEG_PORT", "8765")))
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument(
        "--weights",
        action="append",
        default=[],
        help="MODALITY=PATH weight set (repeatable), e.g. --weights T2=weights.vsgw",
    )
    return parser


def _load_weight_set(path: str, modality: str | None = None):
    from .segnet import load_weights

    weights, config, meta = load_weights(path)
    tagged = meta.get("modality")
    if modality is not None and tagged is not None and tagged != modality:
        raise VolsegError(
            f"weights file {path} is tagged modality {tagged!r}, not {modality!r}"
        )
    return weights, config


def _cmd_segment(args) -> int:
    from . import niftio
    from .segnet import sliding_window_infer

    weights, config = _load_weight_set(args.weights, args.modality)
    grid, _ = niftio.read_nifti(args.input)
    mask = sliding_window_infer(grid, weights, config)
    niftio.save_mask(mask, args.out)
    print(f"wrote {args.out} ({int(mask.voxels.sum())} foreground voxels)")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    from . import niftio, segmetrics
    from .volcore import SegmentationPair

    pred = niftio.read_mask(args.pred)
    ref = niftio.read_mask(args.ref)
    record = segmetrics.evaluate_pair(SegmentationPair(prediction=pred, reference=ref))
    if args.as_json:
        print(json.dumps(record.to_dict(), sort_keys=True))
    else:
        for key, value in record.to_dict().items():
            print(f"{key}: {value}")
    return EXIT_OK


def _cmd_cohort_eval(args) -> int:
    from . import cohort

    manifest = cohort.load_manifest(args.manifest)
    result = cohort.evaluate_cohort(manifest, args.model)
    exclusions = [s for s in args.exclude.split(",") if s]
    volume = cohort.volume_report(manifest, args.model, exclusions=exclusions)
    cohort.write_report(result, args.report, volume=volume)
    print(f"report written to {args.report}")
    agg = result.aggregate_all()
    mean, sd = agg.metrics["dsc"]
    print(f"ALL: n={agg.n_included} failed={agg.n_failed} DSC {mean:.4f} ({sd if sd is None else round(sd, 4)})")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    from . import cohort

    manifest = cohort.load_manifest(args.manifest)
    models = [m for m in args.models.split(",") if m]
    rows = cohort.benchmark(manifest, models)
    text = cohort.benchmark_csv_text(rows)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_agreement(args) -> int:
    from . import agreement

    study = agreement.load_study(args.study)
    summary = agreement.run_observer_study(study, base_dir=Path(args.study).parent)
    if args.as_json:
        out = {
            "mode": summary.mode,
            "rows": {
                label: {k: v for k, v in row.items()}
                for label, row in summary.rows.items()
            },
        }
        print(json.dumps(out, sort_keys=True))
    else:
        for label, row in summary.rows.items():
            cells = [f"{m}={_fmt_pair(row[m])}" for m in (*agreement.STUDY_METRICS, "kappa")]
            print(f"[{summary.mode}] {label} (n={row['n']}): " + " ".join(cells))
    return EXIT_OK


def _fmt_pair(pair) -> str:
    mean, sd = pair
    if mean is None:
        return "n/a"
    if sd is None:
        return f"{mean:.4f}"
    return f"{mean:.4f}({sd:.4f})"


def _cmd_train(args) -> int:
    from . import niftio
    from .segnet import NetworkConfig, make_sample, save_loss_curve, save_weights, train

    config = NetworkConfig.from_dict(json.loads(Path(args.config).read_text()))
    data_dir = Path(args.data)
    image_dir, label_dir = data_dir / "images", data_dir / "labels"
    if not image_dir.is_dir() or not label_dir.is_dir():
        raise VolsegError(f"{data_dir} must contain images/ and labels/ subdirectories")
    samples = []
    for image_path in sorted(image_dir.iterdir()):
        label_path = label_dir / image_path.name
        if not label_path.exists():
            raise VolsegError(f"no label for image {image_path.name}")
        grid, _ = niftio.read_nifti(image_path)
        samples.append(make_sample(grid, niftio.read_mask(label_path)))
    if not samples:
        raise VolsegError(f"no training images found in {image_dir}")
    weights, curve = train(config, samples, epochs=args.epochs, augment=args.augment)
    metadata = {"modality": args.modality} if args.modality else {}
    save_weights(weights, config, args.out, metadata=metadata)
    if args.loss_curve:
        save_loss_curve(curve, args.loss_curve)
    print(f"trained {len(curve)} epochs on {len(samples)} samples; "
          f"final loss {curve[-1]:.6f}" if curve else "no epochs run")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    from .service import run_server

    weight_sets = {}
    for spec in args.weights:
        if "=" not in spec:
            raise VolsegError(f"--weights expects MODALITY=PATH, got {spec!r}")
        modality, path = spec.split("=", 1)
        if modality not in ("T1", "T2"):
            raise VolsegError(f"modality must be T1 or T2, got {modality!r}")
        weight_sets[modality] = _load_weight_set(path, modality)
    print(f"serving on {args.host}:{args.port} with modalities {sorted(weight_sets)}")
    run_server(weight_sets, host=args.host, port=args.port)
    return EXIT_OK


_COMMANDS = {
    "segment": _cmd_segment,
    "metrics": _cmd_metrics,
    "cohort-eval": _cmd_cohort_eval,
    "benchmark": _cmd_benchmark,
    "agreement": _cmd_agreement,
    "train": _cmd_train,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except VolsegError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: MissingFile: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
