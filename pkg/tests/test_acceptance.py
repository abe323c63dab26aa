"""Acceptance gate: every criterion at its stated tolerance.

Each test prints one `[ACCEPTANCE] <criterion>: PASS` line (visible with
`pytest -s` or `-rA`); a failing criterion fails its test outright.
"""

import csv
import json
import time

import numpy as np
import pytest

import volseg
from volseg import cohort, niftio, segmetrics
from volseg.agreement import STUDY_METRICS, kappa_from_contingency, cohen_kappa, ols_fit
from volseg.segnet import (
    NetworkConfig,
    dense_attention_oracle,
    init_weights,
    linear_attention,
    loss_and_grads,
    make_sample,
    sliding_window_infer,
    train,
)
from volseg.volcore import LabelMask, SegmentationPair, VoxelGrid

from helpers import (
    build_nifti_file,
    confusion_oracle,
    hd95_oracle,
    make_grid,
    make_mask,
    mask_from_flat_indices,
    random_pair,
)


def report(name):
    print(f"\n[ACCEPTANCE] {name}: PASS")


@pytest.fixture(scope="module")
def corpus():
    """200 seeded random mask pairs on grids up to 20^3."""
    rng = np.random.default_rng(20250810)
    return [random_pair(rng, max_dim=20) for _ in range(200)]


def _overlap_from_counts(tp, fp, fn, tn):
    def ratio(num, den):
        return None if den == 0 else num / den

    total = tp + fp + fn + tn
    return (
        ratio(2 * tp, 2 * tp + fp + fn),
        ratio(tp, tp + fp + fn),
        ratio(tp, tp + fp),
        ratio(tp, tp + fn),
        ratio(tp + tn, total),
    )


class TestPrimaryCriteria:
    def test_metric_oracle_equivalence(self, corpus):
        started = time.monotonic()
        n_hd95 = 0
        for pair in corpus:
            counts = segmetrics.confusion(pair)
            oracle_counts = confusion_oracle(pair.prediction, pair.reference)
            assert (counts.tp, counts.fp, counts.fn, counts.tn) == oracle_counts
            got = segmetrics.overlap_metrics(counts)
            expected = _overlap_from_counts(*oracle_counts)
            assert got == expected  # same integer counts -> bitwise-equal ratios
            if pair.prediction.voxels.any() and pair.reference.voxels.any():
                n_hd95 += 1
                assert abs(segmetrics.hd95(pair) - hd95_oracle(pair)) <= 1e-9
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"criterion ran in {elapsed:.1f}s, limit 60s"
        assert n_hd95 >= 150  # the corpus genuinely exercises the boundary metric
        report(f"metric oracle equivalence (200 pairs, {n_hd95} with hd95, {elapsed:.1f}s)")

    def test_dice_jaccard_identity_and_hd95_scale_equivariance(self, corpus):
        for pair in corpus:
            dsc, jac, *_ = segmetrics.overlap_metrics(segmetrics.confusion(pair))
            if jac is not None:
                assert abs(dsc - 2 * jac / (1 + jac)) <= 1e-12
        for pair in corpus[:30]:
            if not (pair.prediction.voxels.any() and pair.reference.voxels.any()):
                continue
            base_hd = segmetrics.hd95(pair)
            base_overlap = segmetrics.overlap_metrics(segmetrics.confusion(pair))
            for s in (0.5, 2.0, 3.0):
                sp = tuple(v * s for v in pair.prediction.spacing)
                scaled = SegmentationPair(
                    make_mask(pair.prediction.voxels, sp),
                    make_mask(pair.reference.voxels, sp),
                )
                assert abs(segmetrics.hd95(scaled) - s * base_hd) <= 1e-9 * s
                assert segmetrics.overlap_metrics(segmetrics.confusion(scaled)) == base_overlap
        report("dice-jaccard identity (1e-12) and hd95 scale equivariance (1e-9*s)")

    def test_nifti_round_trip(self):
        # hand-built 352-byte fixture, assembled independently of the writer
        grid, header = niftio.read_nifti(build_nifti_file())
        assert grid.dims == (2, 2, 2)
        assert grid.spacing == (1.0, 1.0, 1.0)
        assert np.array_equal(grid.flat(), np.arange(8.0))
        assert header.sizeof_hdr == 348 and header.magic == b"n+1"

        rng = np.random.default_rng(77)
        ranges = {2: (0, 255), 4: (-32768, 32767), 8: (-(2 ** 31), 2 ** 31 - 1)}
        for code in (2, 4, 8, 16, 64):
            dims = tuple(int(rng.integers(2, 9)) for _ in range(3))
            spacing = tuple(float(np.float32(rng.uniform(0.25, 6.0))) for _ in range(3))
            n = int(np.prod(dims))
            if code in ranges:
                data = rng.integers(*ranges[code], size=n).astype(np.float64)
            elif code == 16:
                data = rng.normal(0, 50, n)
            else:
                data = rng.normal(0, 50, n)
            grid = VoxelGrid.from_flat(dims, spacing, data)
            back, _ = niftio.read_nifti(niftio.write_nifti(grid, datatype=code))
            assert back.dims == dims
            assert back.spacing == spacing  # exact
            assert np.allclose(back.affine, grid.affine, rtol=1e-6, atol=1e-6)
            if code == 16:
                ulp = np.spacing(np.abs(data).astype(np.float32)).astype(np.float64)
                assert np.all(np.abs(back.flat() - data) <= ulp)
            else:
                assert np.array_equal(back.flat(), data)  # bit-exact
        report("nifti round-trip (5 datatypes bit-exact/1-ulp, hand-built fixture)")

    def test_kappa_and_regression(self):
        res = kappa_from_contingency(40, 10, 10, 40)
        assert abs(res.kappa - 0.6) <= 1e-12

        mask = mask_from_flat_indices((6, 6, 3), range(40))
        assert abs(cohen_kappa(mask, mask).kappa - 1.0) <= 1e-12

        fit = ols_fit([1, 2, 3], [1, 2, 2])
        assert abs(fit.r_squared - 0.75) <= 1e-10

        rng = np.random.default_rng(5)
        for _ in range(25):
            n = int(rng.integers(3, 60))
            x = rng.normal(0, 4, n)
            y = 1.7 * x + rng.normal(0, 2, n)
            fit = ols_fit(x, y)
            assert abs(fit.r_squared - np.corrcoef(x, y)[0, 1] ** 2) <= 1e-10
        report("kappa 0.6/1.0 (1e-12), OLS R^2 0.75 (1e-10), R^2 == corr^2 (1e-10)")

    def test_linear_attention_against_dense_oracle(self):
        rng = np.random.default_rng(6)
        heads = 4
        for n, d in [(1, 8), (5, 16), (16, 16), (33, 32), (64, 32)]:
            tokens = rng.normal(0, 1, (n, d))
            weights = tuple(rng.normal(0, d ** -0.5, (d, d)) for _ in range(4))
            fast = linear_attention(tokens, *weights, heads)
            slow = dense_attention_oracle(tokens, *weights, heads)
            rel = np.abs(fast - slow).max() / np.abs(slow).max()
            assert rel <= 1e-6, (n, d, rel)

        # permutation equivariance, bitwise: dyadic positive inputs keep all
        # sums/products exact in float64, so token order cannot matter at all
        choices = np.array([0.25, 0.5, 0.75, 1.0, 1.5, 2.0])
        tokens = rng.choice(choices, size=(64, 32))
        weights = tuple(rng.choice(choices, size=(32, 32)) for _ in range(4))
        perm = rng.permutation(64)
        out = linear_attention(tokens, *weights, heads)
        out_perm = linear_attention(tokens[perm], *weights, heads)
        assert np.array_equal(out[perm], out_perm)
        report("linear attention vs dense oracle (<=1e-6 rel), permutation exact")

    def test_gradient_check_every_parameter(self):
        config = NetworkConfig(patch_size=(4, 4, 4), base_channels=2, depth=1,
                               attention_heads=2, attention_dim=4, seed=3)
        rng = np.random.default_rng(7)
        weights = init_weights(config, rng)
        x = rng.normal(0, 1, (2, 1, 4, 4, 4))
        y = (rng.random((2, 4, 4, 4)) > 0.5).astype(np.uint8)
        _, grads = loss_and_grads(x, y, weights, config)

        h = 1e-6
        checked = 0
        for name, arr in weights.items():
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                perturbed = {k: v.copy() for k, v in weights.items()}
                perturbed[name][idx] += h
                lp, _ = loss_and_grads(x, y, perturbed, config)
                perturbed[name][idx] -= 2 * h
                lm, _ = loss_and_grads(x, y, perturbed, config)
                numeric = (lp - lm) / (2 * h)
                analytic = grads[name][idx]
                tol = 1e-4 * max(abs(numeric), abs(analytic), 1e-8)
                assert abs(numeric - analytic) <= tol, (name, idx, analytic, numeric)
                checked += 1
        assert checked == sum(a.size for a in weights.values())
        report(f"gradient check, all {checked} parameters (<=1e-4 rel, fp64)")

    def test_toy_training_sphere_overfit(self):
        n, radius = 32, 9.0
        rng = np.random.default_rng(0)
        idx = np.indices((n, n, n)).astype(float)
        dist = np.sqrt(((idx - (n - 1) / 2) ** 2).sum(axis=0))
        inside = dist <= radius
        image = np.where(inside, 1.0, 0.0) + rng.normal(0, 0.05, (n, n, n))
        grid = make_grid((n, n, n), data=image)
        label = make_mask(inside.astype(np.uint8))
        sample = make_sample(grid, label)

        config = NetworkConfig(patch_size=(16, 16, 16), base_channels=8, depth=2,
                               attention_heads=4, attention_dim=32, seed=0,
                               learning_rate=0.01, batch_size=2)
        started = time.monotonic()
        weights, curve = train(config, [sample], epochs=200)  # 1 sample -> 200 steps
        elapsed = time.monotonic() - started
        assert elapsed < 300.0, f"training took {elapsed:.0f}s, limit 300s"

        prediction = sliding_window_infer(grid, weights, config)
        record = segmetrics.evaluate_pair(SegmentationPair(prediction, label))
        assert record.dsc >= 0.95, f"training-set DSC {record.dsc:.4f} < 0.95"

        assert all(v >= 0 for v in curve)
        assert curve[9] < curve[0]  # early descent on the phantom

        # identical seed -> bit-identical loss curve (prefix re-runs twice)
        _, c1 = train(config, [sample], epochs=15)
        _, c2 = train(config, [sample], epochs=15)
        assert c1 == c2 == curve[:15]
        report(
            f"toy training: DSC {record.dsc:.4f} >= 0.95 in 200 steps, "
            f"{elapsed:.0f}s < 300s, bit-identical curves"
        )

    def _two_case_manifest(self, tmp_path, extra_records=(), extra_files=()):
        ref1 = mask_from_flat_indices((4, 4, 4), [0, 1, 2, 3, 8])
        pred1 = mask_from_flat_indices((4, 4, 4), [0, 1, 2, 3, 9])   # DSC 0.8
        ref2 = mask_from_flat_indices((4, 4, 4), [0, 1, 2, 16, 17])
        pred2 = mask_from_flat_indices((4, 4, 4), [0, 1, 2, 24, 25])  # DSC 0.6
        lines = [json.dumps({"manifest_version": 1})]
        for cid, ref, pred, group in [("c1", ref1, pred1, "Normal"),
                                      ("c2", ref2, pred2, "AcutePancreatitis")]:
            niftio.save_nifti(ref.grid, tmp_path / f"{cid}_img.nii.gz")
            niftio.save_mask(ref, tmp_path / f"{cid}_ref.nii.gz")
            niftio.save_mask(pred, tmp_path / f"{cid}_pred.nii.gz")
            lines.append(json.dumps({
                "case_id": cid, "group": group, "sex": "F", "age_years": 10,
                "field_strength": 1.5, "fat_suppressed": False,
                "image_path": f"{cid}_img.nii.gz", "reference_path": f"{cid}_ref.nii.gz",
                "prediction_paths": {"modelA": f"{cid}_pred.nii.gz",
                                     "modelB": f"{cid}_ref.nii.gz"},
            }))
        for name, mask in extra_files:
            niftio.save_mask(mask, tmp_path / name)
        lines.extend(json.dumps(r) for r in extra_records)
        path = tmp_path / "manifest.jsonl"
        path.write_text("\n".join(lines) + "\n")
        return cohort.load_manifest(path)

    def test_cohort_reporting(self, tmp_path):
        manifest = self._two_case_manifest(tmp_path)
        result = cohort.evaluate_cohort(manifest, "modelA")
        mean, sd = result.aggregate_all().metrics["dsc"]
        assert mean == pytest.approx(0.70, abs=1e-12)
        assert sd == pytest.approx(0.1414, abs=5e-5)
        csv_text = cohort.summary_csv_text(result)
        assert "0.7000 (0.1414" in csv_text  # Table-style "mean (sd)" cell

        # failed case: zero overlap, absent from the HD95 aggregate
        ref = mask_from_flat_indices((4, 4, 4), range(8))
        empty = make_mask(np.zeros((4, 4, 4)))
        failed_manifest = self._two_case_manifest(
            tmp_path,
            extra_records=[{
                "case_id": "c3", "group": "ChronicPancreatitis", "sex": "M",
                "age_years": 9, "field_strength": 3.0, "fat_suppressed": True,
                "image_path": "c3_img.nii.gz", "reference_path": "c3_ref.nii.gz",
                "prediction_paths": {"modelA": "c3_pred.nii.gz",
                                     "modelB": "c3_ref.nii.gz"},
            }],
            extra_files=[("c3_ref.nii.gz", ref), ("c3_pred.nii.gz", empty),
                         ("c3_img.nii.gz", ref)],
        )
        res = cohort.evaluate_cohort(failed_manifest, "modelA")
        cp_row = res.aggregates["ChronicPancreatitis"]
        assert cp_row.n_failed == 1
        assert cp_row.metrics["dsc"][0] == 0.0
        assert cp_row.metrics["hd95_mm"] == (None, None)  # no defined HD95 values
        all_row = res.aggregates["ALL"]
        assert all_row.metrics["dsc"][0] == pytest.approx((0.8 + 0.6 + 0.0) / 3)
        hd_mean, _ = all_row.metrics["hd95_mm"]
        defined_hd = [r.record.hd95_mm for r in res.per_case if r.record.hd95_mm is not None]
        assert len(defined_hd) == 2  # failed case contributes nothing
        assert hd_mean == pytest.approx(float(np.mean(defined_hd)))

        # benchmark ALL row equals evaluate_cohort's ALL row
        rows = {r["model"]: r for r in cohort.benchmark(manifest, ["modelA", "modelB"])}
        for model in ("modelA", "modelB"):
            agg = cohort.evaluate_cohort(manifest, model).aggregate_all()
            assert rows[model]["dsc"] == agg.metrics["dsc"]
            assert rows[model]["jaccard"] == agg.metrics["jaccard"]
            assert rows[model]["hd95_mm"] == agg.metrics["hd95_mm"]
        report("cohort reporting: mean 0.70 / SD 0.1414, failure policy, benchmark == cohort")

    def test_report_schemas_match_published_tables(self, tmp_path):
        """Paper-number reproduction needs the released dataset + weights and is
        an optional integration run; the gate here is the exact report schema."""
        manifest = self._two_case_manifest(tmp_path)
        result = cohort.evaluate_cohort(manifest, "modelA")
        volume = cohort.volume_report(manifest, "modelA")
        outdir = tmp_path / "report"
        cohort.write_report(result, outdir, volume=volume,
                            annotations={"source": "external-validation targets"})

        with (outdir / "summary.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["Group", "n", "Failed", "Excluded", "DSC (SD)",
                           "Precision (SD)", "Accuracy (SD)", "Jaccard (SD)",
                           "Recall (SD)", "HD95 (SD)"]
        assert [r[0] for r in rows[1:]] == ["ALL", "Chronic Pancreatitis",
                                            "Acute Pancreatitis", "Normal"]

        bench_text = cohort.benchmark_csv_text(cohort.benchmark(manifest, ["modelA", "modelB"]))
        assert bench_text.splitlines()[0] == "Model,DSC (SD),Jaccard (SD),HD95 (SD),n,Failed"
        models = [line.split(",")[0] for line in bench_text.splitlines()[1:]]
        assert sorted(models) == ["modelA", "modelB"]

        summary = json.loads((outdir / "summary.json").read_text())
        assert summary["annotations"] == {"source": "external-validation targets"}
        assert set(summary["volume_regression"]) == {"Normal", "Diseased", "ALL"}

        # observer-study rows carry the same metric family as the agreement table
        assert STUDY_METRICS == ("dsc", "precision", "jaccard", "recall", "hd95_mm")
        report("report schemas: summary/benchmark/agreement columns pinned; "
               "numeric reproduction documented as optional integration run")

    def test_full_primary_suite_has_no_ui_dependency(self):
        """The primary suite imports no frontend code (it does not exist here)."""
        import volseg.cli
        import volseg.service  # noqa: F401
        assert not hasattr(volseg, "viewer")
        report("primary suite independent of any UI build")
