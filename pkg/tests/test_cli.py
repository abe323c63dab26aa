import json

import numpy as np
import pytest

from volseg import niftio
from volseg.cli import main
from volseg.segnet import NetworkConfig, init_weights, save_weights

from helpers import make_grid, make_mask, mask_from_flat_indices

CFG = NetworkConfig(patch_size=(8, 8, 8), base_channels=2, depth=1,
                    attention_heads=2, attention_dim=4, seed=2)


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, capsys):
        assert main(["metrics", "--nope"]) == 1

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_data_error_is_exit_2(self, tmp_path, capsys):
        a = tmp_path / "a.nii.gz"
        b = tmp_path / "b.nii.gz"
        niftio.save_mask(mask_from_flat_indices((4, 4, 4), [0]), a)
        niftio.save_mask(mask_from_flat_indices((3, 3, 3), [0]), b)
        assert main(["metrics", "--pred", str(a), "--ref", str(b)]) == 2
        assert "GeometryMismatch" in capsys.readouterr().err

    def test_missing_file_is_exit_2(self, tmp_path, capsys):
        a = tmp_path / "a.nii.gz"
        niftio.save_mask(mask_from_flat_indices((4, 4, 4), [0]), a)
        assert main(["metrics", "--pred", str(a), "--ref", str(tmp_path / "nope.nii.gz")]) == 2


class TestMetricsCommand:
    def test_self_comparison_json(self, tmp_path, capsys):
        path = tmp_path / "m.nii.gz"
        niftio.save_mask(mask_from_flat_indices((5, 5, 5), range(9)), path)
        code = main(["metrics", "--pred", str(path), "--ref", str(path), "--json"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["dsc"] == 1.0
        assert out["hd95_mm"] == 0.0
        assert out["failure"] is False


class TestCohortCommands:
    def _fixture(self, tmp_path):
        ref1 = mask_from_flat_indices((4, 4, 4), [0, 1, 2, 3, 8])
        pred1 = mask_from_flat_indices((4, 4, 4), [0, 1, 2, 3, 9])
        ref2 = mask_from_flat_indices((4, 4, 4), [0, 1, 2, 16, 17])
        pred2 = mask_from_flat_indices((4, 4, 4), [0, 1, 2, 24, 25])
        lines = [json.dumps({"manifest_version": 1})]
        for cid, ref, pred in [("c1", ref1, pred1), ("c2", ref2, pred2)]:
            niftio.save_nifti(ref.grid, tmp_path / f"{cid}_img.nii.gz")
            niftio.save_mask(ref, tmp_path / f"{cid}_ref.nii.gz")
            niftio.save_mask(pred, tmp_path / f"{cid}_pred.nii.gz")
            lines.append(json.dumps({
                "case_id": cid, "group": "Normal", "sex": "F", "age_years": 10,
                "field_strength": 1.5, "fat_suppressed": False,
                "image_path": f"{cid}_img.nii.gz",
                "reference_path": f"{cid}_ref.nii.gz",
                "prediction_paths": {"toy": f"{cid}_pred.nii.gz",
                                     "toy2": f"{cid}_pred.nii.gz"},
            }))
        manifest = tmp_path / "manifest.jsonl"
        manifest.write_text("\n".join(lines) + "\n")
        return manifest

    def test_cohort_eval_writes_report(self, tmp_path, capsys):
        manifest = self._fixture(tmp_path)
        report_dir = tmp_path / "report"
        code = main(["cohort-eval", "--manifest", str(manifest),
                     "--model", "toy", "--report", str(report_dir)])
        assert code == 0
        summary = (report_dir / "summary.csv").read_text()
        assert "0.7000 (0.1414" in summary
        assert (report_dir / "cases.jsonl").exists()
        assert (report_dir / "scatter.csv").exists()

    def test_benchmark_stdout(self, tmp_path, capsys):
        manifest = self._fixture(tmp_path)
        code = main(["benchmark", "--manifest", str(manifest), "--models", "toy,toy2"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].startswith("Model,DSC (SD)")
        assert "toy" in out and "toy2" in out


class TestAgreementCommand:
    def test_study_json_output(self, tmp_path, capsys):
        mask = mask_from_flat_indices((5, 5, 5), range(7))
        niftio.save_mask(mask, tmp_path / "a.nii.gz")
        niftio.save_mask(mask, tmp_path / "b.nii.gz")
        study = tmp_path / "study.jsonl"
        study.write_text("\n".join([
            json.dumps({"mode": "inter", "reader_a": "R1", "reader_b": "R2"}),
            json.dumps({"case_id": "c1", "mask_a_path": "a.nii.gz",
                        "mask_b_path": "b.nii.gz"}),
        ]) + "\n")
        code = main(["agreement", "--study", str(study), "--json"])
        assert code == 0
        out = json.loads(capsys.readouterr().out)
        assert out["rows"]["ALL"]["dsc"][0] == 1.0
        assert out["rows"]["ALL"]["kappa"][0] == 1.0


class TestTrainSegmentRoundTrip:
    def test_train_then_segment(self, tmp_path, capsys):
        rng = np.random.default_rng(0)
        img_dir = tmp_path / "data" / "images"
        lab_dir = tmp_path / "data" / "labels"
        img_dir.mkdir(parents=True)
        lab_dir.mkdir(parents=True)
        vol = make_grid((8, 8, 8), data=rng.normal(0, 1, (8, 8, 8)))
        label = make_mask((rng.random((8, 8, 8)) > 0.7).astype(np.uint8))
        niftio.save_nifti(vol, img_dir / "s1.nii.gz")
        niftio.save_mask(label, lab_dir / "s1.nii.gz")
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(json.dumps({
            "patch_size": [8, 8, 8], "base_channels": 2, "depth": 1,
            "attention_heads": 2, "attention_dim": 4, "seed": 5,
            "learning_rate": 0.01, "batch_size": 2, "epochs": 600,
        }))
        weights_path = tmp_path / "toy.vsgw"
        curve_path = tmp_path / "loss.csv"
        code = main(["train", "--config", str(cfg_path), "--data", str(tmp_path / "data"),
                     "--out", str(weights_path), "--epochs", "2",
                     "--loss-curve", str(curve_path), "--modality", "T2"])
        assert code == 0
        assert weights_path.exists()
        assert curve_path.read_text().startswith("epoch,loss")

        out_mask = tmp_path / "pred.nii.gz"
        code = main(["segment", str(img_dir / "s1.nii.gz"), "--weights", str(weights_path),
                     "--modality", "T2", "--out", str(out_mask)])
        assert code == 0
        pred = niftio.read_mask(out_mask)
        assert pred.dims == (8, 8, 8)

    def test_segment_wrong_modality_tag_is_data_error(self, tmp_path, capsys):
        weights_path = tmp_path / "w.vsgw"
        save_weights(init_weights(CFG), CFG, weights_path, metadata={"modality": "T2"})
        vol_path = tmp_path / "v.nii.gz"
        niftio.save_nifti(make_grid((8, 8, 8)), vol_path)
        code = main(["segment", str(vol_path), "--weights", str(weights_path),
                     "--modality", "T1", "--out", str(tmp_path / "o.nii.gz")])
        assert code == 2
