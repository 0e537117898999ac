"""CLI surface: exit codes and the extract-convert-evaluate round trip."""

import json
import subprocess

import pytest

from vitfeat.cli import main

from test_convert import write_voc


class TestExtractCommand:
    def test_success(self, tiny_checkpoint, image_dir, tmp_path):
        images = sorted(str(p) for p in image_dir.glob("*.png"))
        status = main(["extract", "--checkpoint", str(tiny_checkpoint),
                       "--layers", "3", "--images", *images,
                       "--out", str(tmp_path)])
        assert status == 0
        assert sorted(p.name for p in tmp_path.glob("*.json")) == [
            "a32x48.json", "b100x100.json", "c40x24.json"]

    def test_partial_failure_exits_one(self, tiny_checkpoint, image_dir,
                                       tmp_path, caplog):
        status = main(["extract", "--checkpoint", str(tiny_checkpoint),
                       "--layers", "1",
                       "--images", str(image_dir / "a32x48.png"),
                       str(image_dir / "gone.png"), "--out", str(tmp_path)])
        assert status == 1
        assert "gone.png" in caplog.text
        assert (tmp_path / "a32x48.npy").exists()

    def test_missing_checkpoint_exits_one(self, image_dir, tmp_path):
        status = main(["extract", "--checkpoint", str(tmp_path / "no.pth"),
                       "--images", str(image_dir / "a32x48.png"),
                       "--out", str(tmp_path)])
        assert status == 1

    def test_layers_beyond_depth_exits_one(self, tiny_checkpoint, image_dir,
                                           tmp_path):
        status = main(["extract", "--checkpoint", str(tiny_checkpoint),
                       "--layers", "8",
                       "--images", str(image_dir / "a32x48.png"),
                       "--out", str(tmp_path)])
        assert status == 1

    def test_no_crop_fails_non_multiples(self, tiny_checkpoint, image_dir,
                                         tmp_path):
        status = main(["extract", "--checkpoint", str(tiny_checkpoint),
                       "--layers", "1", "--no-crop",
                       "--images", str(image_dir / "b100x100.png"),
                       "--out", str(tmp_path)])
        assert status == 1

    def test_usage_errors_exit_two(self, tiny_checkpoint, image_dir, tmp_path):
        cases = [
            ["extract", "--images", str(image_dir / "a32x48.png"),
             "--out", str(tmp_path)],
            ["extract", "--checkpoint", str(tiny_checkpoint),
             "--layers", "0", "--images", str(image_dir / "a32x48.png"),
             "--out", str(tmp_path)],
            ["convert", "--format", "yolo-txt", "--in", str(tmp_path),
             "--out", str(tmp_path / "gt.jsonl")],
            ["nosuchcommand"],
        ]
        for argv in cases:
            with pytest.raises(SystemExit) as err:
                main(argv)
            assert err.value.code == 2


class TestConvertCommand:
    def test_success(self, tmp_path):
        write_voc(tmp_path / "im.xml", "im")
        out = tmp_path / "gt.jsonl"
        assert main(["convert", "--format", "voc-xml",
                     "--in", str(tmp_path), "--out", str(out)]) == 0
        assert json.loads(out.read_text())["image_id"] == "im"

    def test_parse_failure_exits_one(self, tmp_path):
        (tmp_path / "bad.xml").write_text("<annotation>")
        assert main(["convert", "--format", "voc-xml",
                     "--in", str(tmp_path),
                     "--out", str(tmp_path / "gt.jsonl")]) == 1


class TestRoundTrip:
    def test_extract_convert_then_evaluate(self, tiny_checkpoint, image_dir,
                                           tmp_path):
        """Full loop against the downstream CLI: features and ground truth
        produced here must carry an evaluation run end to end."""
        images = sorted(str(p) for p in image_dir.glob("*.png"))
        feats = tmp_path / "feats"
        assert main(["extract", "--checkpoint", str(tiny_checkpoint),
                     "--layers", "3", "--images", *images,
                     "--out", str(feats)]) == 0

        ann_dir = tmp_path / "ann"
        ann_dir.mkdir()
        for name, (width, height) in (("a32x48", (32, 48)),
                                      ("b100x100", (100, 100)),
                                      ("c40x24", (40, 24))):
            write_voc(ann_dir / f"{name}.xml", name, width=width,
                      height=height,
                      boxes=((1, 1, width // 2, height // 2),))
        gt = tmp_path / "gt.jsonl"
        assert main(["convert", "--format", "voc-xml", "--in", str(ann_dir),
                     "--out", str(gt)]) == 0

        detections = tmp_path / "detections.jsonl"
        detect = subprocess.run(
            ["formula", "detect", *sorted(str(p) for p in feats.glob("*.json")),
             "--out", str(detections)],
            capture_output=True, text=True)
        assert detect.returncode == 0, detect.stderr
        evaluate = subprocess.run(
            ["formula", "eval", str(detections), str(gt)],
            capture_output=True, text=True)
        assert evaluate.returncode == 0, evaluate.stderr
        assert "CorLoc:" in evaluate.stdout
