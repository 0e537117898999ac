"""Manifest/NPY/JSONL round trips and every structural rejection path."""

from __future__ import annotations

import json
import struct

import numpy as np
import pytest

from formula.errors import (
    DuplicateImageId,
    InvalidBox,
    IoFailure,
    MalformedFeatureFile,
    MalformedManifest,
    MalformedRecord,
    NonFiniteFeature,
    ShapeMismatch,
    UnsupportedDtype,
)
from formula.feature_io import (
    DetectionRecord,
    GroundTruth,
    Manifest,
    read_detections,
    read_feature_array,
    read_features,
    read_ground_truth,
    read_manifest,
    write_detections,
    write_feature_array,
    write_ground_truth,
    write_manifest,
)


def make_manifest(**overrides) -> Manifest:
    fields = dict(image_id="img", image_width=64, image_height=48,
                  patch_size=16, grid_h=3, grid_w=4, num_layers=2,
                  feature_dim=5, feature_file="img.npy")
    fields.update(overrides)
    return Manifest(**fields)


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = make_manifest()
        path = tmp_path / "m.json"
        write_manifest(manifest, path)
        assert read_manifest(path) == manifest

    def test_grid_must_match_floor_division(self):
        with pytest.raises(MalformedManifest):
            make_manifest(grid_h=4)
        # non-multiple image dims floor down
        ok = make_manifest(image_width=70, image_height=50)
        assert (ok.grid_h, ok.grid_w) == (3, 4)

    def test_rejects_nonpositive_and_nonint(self):
        with pytest.raises(MalformedManifest):
            make_manifest(patch_size=0)
        with pytest.raises(MalformedManifest):
            make_manifest(feature_dim=-3)
        with pytest.raises(MalformedManifest):
            make_manifest(num_layers=True)
        with pytest.raises(MalformedManifest):
            make_manifest(image_width="64")
        with pytest.raises(MalformedManifest):
            make_manifest(image_id="")

    def test_rejects_missing_and_extra_keys(self, tmp_path):
        path = tmp_path / "m.json"
        good = dict(image_id="img", image_width=64, image_height=48,
                    patch_size=16, grid_h=3, grid_w=4, num_layers=2,
                    feature_dim=5, feature_file="img.npy")
        bad = dict(good)
        del bad["grid_w"]
        bad["gridW"] = 4
        path.write_text(json.dumps(bad))
        with pytest.raises(MalformedManifest, match="gridW"):
            read_manifest(path)

    def test_rejects_non_json(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text("{not json")
        with pytest.raises(MalformedManifest):
            read_manifest(path)
        path.write_text("[1, 2]")
        with pytest.raises(MalformedManifest):
            read_manifest(path)

    def test_num_patches(self):
        assert make_manifest().num_patches == 12


class TestFeatureArray:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.standard_normal((2, 12, 5)).astype(np.float32)
        path = tmp_path / "a.npy"
        write_feature_array(arr, path)
        back = read_feature_array(path)
        assert back.dtype == np.dtype("<f4")
        assert np.array_equal(back, arr)

    def test_numpy_itself_can_read_our_files(self, tmp_path):
        arr = np.arange(24, dtype=np.float32).reshape(2, 4, 3)
        path = tmp_path / "a.npy"
        write_feature_array(arr, path)
        assert np.array_equal(np.load(path), arr)

    def test_reads_numpy_written_files(self, tmp_path):
        arr = np.arange(24, dtype="<f4").reshape(2, 4, 3)
        path = tmp_path / "a.npy"
        np.save(path, arr)
        assert np.array_equal(read_feature_array(path), arr)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "a.npy"
        path.write_bytes(b"NOTNPY" + b"\x00" * 32)
        with pytest.raises(MalformedFeatureFile, match="magic"):
            read_feature_array(path)

    def test_bad_version(self, tmp_path):
        arr = np.zeros((1, 2, 3), dtype=np.float32)
        path = tmp_path / "a.npy"
        write_feature_array(arr, path)
        data = bytearray(path.read_bytes())
        data[6:8] = b"\x02\x00"
        path.write_bytes(bytes(data))
        with pytest.raises(MalformedFeatureFile, match="version"):
            read_feature_array(path)

    def test_wrong_dtype(self, tmp_path):
        path = tmp_path / "a.npy"
        np.save(path, np.zeros((1, 2, 3), dtype=np.float64))
        with pytest.raises(UnsupportedDtype):
            read_feature_array(path)

    def test_fortran_order_rejected(self, tmp_path):
        path = tmp_path / "a.npy"
        np.save(path, np.asfortranarray(np.zeros((1, 2, 3), dtype=np.float32)))
        with pytest.raises(MalformedFeatureFile, match="fortran"):
            read_feature_array(path)

    def test_payload_size_must_match_header(self, tmp_path):
        arr = np.zeros((1, 2, 3), dtype=np.float32)
        path = tmp_path / "a.npy"
        write_feature_array(arr, path)
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(MalformedFeatureFile, match="payload"):
            read_feature_array(path)
        path.write_bytes(data + b"\x00\x00\x00\x00")
        with pytest.raises(MalformedFeatureFile, match="payload"):
            read_feature_array(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "a.npy"
        path.write_bytes(b"\x93NUMPY\x01\x00" + struct.pack("<H", 500) + b"{")
        with pytest.raises(MalformedFeatureFile, match="truncated"):
            read_feature_array(path)

    def test_garbage_header(self, tmp_path):
        path = tmp_path / "a.npy"
        header = b"not a dict literal!!"
        path.write_bytes(b"\x93NUMPY\x01\x00"
                         + struct.pack("<H", len(header)) + header)
        with pytest.raises(MalformedFeatureFile):
            read_feature_array(path)


class TestReadFeatures:
    def write_pair(self, tmp_path, manifest: Manifest, arr: np.ndarray):
        write_manifest(manifest, tmp_path / "m.json")
        write_feature_array(arr, tmp_path / manifest.feature_file)
        return tmp_path / "m.json"

    def test_happy_path(self, tmp_path):
        manifest = make_manifest()
        arr = np.ones((2, 12, 5), dtype=np.float32)
        path = self.write_pair(tmp_path, manifest, arr)
        got_manifest, got = read_features(path)
        assert got_manifest == manifest
        assert got.shape == (2, 12, 5)

    def test_shape_mismatch(self, tmp_path):
        manifest = make_manifest()
        arr = np.ones((2, 11, 5), dtype=np.float32)
        path = self.write_pair(tmp_path, manifest, arr)
        with pytest.raises(ShapeMismatch, match="img"):
            read_features(path)

    def test_non_finite_rejected(self, tmp_path):
        manifest = make_manifest()
        arr = np.ones((2, 12, 5), dtype=np.float32)
        arr[1, 3, 2] = np.nan
        path = self.write_pair(tmp_path, manifest, arr)
        with pytest.raises(NonFiniteFeature, match="img"):
            read_features(path)

    def test_missing_feature_file_names_image(self, tmp_path):
        write_manifest(make_manifest(), tmp_path / "m.json")
        with pytest.raises(IoFailure, match="img"):
            read_features(tmp_path / "m.json")


class TestGroundTruth:
    def test_round_trip(self, tmp_path):
        records = [
            GroundTruth("a", 100.0, 80.0, ((0.0, 0.0, 10.0, 10.0),)),
            GroundTruth("b", 64.0, 64.0,
                        ((1.0, 2.0, 3.0, 4.0), (0.0, 0.0, 64.0, 64.0))),
        ]
        path = tmp_path / "gt.jsonl"
        write_ground_truth(records, path)
        back = read_ground_truth(path)
        assert set(back) == {"a", "b"}
        assert back["b"].boxes == records[1].boxes

    def test_duplicate_image_id(self, tmp_path):
        path = tmp_path / "gt.jsonl"
        line = json.dumps({"image_id": "a", "width": 10, "height": 10,
                           "boxes": [[0, 0, 5, 5]]})
        path.write_text(line + "\n" + line + "\n")
        with pytest.raises(DuplicateImageId):
            read_ground_truth(path)

    def test_degenerate_box(self, tmp_path):
        path = tmp_path / "gt.jsonl"
        path.write_text(json.dumps({"image_id": "a", "width": 10, "height": 10,
                                    "boxes": [[5, 5, 5, 9]]}) + "\n")
        with pytest.raises(InvalidBox):
            read_ground_truth(path)

    def test_box_outside_image(self, tmp_path):
        path = tmp_path / "gt.jsonl"
        path.write_text(json.dumps({"image_id": "a", "width": 10, "height": 10,
                                    "boxes": [[0, 0, 11, 5]]}) + "\n")
        with pytest.raises(InvalidBox):
            read_ground_truth(path)

    def test_missing_field_and_bad_json(self, tmp_path):
        path = tmp_path / "gt.jsonl"
        path.write_text(json.dumps({"image_id": "a", "width": 10,
                                    "boxes": [[0, 0, 5, 5]]}) + "\n")
        with pytest.raises(MalformedRecord):
            read_ground_truth(path)
        path.write_text("{oops\n")
        with pytest.raises(MalformedRecord, match="gt.jsonl:1"):
            read_ground_truth(path)

    def test_empty_boxes_rejected(self, tmp_path):
        path = tmp_path / "gt.jsonl"
        path.write_text(json.dumps({"image_id": "a", "width": 10, "height": 10,
                                    "boxes": []}) + "\n")
        with pytest.raises(MalformedRecord):
            read_ground_truth(path)


class TestDetections:
    def test_round_trip(self, tmp_path):
        records = [
            DetectionRecord("a", (0.0, 0.0, 16.0, 16.0), 0, False, ((1.0, 2.0),)),
            DetectionRecord("b", (8.0, 8.0, 40.0, 24.0), 2, True,
                            ((1.0, 2.0), (1.5, 2.0), (1.5, 2.1))),
        ]
        path = tmp_path / "det.jsonl"
        write_detections(records, path)
        assert read_detections(path) == records

    def test_trace_length_invariant(self):
        with pytest.raises(MalformedRecord, match="trace"):
            DetectionRecord("a", (0.0, 0.0, 1.0, 1.0), 2, True, ((0.0, 0.0),))

    def test_degenerate_box_rejected(self):
        with pytest.raises(MalformedRecord):
            DetectionRecord("a", (5.0, 0.0, 5.0, 1.0), 0, False, ((0.0, 0.0),))

    def test_bad_line_reports_location(self, tmp_path):
        path = tmp_path / "det.jsonl"
        path.write_text('{"image_id": "a"}\n')
        with pytest.raises(MalformedRecord, match="det.jsonl:1"):
            read_detections(path)
