import os
import subprocess

import numpy as np
import pytest

from hrm.cli import main

CONFIG = """
[pls]
components = 4

[features]
patch_size = 6
neighbor_offsets = 6 0 -6 0 0 6 0 -6

[training]
n_pos = 150
n_neg = 150
seed = 0

[voting]
scales = 0.75 1.0
stride = 2
bin_size = 4
"""

SYNTH_SPEC = """
[synth]
scenes = 6
canvas_width = 96
canvas_height = 96
noise = 0.01
min_objects = 1
max_objects = 1
scales = 0.75 1.0
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth -> train -> detect -> eval, shared by the assertions below."""
    root = tmp_path_factory.mktemp("cli")
    (root / "cfg.ini").write_text(CONFIG)
    (root / "spec.ini").write_text(SYNTH_SPEC)

    assert main(["synth", "--spec", str(root / "spec.ini"), "--seed", "7",
                 "--out", str(root / "scenes")]) == 0
    assert main(["train", "--config", str(root / "cfg.ini"),
                 "--annotations", str(root / "scenes" / "annotations.txt"),
                 "--out", str(root / "model.hrmb")]) == 0
    assert main(["detect", "--config", str(root / "cfg.ini"),
                 "--model", str(root / "model.hrmb"),
                 "--images", str(root / "scenes"),
                 "--out", str(root / "det.tsv")]) == 0
    assert main(["eval", "--config", str(root / "cfg.ini"),
                 "--detections", str(root / "det.tsv"),
                 "--annotations", str(root / "scenes" / "annotations.txt"),
                 "--out", str(root / "pr.csv")]) == 0
    return root


class TestSynthCommand:
    def test_outputs_exist(self, workspace):
        scenes = workspace / "scenes"
        pgms = sorted(scenes.glob("scene_*.pgm"))
        assert len(pgms) == 6
        assert (scenes / "annotations.txt").exists()

    def test_annotations_parse(self, workspace):
        from hrm.dataset import load_dataset

        ds = load_dataset(workspace / "scenes" / "annotations.txt")
        assert len(ds.entries) == 6
        for _, boxes in ds.entries:
            assert len(boxes) == 1

    def test_deterministic(self, workspace, tmp_path):
        assert main(["synth", "--spec", str(workspace / "spec.ini"),
                     "--seed", "7", "--out", str(tmp_path / "again")]) == 0
        for name in ["annotations.txt"] + [f"scene_{i:04d}.pgm" for i in range(6)]:
            a = (workspace / "scenes" / name).read_bytes()
            b = (tmp_path / "again" / name).read_bytes()
            assert a == b

    def test_missing_spec_is_input_error(self, tmp_path):
        assert main(["synth", "--spec", str(tmp_path / "nope.ini"),
                     "--out", str(tmp_path / "o")]) == 2


class TestTrainCommand:
    def test_model_file_magic(self, workspace):
        assert (workspace / "model.hrmb").read_bytes()[:4] == b"HRMB"

    def test_model_loads(self, workspace):
        from hrm.model_io import load_model

        bank = load_model(workspace / "model.hrmb")
        assert bank.geometry.patch_size == 6
        assert bank.num_context == 5
        assert bank.reference_box[0] > 0

    def test_missing_annotations_is_input_error(self, workspace, tmp_path):
        assert main(["train", "--config", str(workspace / "cfg.ini"),
                     "--annotations", str(tmp_path / "nope.txt"),
                     "--out", str(tmp_path / "m.hrmb")]) == 2


class TestDetectCommand:
    def test_output_format(self, workspace):
        lines = (workspace / "det.tsv").read_text().splitlines()
        for line in lines:
            parts = line.split("\t")
            assert len(parts) == 5
            assert parts[0].startswith("scene_")
            for field in parts[1:]:
                float(field)
                assert len(field.split(".")[-1]) == 6  # 6-decimal fixed point

    def test_rerun_byte_identical(self, workspace, tmp_path):
        assert main(["detect", "--config", str(workspace / "cfg.ini"),
                     "--model", str(workspace / "model.hrmb"),
                     "--images", str(workspace / "scenes"),
                     "--out", str(tmp_path / "det2.tsv")]) == 0
        assert (workspace / "det.tsv").read_bytes() == (tmp_path / "det2.tsv").read_bytes()

    def test_thread_cap_env(self, workspace, tmp_path, monkeypatch):
        monkeypatch.setenv("HRM_THREADS", "1")
        assert main(["detect", "--config", str(workspace / "cfg.ini"),
                     "--model", str(workspace / "model.hrmb"),
                     "--images", str(workspace / "scenes"),
                     "--out", str(tmp_path / "det1.tsv")]) == 0
        assert (workspace / "det.tsv").read_bytes() == (tmp_path / "det1.tsv").read_bytes()

    def test_corrupt_model_is_model_error(self, workspace, tmp_path):
        bad = tmp_path / "bad.hrmb"
        bad.write_bytes((workspace / "model.hrmb").read_bytes()[:40])
        assert main(["detect", "--model", str(bad),
                     "--images", str(workspace / "scenes"),
                     "--out", str(tmp_path / "d.tsv")]) == 3

    def test_missing_images_is_input_error(self, workspace, tmp_path):
        assert main(["detect", "--model", str(workspace / "model.hrmb"),
                     "--images", str(tmp_path / "nothing"),
                     "--out", str(tmp_path / "d.tsv")]) == 2


class TestEvalCommand:
    def test_csv_format(self, workspace):
        lines = (workspace / "pr.csv").read_text().splitlines()
        assert lines[0] == "threshold,precision,recall"
        for line in lines[1:]:
            t, p, r = (float(v) for v in line.split(","))
            assert 0.0 <= p <= 1.0 and 0.0 <= r <= 1.0

    def test_ref_size_flag(self, workspace, tmp_path):
        assert main(["eval", "--detections", str(workspace / "det.tsv"),
                     "--annotations", str(workspace / "scenes" / "annotations.txt"),
                     "--ref-size", "40x40",
                     "--out", str(tmp_path / "pr.csv")]) == 0

    def test_malformed_detections_is_input_error(self, workspace, tmp_path):
        bad = tmp_path / "det.tsv"
        bad.write_text("scene_0000.pgm\t1.0\t2.0\n")
        assert main(["eval", "--detections", str(bad),
                     "--annotations", str(workspace / "scenes" / "annotations.txt"),
                     "--out", str(tmp_path / "pr.csv")]) == 2


class TestConsoleEntryPoint:
    def test_installed_script(self):
        out = subprocess.run(["hrm", "--help"], capture_output=True, text=True)
        assert out.returncode == 0
        for cmd in ("train", "detect", "eval", "synth"):
            assert cmd in out.stdout
