"""Command line interface."""

import json

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from visionsim.cli import main
from visionsim.depth import DepthMap, read_depth_pfm, write_depth_pfm, write_depth_png16
from visionsim.task import read_trials_csv


@pytest.fixture
def runner():
    return CliRunner()


class TestRun:
    def test_headless_run_writes_session(self, runner, tmp_path):
        result = runner.invoke(main, ["run", "--data-root", str(tmp_path),
                                      "--trials", "2", "--subject", "S01"])
        assert result.exit_code == 0, result.output
        root = tmp_path / "sessions" / "S01"
        assert (root / "session.json").is_file()
        for scene in ("main_menu", "baseline", "matching_task", "questionnaire"):
            assert (root / scene).is_dir()
        assert str(root) in result.output

    def test_rerun_same_subject_suffixes_and_reproduces(self, runner, tmp_path):
        args = ["run", "--data-root", str(tmp_path), "--trials", "2",
                "--subject", "S01", "--seed", "9"]
        assert runner.invoke(main, args).exit_code == 0
        assert runner.invoke(main, args).exit_code == 0
        first = (tmp_path / "sessions" / "S01" / "matching_task" / "trials.csv")
        second = (tmp_path / "sessions" / "S01_1" / "matching_task" / "trials.csv")
        assert first.read_bytes() == second.read_bytes()

    def test_fixed_focus_mode(self, runner, tmp_path):
        result = runner.invoke(main, ["run", "--data-root", str(tmp_path),
                                      "--trials", "2", "--fixed-focus", "1.0"])
        assert result.exit_code == 0, result.output

    def test_algorithm_choice_is_validated(self, runner, tmp_path):
        result = runner.invoke(main, ["run", "--data-root", str(tmp_path),
                                      "--algorithm", "psychic"])
        assert result.exit_code == 2
        assert "psychic" in result.output

    def test_missing_protocol_fails_cleanly(self, runner, tmp_path):
        result = runner.invoke(main, ["run", "--data-root", str(tmp_path),
                                      "--protocol", str(tmp_path / "none.json")])
        assert result.exit_code == 2
        assert "error:" in result.output

    def test_json_errors_flag(self, runner, tmp_path):
        result = runner.invoke(main, ["run", "--data-root", str(tmp_path),
                                      "--protocol", str(tmp_path / "none.json"),
                                      "--json-errors"])
        assert result.exit_code == 2
        payload = json.loads(result.output.strip().splitlines()[-1])
        assert "error" in payload

    def test_custom_protocol_and_seed_determinism(self, runner, tmp_path):
        protocol = tmp_path / "p.json"
        protocol.write_text(json.dumps({
            "name": "mini", "scenes": [{"scene": "matching_task",
                                        "parameter": "3"}]}))
        for sub in ("a", "b"):
            result = runner.invoke(main, [
                "run", "--data-root", str(tmp_path / sub),
                "--protocol", str(protocol), "--seed", "4"])
            assert result.exit_code == 0, result.output
        rows_a = read_trials_csv(tmp_path / "a" / "sessions" / "headless"
                                 / "matching_task" / "trials.csv")
        rows_b = read_trials_csv(tmp_path / "b" / "sessions" / "headless"
                                 / "matching_task" / "trials.csv")
        assert rows_a == rows_b
        assert len(rows_a) == 3


class TestValidate:
    def test_bundled_demo_validates(self, runner, tmp_path):
        result = runner.invoke(main, ["validate", "--data-root", str(tmp_path)])
        assert result.exit_code == 0
        assert "setup valid" in result.output

    def test_bad_protocol_exits_2_listing_problems(self, runner, tmp_path):
        protocol = tmp_path / "p.json"
        protocol.write_text(json.dumps({
            "name": "broken", "scenes": [{"scene": "holodeck"}]}))
        result = runner.invoke(main, ["validate", "--protocol", str(protocol),
                                      "--data-root", str(tmp_path)])
        assert result.exit_code == 2
        assert "holodeck" in result.output

    def test_json_output(self, runner, tmp_path):
        protocol = tmp_path / "p.json"
        protocol.write_text(json.dumps({
            "name": "broken", "scenes": [{"scene": "holodeck"}]}))
        result = runner.invoke(main, ["validate", "--protocol", str(protocol),
                                      "--data-root", str(tmp_path), "--json"])
        assert result.exit_code == 2
        payload = json.loads(result.output)
        assert payload["valid"] is False
        assert any("holodeck" in p for p in payload["problems"])

    def test_json_output_valid_setup(self, runner, tmp_path):
        result = runner.invoke(main, ["validate", "--data-root", str(tmp_path),
                                      "--json"])
        assert result.exit_code == 0
        assert json.loads(result.output) == {"valid": True, "problems": []}


class TestPreview:
    def test_synthetic_scene_renders(self, runner, tmp_path):
        out = tmp_path / "preview.png"
        field_out = tmp_path / "field.png"
        depth_out = tmp_path / "depth.pfm"
        result = runner.invoke(main, [
            "preview", "--focus-distance", "0.3", "--width", "240",
            "--height", "150", "--out", str(out),
            "--field-out", str(field_out), "--depth-out", str(depth_out)])
        assert result.exit_code == 0, result.output
        img = np.asarray(Image.open(out))
        assert img.shape == (150, 240, 3)
        field = np.asarray(Image.open(field_out))
        assert field.shape == (150, 240)
        assert field.max() == 255  # normalized to the blur peak
        depth = read_depth_pfm(depth_out)
        assert np.allclose(np.unique(depth.depths), [0.3, 1.0, 6.0, 10.0],
                           atol=1e-6)

    def test_supplied_image_in_focus_is_untouched(self, runner, tmp_path, rng):
        img_path = tmp_path / "in.png"
        depth_path = tmp_path / "d.pfm"
        out = tmp_path / "out.png"
        pixels = rng.integers(0, 256, size=(40, 60, 3), dtype=np.uint8)
        Image.fromarray(pixels).save(img_path)
        write_depth_pfm(depth_path, DepthMap.uniform(2.0, width=60, height=40))
        result = runner.invoke(main, [
            "preview", "--image", str(img_path), "--depth", str(depth_path),
            "--focus-distance", "2.0", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert np.array_equal(np.asarray(Image.open(out)), pixels)

    def test_png_depth_is_accepted(self, runner, tmp_path, rng):
        img_path = tmp_path / "in.png"
        depth_path = tmp_path / "d.png"
        out = tmp_path / "out.png"
        pixels = rng.integers(0, 256, size=(30, 30, 3), dtype=np.uint8)
        Image.fromarray(pixels).save(img_path)
        write_depth_png16(depth_path, DepthMap.uniform(0.25, width=30, height=30))
        # narrow fov so 4 D of defocus spans multiple pixels on a 30 px frame
        result = runner.invoke(main, [
            "preview", "--image", str(img_path), "--depth", str(depth_path),
            "--lens", "0.0", "--fov", "10", "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert not np.array_equal(np.asarray(Image.open(out)), pixels)

    def test_image_without_depth_is_rejected(self, runner, tmp_path):
        img_path = tmp_path / "in.png"
        Image.fromarray(np.zeros((8, 8, 3), dtype=np.uint8)).save(img_path)
        result = runner.invoke(main, ["preview", "--image", str(img_path),
                                      "--out", str(tmp_path / "o.png")])
        assert result.exit_code == 2
        assert "together" in result.output

    def test_dimension_mismatch_is_rejected(self, runner, tmp_path):
        img_path = tmp_path / "in.png"
        depth_path = tmp_path / "d.pfm"
        Image.fromarray(np.zeros((8, 8, 3), dtype=np.uint8)).save(img_path)
        write_depth_pfm(depth_path, DepthMap.uniform(1.0, width=4, height=4))
        result = runner.invoke(main, [
            "preview", "--image", str(img_path), "--depth", str(depth_path),
            "--out", str(tmp_path / "o.png")])
        assert result.exit_code == 2
        assert "dimensions differ" in result.output

    def test_out_of_range_pupil_is_rejected(self, runner, tmp_path):
        result = runner.invoke(main, [
            "preview", "--pupil", "0.1", "--width", "32", "--height", "32",
            "--out", str(tmp_path / "o.png")])
        assert result.exit_code == 2
        assert "pupil" in result.output

    def test_invalid_focus_distance(self, runner, tmp_path):
        result = runner.invoke(main, [
            "preview", "--focus-distance", "0", "--out", str(tmp_path / "o.png")])
        assert result.exit_code == 2


class TestVersion:
    def test_version_flag(self, runner):
        result = runner.invoke(main, ["--version"])
        assert result.exit_code == 0
        assert "visionsim" in result.output
