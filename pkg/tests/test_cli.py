"""End-to-end tests of the command-line pipeline and its exit codes."""

import subprocess
import sys

import numpy as np
import pytest

from bathycorr import cli
from bathycorr.pairing import read_samples
from bathycorr.pointcloud import read_cloud
from bathycorr.svr import load_model


def _config(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _small_sim_config(tmp_path, seed=3, noise=True):
    noise_lines = "noise_sigma = 0.05\noutlier_rate = 0.05\n" if noise else ""
    return _config(tmp_path, f"""
[simulate]
preset = slope
count = 400
seed = {seed}
extent_x = 60
extent_y = 30
depth_from = 1.0
depth_to = 8.0
camera_spacing = 10
camera_height = 100
{noise_lines}
[pair]
image_cloud = {tmp_path}/out/apparent_cloud.xyz
reference_cloud = {tmp_path}/out/true_cloud.xyz
max_radius = 1.0

[train]
samples = {tmp_path}/out/samples.csv
fraction = 0.3
seed = 7

[predict]
model = {tmp_path}/out/model.txt
cloud = {tmp_path}/out/apparent_cloud.xyz

[evaluate]
reference_cloud = {tmp_path}/out/true_cloud.xyz
apparent_cloud = {tmp_path}/out/apparent_cloud.xyz
model = {tmp_path}/out/model.txt
train_label = scene_a
test_label = scene_a

[section]
clouds = {tmp_path}/out/true_cloud.xyz,{tmp_path}/out/corrected_cloud.xyz
polyline = 0,15;60,15
half_width = 5
station_step = 20
name = main
""")


class TestPipeline:
    def test_full_chain(self, tmp_path):
        cfg = _small_sim_config(tmp_path)
        out = str(tmp_path / "out")
        for command in ("simulate", "pair", "train", "predict",
                        "evaluate", "section", "report"):
            code = cli.run([command, "--config", cfg, "--out-dir", out])
            assert code == 0, command

        out_dir = tmp_path / "out"
        for name in (
            "true_cloud.xyz", "apparent_cloud.xyz", "simulate_meta.json",
            "samples.csv", "samples.provenance.json",
            "model.txt", "baseline_model.txt", "training_report.txt",
            "corrected_cloud.xyz",
            "m3c2_before.csv", "m3c2_after.csv",
            "stats_before.json", "stats_after.json",
            "histogram_before.csv", "histogram_after.csv",
            "section_main.csv", "report.csv", "report_matrix.csv",
        ):
            assert (out_dir / name).exists(), name

        report = (out_dir / "training_report.txt").read_text()
        assert "svr_w=" in report and "baseline_w=" in report
        model = load_model(out_dir / "model.txt")
        assert 1.2 < model.w < 1.5  # learned roughly the refraction steepening

        corrected = read_cloud(out_dir / "corrected_cloud.xyz")
        apparent = read_cloud(out_dir / "apparent_cloud.xyz")
        assert len(corrected) == len(apparent)

        matrix = (out_dir / "report_matrix.csv").read_text().splitlines()
        assert matrix[0] == "train\\test,scene_a"
        assert matrix[1].startswith("scene_a,mean=")

    def test_corrected_cloud_input_variant(self, tmp_path):
        cfg = _small_sim_config(tmp_path)
        out = str(tmp_path / "out")
        for command in ("simulate", "pair", "train", "predict"):
            assert cli.run([command, "--config", cfg, "--out-dir", out]) == 0
        cfg2 = _config(tmp_path, f"""
[evaluate]
reference_cloud = {tmp_path}/out/true_cloud.xyz
apparent_cloud = {tmp_path}/out/apparent_cloud.xyz
corrected_cloud = {tmp_path}/out/corrected_cloud.xyz
""", name="eval2.ini")
        assert cli.run(["evaluate", "--config", cfg2, "--out-dir", out]) == 0

    def test_rerun_is_bit_identical(self, tmp_path):
        cfg = _small_sim_config(tmp_path)
        # two separate output directories fed by configs that differ only in path
        outputs = []
        for sub in ("a", "b"):
            tmp = tmp_path / sub
            tmp.mkdir()
            cfg = _config(tmp_path, (tmp_path / "run.ini").read_text()
                          .replace(f"{tmp_path}/out", f"{tmp_path}/{sub}/out"),
                          name=f"run_{sub}.ini")
            out = str(tmp / "out")
            for command in ("simulate", "pair", "train", "predict"):
                assert cli.run([command, "--config", cfg, "--out-dir", out]) == 0
            outputs.append(tmp / "out")
        a, b = outputs
        for name in ("true_cloud.xyz", "apparent_cloud.xyz", "samples.csv",
                     "model.txt", "corrected_cloud.xyz", "training_report.txt"):
            assert (a / name).read_bytes() == (b / name).read_bytes(), name

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = _small_sim_config(tmp_path, noise=False)
        out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
        assert cli.run(["simulate", "--config", cfg, "--out-dir", out1]) == 0
        assert cli.run(["simulate", "--config", cfg, "--seed", "99",
                        "--out-dir", out2]) == 0
        c1 = (tmp_path / "o1" / "true_cloud.xyz").read_bytes()
        c2 = (tmp_path / "o2" / "true_cloud.xyz").read_bytes()
        assert c1 != c2

    def test_simulate_defaults_without_config(self, tmp_path):
        out = str(tmp_path / "out")
        code = cli.run(["simulate", "--seed", "1", "--out-dir", out])
        assert code == 0
        meta = (tmp_path / "out" / "simulate_meta.json").read_text()
        assert '"preset": "slope"' in meta
        cloud = read_cloud(tmp_path / "out" / "true_cloud.xyz")
        assert len(cloud) == 50000

    def test_console_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "bathycorr.cli"]
            if False else ["bathycorr", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "simulate" in proc.stdout


class TestExitCodes:
    def test_unknown_config_key(self, tmp_path):
        cfg = _config(tmp_path, "[simulate]\ncount = 10\nbogus_key = 1\n")
        assert cli.run(["simulate", "--config", cfg,
                        "--out-dir", str(tmp_path / "o")]) == 2

    def test_bad_value_type(self, tmp_path):
        cfg = _config(tmp_path, "[simulate]\ncount = many\n")
        assert cli.run(["simulate", "--config", cfg,
                        "--out-dir", str(tmp_path / "o")]) == 2

    def test_out_of_range_value(self, tmp_path):
        cfg = _config(tmp_path, "[train]\nsamples = s.csv\nfraction = 0\n")
        (tmp_path / "s.csv").write_text("x,y,z0,z\n")
        assert cli.run(["train", "--config", cfg,
                        "--out-dir", str(tmp_path / "o")]) == 2

    def test_missing_required_key(self, tmp_path):
        cfg = _config(tmp_path, "[pair]\nmax_radius = 1.0\n")
        assert cli.run(["pair", "--config", cfg,
                        "--out-dir", str(tmp_path / "o")]) == 2

    def test_missing_config_file(self, tmp_path):
        assert cli.run(["simulate", "--config", str(tmp_path / "absent.ini"),
                        "--out-dir", str(tmp_path / "o")]) == 2

    def test_missing_input_path(self, tmp_path):
        cfg = _config(tmp_path, f"""
[pair]
image_cloud = {tmp_path}/absent.xyz
reference_cloud = {tmp_path}/also_absent.xyz
""")
        assert cli.run(["pair", "--config", cfg,
                        "--out-dir", str(tmp_path / "o")]) == 2

    def test_malformed_cloud_content(self, tmp_path):
        img = tmp_path / "img.xyz"
        img.write_text("0,0,-3.0\n1,badvalue,-2.0\n")
        ref = tmp_path / "ref.xyz"
        ref.write_text("0,0,-4.0\n")
        cfg = _config(tmp_path, f"""
[pair]
image_cloud = {img}
reference_cloud = {ref}
""")
        assert cli.run(["pair", "--config", cfg,
                        "--out-dir", str(tmp_path / "o")]) == 3

    def test_report_without_stats(self, tmp_path):
        (tmp_path / "empty").mkdir()
        cfg = _config(tmp_path, f"[report]\ninputs = {tmp_path}/empty\n")
        assert cli.run(["report", "--config", cfg,
                        "--out-dir", str(tmp_path / "o")]) == 3

    def test_degenerate_training_data(self, tmp_path):
        s = tmp_path / "s.csv"
        rows = ["x,y,z0,z"] + [f"{i}.0,0.0,-3.0,{-4.0 - i}" for i in range(10)]
        s.write_text("\n".join(rows) + "\n")
        cfg = _config(tmp_path, f"[train]\nsamples = {s}\n")
        assert cli.run(["train", "--config", cfg,
                        "--out-dir", str(tmp_path / "o")]) == 4

    def test_bad_polyline(self, tmp_path):
        cloud = tmp_path / "c.xyz"
        cloud.write_text("0,0,-5.0\n")
        cfg = _config(tmp_path, f"""
[section]
clouds = {cloud}
polyline = 0,0;not-a-point
""")
        assert cli.run(["section", "--config", cfg,
                        "--out-dir", str(tmp_path / "o")]) == 2


class TestTrainWindowing:
    def test_depth_window_filters_samples(self, tmp_path, rng):
        n = 60
        z = rng.uniform(-10.0, -1.0, n)
        z0 = z / 1.34
        rows = ["x,y,z0,z"] + [
            f"{i}.0,0.0,{float(z0[i])!r},{float(z[i])!r}" for i in range(n)
        ]
        s = tmp_path / "s.csv"
        s.write_text("\n".join(rows) + "\n")
        cfg = _config(tmp_path, f"""
[train]
samples = {s}
fraction = 1.0
max_sample_depth = 5.57
""")
        out = tmp_path / "o"
        assert cli.run(["train", "--config", cfg, "--out-dir", str(out)]) == 0
        report = (out / "training_report.txt").read_text()
        n_kept = int((-z <= 5.57).sum())
        assert f"n_input={n_kept}" in report
        assert f"n_train={n_kept}" in report
