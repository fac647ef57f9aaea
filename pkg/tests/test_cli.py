import json
import sys

import numpy as np
import pytest

from radarpc import io, metrics
from radarpc.cli import main

SMOKE = ["--set", "synth.duration=0.2", "--set", "window.seconds=0.1",
         "--set", "synth.objects=3"]


def run(args):
    return main([str(a) for a in args])


def test_pipeline_smoke_produces_hyper_cloud_per_frame(tmp_path):
    out = tmp_path / "run"
    assert run(["--out", out, "--seed", 5, *SMOKE, "pipeline"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    hyper = [k for k in manifest if k.startswith("hyper/") and k.endswith(".csv")]
    assert len(hyper) == 5  # 0.2 s at 20 Hz -> 5 frames, one hyper CSV each
    for k in hyper:
        cloud, conf, src = io.read_hyper_csv(out / k)
        assert len(cloud) == len(conf) == len(src)


def test_rerun_with_same_seed_is_hash_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run(["--out", out, "--seed", 9, *SMOKE, "pipeline"]) == 0
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()


def test_unknown_config_key_exits_2(tmp_path):
    assert run(["--out", tmp_path, "--set", "bogus.key=1", "synth"]) == 2


def test_bad_config_value_exits_2(tmp_path):
    assert run(["--out", tmp_path, "--set", "validation.tau_d=banana",
                "synth", "--objects", 0]) == 0  # synth does not touch tau_d
    assert run(["--out", tmp_path, "--set", "validation.tau_d=banana",
                "validate"]) == 2


def test_missing_artifact_exits_3(tmp_path):
    assert run(["--out", tmp_path / "empty", "fuse"]) == 3


def test_external_enhancer_failure_exits_4(tmp_path):
    out = tmp_path / "run"
    assert run(["--out", out, "--seed", 1, *SMOKE, "synth"]) == 0
    assert run(["--out", out, *SMOKE, "fuse"]) == 0
    assert run(["--out", out, *SMOKE, "validate"]) == 0
    assert run(["--out", out, *SMOKE, "rasterize"]) == 0
    code = run(["--out", out, *SMOKE, "enhance", "--enhancer", "external",
                "--enhancer-cmd", f"{sys.executable} -c 'import sys; sys.exit(1)'"])
    assert code == 4


def test_eval_det_gt_as_predictions_prints_perfect_map(tmp_path, capsys):
    gt = [metrics.Detection(f"f{i}", "car", (10.0 * i, 0.0, 0.5),
                            (4.0, 2.0, 1.5), 0.0, 1.0) for i in range(4)]
    gt_path = tmp_path / "gt.jsonl"
    metrics.write_detections_jsonl(gt, gt_path)
    assert run(["--out", tmp_path, "eval-det", "--pred", gt_path,
                "--gt", gt_path]) == 0
    assert "mAP 1.0000" in capsys.readouterr().out


def test_deraster_stage(tmp_path):
    out = tmp_path / "run"
    assert run(["--out", out, "--seed", 2, *SMOKE, "synth"]) == 0
    assert run(["--out", out, *SMOKE, "fuse"]) == 0
    assert run(["--out", out, *SMOKE, "validate"]) == 0
    assert run(["--out", out, *SMOKE, "rasterize"]) == 0
    csv_out = tmp_path / "pts.csv"
    assert run(["--out", out, "deraster", "--in", out / "bev" / "f0000.pgm",
                "--csv-out", csv_out]) == 0
    lines = csv_out.read_text().splitlines()
    assert lines[0] == "x,y,confidence"
    assert len(lines) > 1


def test_oracle_pipeline_with_reports(tmp_path, capsys):
    out = tmp_path / "run"
    assert run(["--out", out, "--seed", 11, *SMOKE, "pipeline",
                "--enhancer", "oracle"]) == 0
    assert run(["--out", out, *SMOKE, "eval-geom"]) == 0
    assert run(["--out", out, *SMOKE, "report-fg"]) == 0
    txt = capsys.readouterr().out
    assert "mean F-score 1.0000" in txt
    assert (out / "reports" / "fg_boost.csv").exists()


def test_ablation_no_validation_keeps_more_ghosts(tmp_path):
    out = tmp_path / "abl"
    args = ["--out", out, "--seed", 3,
            "--set", "synth.duration=0.1", "--set", "window.seconds=0.1",
            "--set", "synth.objects=2", "--set", "synth.area=25",
            "--set", "synth.ghosts=2", "--set", "synth.clutter=3",
            "--set", "validation.tau_d=5.0",
            "ablate", "--axes", "no-validation,threshold=60:200"]
    assert run(args) == 0
    rows = {}
    lines = (out / "reports" / "ablation.csv").read_text().splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        vals = line.split(",")
        rows[vals[0]] = dict(zip(header, vals))
    assert set(rows) == {"baseline", "no-validation", "threshold=60",
                         "threshold=200"}
    base_kept = int(rows["baseline"]["ghosts_kept"])
    noval_kept = int(rows["no-validation"]["ghosts_kept"])
    assert int(rows["no-validation"]["ghosts_in"]) > 0
    assert base_kept < noval_kept  # validation removes ghost-labeled points
    for label in ("threshold=60", "threshold=200"):
        assert int(rows[label]["hyper_points"]) >= 0  # cells ran to completion


def test_parallel_jobs_reproduce_sequential_manifest(tmp_path):
    seq, par = tmp_path / "seq", tmp_path / "par"
    assert run(["--out", seq, "--seed", 21, "--jobs", 1, *SMOKE, "pipeline"]) == 0
    assert run(["--out", par, "--seed", 21, "--jobs", 2, *SMOKE, "pipeline"]) == 0
    assert (seq / "manifest.json").read_bytes() == (par / "manifest.json").read_bytes()


def test_ablation_empty_axes_single_row(tmp_path):
    out = tmp_path / "abl"
    assert run(["--out", out, "--seed", 1, *SMOKE, "ablate", "--axes", ""]) == 0
    lines = (out / "reports" / "ablation.csv").read_text().splitlines()
    assert len(lines) == 2 and lines[1].startswith("baseline,")


def test_shipped_defaults_match_production_constants():
    from radarpc.config import load_defaults
    d = load_defaults()
    assert float(d["window.seconds"]) == 0.5
    assert float(d["validation.tau_d"]) == 10.0
    assert float(d["validation.r"]) == 1.0
    assert int(d["validation.k_min"]) == 3
    assert (float(d["grid.x_min"]), float(d["grid.x_max"])) == (-50.0, 50.0)
    assert (float(d["grid.y_min"]), float(d["grid.y_max"])) == (-50.0, 50.0)
    assert int(d["grid.width"]) == int(d["grid.height"]) == 512
    assert int(d["threshold.intensity"]) == 60
    assert float(d["fov.rear_effective_deg"]) == 100.0
    assert [float(v) for v in d["eval.dist_thresholds"].split(",")] == \
        [0.5, 1.0, 2.0, 4.0]
    assert float(d["eval.max_range"]) == 50.0


def test_config_file_and_cli_precedence(tmp_path):
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("validation.tau_d=7.5\nseed=4\n")
    from radarpc.config import PipelineConfig
    cfg = PipelineConfig.build(cfg_file, {"validation.tau_d": "3.25"}, tmp_path)
    assert cfg.validation_params().tau_d == 3.25  # CLI beats file
    assert cfg.seed == 4                          # file beats defaults
