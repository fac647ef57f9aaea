"""Pipeline orchestration CLI.

Stages write into a fixed directory layout under --out and register every
artifact in out/manifest.json with a content hash, so identical seeds
reproduce identical manifests and any stage can be rerun from its inputs.

Exit codes: 0 success, 2 config error, 3 missing upstream artifact,
4 external enhancer failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import shutil
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import bev, fusion, io, metrics, supervision, synth, validation
from .config import ConfigError, PipelineConfig
from .core import PointCloud, apply_transform
from .enhance import EnhancerError, EnhancerSpec, assemble_hyper_cloud, enhance
from .synth import LABEL_CLUTTER, LABEL_GHOST, LabeledSweep, Scene


class MissingArtifactError(FileNotFoundError):
    def __init__(self, stage: str, path: Path, producer: str):
        super().__init__(f"stage {stage!r} requires {path} (produced by stage {producer!r})")
        self.path = path


# --- manifest --------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def update_manifest(out_dir: Path, stage: str, paths: Iterable[Path]) -> None:
    manifest_path = out_dir / "manifest.json"
    manifest: dict[str, dict[str, str]] = {}
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text("utf-8"))
    for p in paths:
        rel = str(Path(p).relative_to(out_dir))
        manifest[rel] = {"stage": stage, "sha256": _sha256(Path(p))}
    manifest_path.write_text(
        json.dumps(dict(sorted(manifest.items())), indent=2) + "\n", "utf-8")


def _require(stage: str, path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(stage, path, producer)
    return path


def _frame_name(idx: int) -> str:
    return f"f{idx:04d}"


def _map_frames(fn: Callable[[int], list[Path]], indices: Sequence[int],
                jobs: int) -> list[Path]:
    if jobs <= 1:
        results = [fn(i) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, indices))
    return [p for sub in results for p in sub]


def _load_scene(cfg: PipelineConfig, stage: str) -> Scene:
    path = _require(stage, cfg.out_dir / "scene.json", "synth")
    return Scene.load(path)


# --- stage: synth -----------------------------------------------------------

def stage_synth(cfg: PipelineConfig) -> None:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    if cfg.scene_path is not None:
        scene = Scene.load(_require("synth", cfg.scene_path, "user"))
    else:
        gen = synth.SceneGenConfig(
            duration=cfg._float("synth.duration"),
            frame_rate=cfg.frame_rate,
            n_objects=cfg._int("synth.objects"),
            area=cfg._float("synth.area"),
            sensors=synth.default_sensor_rig(
                max_range=cfg._float("synth.sensor_max_range"),
                rear_effective_deg=cfg.rear_fov_effective_deg))
        scene = synth.generate_scene(gen, cfg.seed)
    scene.save(out / "scene.json")

    for sub in ("sweeps", "lidar", "boxes"):
        (out / sub).mkdir(exist_ok=True)
    noise = cfg._float("synth.noise_sigma_xyz")
    ghosts = cfg._int("synth.ghosts")
    clutter = cfg._int("synth.clutter")
    artifacts: list[Path] = [out / "scene.json"]
    ts = scene.timestamps

    def do_frame(idx: int) -> list[Path]:
        t = float(ts[idx])
        written: list[Path] = []
        for sensor in scene.sensors:
            sweep = synth.simulate_sweep(scene, sensor.sensor_id, t,
                                         noise_sigma_xyz=noise, seed=cfg.seed)
            if (ghosts or clutter) and len(sweep.points):
                # near-boresight reflector planes keep mirrored returns
                # inside the wedge most of the time
                prng = np.random.default_rng([cfg.seed, 7, sensor.sensor_id, idx])
                planes = [(np.array([np.cos(a), np.sin(a), 0.0]), float(d))
                          for a, d in zip(prng.uniform(-0.5, 0.5, 4),
                                          prng.uniform(8.0, 0.45 * sensor.max_range, 4))]
                try:
                    sweep = synth.inject_artifacts(
                        sweep, sensor, ghosts, clutter, planes,
                        seed=int(cfg.seed * 1_000_003 + sensor.sensor_id * 10_007 + idx),
                        max_tries=500)
                except synth.ArtifactError:
                    pass  # geometry left no room; ship the clean sweep
            base = out / "sweeps" / f"s{sensor.sensor_id}_{_frame_name(idx)}"
            io.write_point_csv(sweep.points, base.with_suffix(".csv"))
            io.write_labels_csv(list(sweep.labels), sweep.object_ids,
                                base.with_suffix(".labels.csv"))
            written += [base.with_suffix(".csv"), base.with_suffix(".labels.csv")]
        lidar = synth.simulate_lidar_sweep(
            scene, t, seed=cfg.seed,
            density_scale=cfg._float("synth.lidar_density_scale"),
            ground_density=cfg._float("synth.lidar_ground_density"))
        lbase = out / "lidar" / _frame_name(idx)
        io.write_point_csv(lidar.points, lbase.with_suffix(".csv"))
        io.write_labels_csv(list(lidar.labels), lidar.object_ids,
                            lbase.with_suffix(".labels.csv"))
        bpath = out / "boxes" / f"{_frame_name(idx)}.json"
        io.write_boxes_json(scene.boxes_at(idx), bpath)
        return written + [lbase.with_suffix(".csv"), lbase.with_suffix(".labels.csv"), bpath]

    artifacts += _map_frames(do_frame, range(len(ts)), cfg.jobs)
    update_manifest(out, "synth", artifacts)
    print(f"synth: {len(ts)} frames, {len(scene.sensors)} sensors, "
          f"{len(scene.objects)} objects -> {out}")


# --- stage: fuse ------------------------------------------------------------

def _read_sweep(out: Path, stage: str, sid: int, idx: int) -> LabeledSweep:
    base = out / "sweeps" / f"s{sid}_{_frame_name(idx)}"
    cloud = io.read_point_csv(_require(stage, base.with_suffix(".csv"), "synth"))
    labels_path = base.with_suffix(".labels.csv")
    if labels_path.exists():
        labels, oids = io.read_labels_csv(labels_path)
    else:
        labels = ["true_return"] * len(cloud)
        oids = np.full(len(cloud), -1, dtype=np.int64)
    return LabeledSweep(cloud, np.array(labels, dtype="<U12"), oids)


def stage_fuse(cfg: PipelineConfig) -> None:
    out = cfg.out_dir
    scene = _load_scene(cfg, "fuse")
    (out / "fused").mkdir(exist_ok=True)
    ts = scene.timestamps
    ego_poses = scene.ego_poses
    cull_rows: list[tuple[int, int, int, int, int]] = []  # appends are atomic
    artifacts: list[Path] = []

    def do_frame(idx: int) -> list[Path]:
        t = float(ts[idx])
        window = cfg.window(t)
        aligned: dict[tuple[int, float], PointCloud] = {}
        label_parts: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}
        for sensor in scene.sensors:
            for tau in window.timestamps():
                tau_idx = scene.frame_index(tau)
                sweep = _read_sweep(out, "fuse", sensor.sensor_id, tau_idx)
                mask = fusion.azimuth_cull_mask(sweep.points, sensor)
                kept = sweep.subset(mask)
                cull_rows.append((idx, sensor.sensor_id, tau_idx,
                                  int(mask.sum()), int((~mask).sum())))
                key = (sensor.sensor_id, tau)
                aligned[key] = fusion.align_to_reference(sweep.points, sensor)
                label_parts[key] = (kept.labels, kept.object_ids)
        acc = fusion.compensate_and_accumulate(aligned, ego_poses, window)
        # labels follow the documented canonical order: sensor, tau, index
        labels = np.concatenate([label_parts[(sid, tau)][0]
                                 for sid in sorted({k[0] for k in aligned})
                                 for tau in window.timestamps()
                                 if (sid, tau) in label_parts] or
                                [np.zeros(0, "<U12")])
        oids = np.concatenate([label_parts[(sid, tau)][1]
                               for sid in sorted({k[0] for k in aligned})
                               for tau in window.timestamps()
                               if (sid, tau) in label_parts] or
                              [np.zeros(0, np.int64)])
        if labels.shape[0] != len(acc):
            raise RuntimeError("label bookkeeping out of sync with accumulation")
        base = out / "fused" / _frame_name(idx)
        io.write_point_csv(acc, base.with_suffix(".csv"))
        io.write_labels_csv(list(labels), oids, base.with_suffix(".labels.csv"))
        return [base.with_suffix(".csv"), base.with_suffix(".labels.csv")]

    artifacts += _map_frames(do_frame, range(len(ts)), cfg.jobs)
    report = out / "fused" / "cull_report.csv"
    with open(report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame,sensor_id,sweep_frame,retained,culled\n")
        for row in sorted(cull_rows):
            fh.write(",".join(str(v) for v in row) + "\n")
    update_manifest(out, "fuse", artifacts + [report])
    print(f"fuse: {len(ts)} keyframes accumulated -> {out / 'fused'}")


# --- stage: validate --------------------------------------------------------

def stage_validate(cfg: PipelineConfig, skip_filter: bool = False) -> None:
    out = cfg.out_dir
    scene = _load_scene(cfg, "validate")
    (out / "validated").mkdir(exist_ok=True)
    params = cfg.validation_params()
    ts = scene.timestamps
    artifacts: list[Path] = []
    stat_rows: list[tuple[str, str, int, int]] = []  # appends are atomic

    def do_frame(idx: int) -> list[Path]:
        base_in = out / "fused" / _frame_name(idx)
        cloud = io.read_point_csv(_require("validate", base_in.with_suffix(".csv"), "fuse"))
        labels_path = base_in.with_suffix(".labels.csv")
        labels = oids = None
        if labels_path.exists():
            lab, oids_arr = io.read_labels_csv(labels_path)
            labels, oids = np.array(lab, dtype="<U12"), oids_arr
        if skip_filter:
            keep = np.ones(len(cloud), dtype=bool)
            kept_cloud = cloud
        else:
            per_sensor = {int(s): cloud.subset(cloud.sensor_id == s)
                          for s in np.unique(cloud.sensor_id)}
            kept_cloud, keep = validation.validate(per_sensor, params)
        base = out / "validated" / _frame_name(idx)
        io.write_point_csv(kept_cloud, base.with_suffix(".csv"))
        io.write_flags_csv(keep, base.with_suffix(".flags.csv"))
        written = [base.with_suffix(".csv"), base.with_suffix(".flags.csv")]
        for sid in np.unique(cloud.sensor_id):
            m = cloud.sensor_id == sid
            stat_rows.append(("sensor", str(int(sid)), int(keep[m].sum()),
                              int((~keep[m]).sum())))
        if labels is not None:
            io.write_labels_csv(list(labels[keep]), oids[keep],
                                base.with_suffix(".labels.csv"))
            written.append(base.with_suffix(".labels.csv"))
            for lab in np.unique(labels):
                m = labels == lab
                stat_rows.append(("label", str(lab), int(keep[m].sum()),
                                  int((~keep[m]).sum())))
        return written

    artifacts += _map_frames(do_frame, range(len(ts)), cfg.jobs)
    summary: dict[tuple[str, str], list[int]] = {}
    for kind, key, kept, removed in stat_rows:
        agg = summary.setdefault((kind, key), [0, 0])
        agg[0] += kept
        agg[1] += removed
    report = out / "validated" / "summary.csv"
    with open(report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("kind,key,kept,removed\n")
        for (kind, key), (kept, removed) in sorted(summary.items()):
            fh.write(f"{kind},{key},{kept},{removed}\n")
    update_manifest(out, "validate", artifacts + [report])
    print(f"validate: params tau_d={params.tau_d} r={params.r} k_min={params.k_min} "
          f"-> {out / 'validated'}")


# --- stage: rasterize -------------------------------------------------------

def stage_rasterize(cfg: PipelineConfig) -> None:
    out = cfg.out_dir
    scene = _load_scene(cfg, "rasterize")
    (out / "bev").mkdir(exist_ok=True)
    spec = cfg.grid_spec()
    artifacts: list[Path] = []
    skip_rows: list[tuple[int, int, int]] = []

    def do_frame(idx: int) -> list[Path]:
        src = _require("rasterize", out / "validated" / f"{_frame_name(idx)}.csv",
                       "validate")
        cloud = io.read_point_csv(src)
        grid, skipped = bev.rasterize_counted(cloud, spec)
        skip_rows.append((idx, len(cloud) - skipped, skipped))
        path = out / "bev" / f"{_frame_name(idx)}.pgm"
        bev.write_pgm(grid, path)
        return [path, path.with_suffix(".grid")]

    artifacts += _map_frames(do_frame, range(len(scene.timestamps)), cfg.jobs)
    report = out / "bev" / "raster_report.csv"
    with open(report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame,rasterized,skipped\n")
        for row in sorted(skip_rows):
            fh.write(",".join(str(v) for v in row) + "\n")
    update_manifest(out, "rasterize", artifacts + [report])
    print(f"rasterize: {spec.width}x{spec.height} grids -> {out / 'bev'}")


# --- stage: make-target -----------------------------------------------------

def stage_make_target(cfg: PipelineConfig) -> None:
    out = cfg.out_dir
    scene = _load_scene(cfg, "make-target")
    (out / "target").mkdir(exist_ok=True)
    spec = cfg.grid_spec()
    ground = cfg.ground_params()
    ts = scene.timestamps
    artifacts: list[Path] = []
    fallback_rows: list[tuple[int, int]] = []

    def do_frame(idx: int) -> list[Path]:
        name = _frame_name(idx)
        validated = io.read_point_csv(
            _require("make-target", out / "validated" / f"{name}.csv", "validate"))
        lidar = io.read_point_csv(
            _require("make-target", out / "lidar" / f"{name}.csv", "synth"))
        boxes = io.read_boxes_json(
            _require("make-target", out / "boxes" / f"{name}.json", "synth"))
        no_ground = supervision.remove_ground(lidar, ground)
        fg = supervision.extract_box_foreground(no_ground, boxes)
        pseudo, fallbacks = supervision.make_pseudo_radar_fg(
            fg, validated, boxes, float(ts[idx]))
        fallback_rows.extend((idx, bid) for bid in fallbacks)
        target = supervision.inject_foreground(validated, pseudo)
        base = out / "target" / name
        io.write_point_csv(target.target_cloud, base.with_suffix(".csv"))
        io.write_flags_csv(target.fg_mask, base.with_suffix(".mask.csv"), column="fg")
        grid = bev.rasterize(target.target_cloud, spec)
        bev.write_pgm(grid, base.with_suffix(".pgm"))
        return [base.with_suffix(".csv"), base.with_suffix(".mask.csv"),
                base.with_suffix(".pgm"), base.with_suffix(".grid")]

    artifacts += _map_frames(do_frame, range(len(ts)), cfg.jobs)
    report = out / "target" / "fallbacks.csv"
    with open(report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame,box_id\n")
        for row in sorted(fallback_rows):
            fh.write(f"{row[0]},{row[1]}\n")
    update_manifest(out, "make-target", artifacts + [report])
    print(f"make-target: supervision targets -> {out / 'target'}")


# --- stage: enhance ---------------------------------------------------------

def stage_enhance(cfg: PipelineConfig) -> None:
    out = cfg.out_dir
    scene = _load_scene(cfg, "enhance")
    (out / "enhanced").mkdir(exist_ok=True)
    spec = cfg.enhancer_spec()
    _ = cfg.tau_int  # validate the byte range up front
    artifacts: list[Path] = []

    def do_frame(idx: int) -> list[Path]:
        name = _frame_name(idx)
        condition = bev.read_pgm(
            _require("enhance", out / "bev" / f"{name}.pgm", "rasterize"))
        oracle_target = None
        if spec.kind == "oracle":
            oracle_target = bev.read_pgm(
                _require("enhance", out / "target" / f"{name}.pgm", "make-target"))
        result = enhance(condition, spec, oracle_target=oracle_target)
        path = out / "enhanced" / f"{name}.pgm"
        bev.write_pgm(result, path)
        return [path, path.with_suffix(".grid")]

    artifacts += _map_frames(do_frame, range(len(scene.timestamps)), cfg.jobs)
    update_manifest(out, "enhance", artifacts)
    print(f"enhance: kind={spec.kind} -> {out / 'enhanced'}")


# --- stage: lift ------------------------------------------------------------

def stage_lift(cfg: PipelineConfig, union_raw: bool = False) -> None:
    out = cfg.out_dir
    scene = _load_scene(cfg, "lift")
    (out / "hyper").mkdir(exist_ok=True)
    tau = cfg.tau_int
    artifacts: list[Path] = []

    def do_frame(idx: int) -> list[Path]:
        name = _frame_name(idx)
        enhanced = bev.read_pgm(
            _require("lift", out / "enhanced" / f"{name}.pgm", "enhance"))
        validated = io.read_point_csv(
            _require("lift", out / "validated" / f"{name}.csv", "validate"))
        hyper = assemble_hyper_cloud(enhanced, validated, tau, union_raw=union_raw)
        path = out / "hyper" / f"{name}.csv"
        io.write_hyper_csv(hyper.cloud, hyper.confidence, hyper.source_index, path)
        return [path]

    artifacts += _map_frames(do_frame, range(len(scene.timestamps)), cfg.jobs)
    update_manifest(out, "lift", artifacts)
    print(f"lift: threshold {tau}, union_raw={union_raw} -> {out / 'hyper'}")


# --- stage: deraster --------------------------------------------------------

def stage_deraster(cfg: PipelineConfig, pgm_path: Path, csv_out: Path) -> None:
    grid = bev.read_pgm(_require("deraster", pgm_path, "rasterize/enhance"))
    pts = bev.derasterize(grid, cfg.tau_int)
    with open(csv_out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("x,y,confidence\n")
        for x, y, c in pts:
            fh.write(f"{float(x)!r},{float(y)!r},{float(c)!r}\n")
    print(f"deraster: {pts.shape[0]} points -> {csv_out}")


# --- stage: eval-geom -------------------------------------------------------

def stage_eval_geom(cfg: PipelineConfig, cd_squared: bool = True) -> None:
    out = cfg.out_dir
    scene = _load_scene(cfg, "eval-geom")
    (out / "reports").mkdir(exist_ok=True)
    tau = cfg.tau_int
    rows = []
    for idx in range(len(scene.timestamps)):
        name = _frame_name(idx)
        hyper, _, _ = io.read_hyper_csv(
            _require("eval-geom", out / "hyper" / f"{name}.csv", "lift"))
        target = bev.read_pgm(
            _require("eval-geom", out / "target" / f"{name}.pgm", "make-target"))
        ref = bev.derasterize(target, 1)[:, :2]
        if len(hyper) == 0 or ref.shape[0] == 0:
            rows.append((idx, float("nan"), float("nan"), 0.0))
            continue
        rep = metrics.geom_report(hyper.xyz[:, :2], ref, cfg.fscore_tau, cd_squared)
        rows.append((idx, rep.chamfer, rep.hausdorff, rep.fscore))
    report = out / "reports" / "geom.csv"
    with open(report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("frame,chamfer,hausdorff,fscore\n")
        for idx, cd, hd, f1 in rows:
            fh.write(f"{idx},{cd!r},{hd!r},{f1!r}\n")
        valid = [r for r in rows if not np.isnan(r[1])]
        if valid:
            fh.write(f"mean,{float(np.mean([r[1] for r in valid]))!r},"
                     f"{float(np.mean([r[2] for r in valid]))!r},"
                     f"{float(np.mean([r[3] for r in valid]))!r}\n")
    update_manifest(out, "eval-geom", [report])
    mean_f = np.mean([r[3] for r in rows]) if rows else 0.0
    print(f"eval-geom: mean F-score {mean_f:.4f} -> {report}")


# --- stage: eval-det --------------------------------------------------------

def stage_eval_det(cfg: PipelineConfig, pred_path: Path, gt_path: Path,
                   plain_ap: bool = False) -> None:
    out = cfg.out_dir
    (out / "reports").mkdir(parents=True, exist_ok=True)
    preds = metrics.read_detections_jsonl(_require("eval-det", pred_path, "detector"))
    gts = metrics.read_detections_jsonl(_require("eval-det", gt_path, "synth"))
    norm = "plain" if plain_ap else "nuscenes"
    mean_ap, table = metrics.map_score(preds, gts, cfg.det_eval(), normalization=norm)
    report = out / "reports" / "det.csv"
    with open(report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("category,dist_threshold,ap\n")
        for (cat, d), ap in sorted(table.items()):
            fh.write(f"{cat},{d!r},{ap!r}\n")
        fh.write(f"mAP,,{mean_ap!r}\n")
    update_manifest(out, "eval-det", [report])
    print(f"mAP {mean_ap:.4f}")


# --- stage: report-fg -------------------------------------------------------

def stage_report_fg(cfg: PipelineConfig) -> None:
    """Boost accounting against the raw single-sweep multi-radar input
    (the unenhanced baseline), not the accumulated cloud."""
    out = cfg.out_dir
    scene = _load_scene(cfg, "report-fg")
    (out / "reports").mkdir(exist_ok=True)
    from .enhance import HyperCloud
    frames = []
    categories: list[str] = []
    for idx in range(len(scene.timestamps)):
        name = _frame_name(idx)
        raw_parts = [fusion.align_to_reference(
            _read_sweep(out, "report-fg", s.sensor_id, idx).points, s)
            for s in scene.sensors]
        raw = PointCloud.concat(raw_parts, "reference")
        cloud, conf, src = io.read_hyper_csv(
            _require("report-fg", out / "hyper" / f"{name}.csv", "lift"))
        boxes = io.read_boxes_json(
            _require("report-fg", out / "boxes" / f"{name}.json", "synth"))
        frames.append((raw, HyperCloud(cloud, conf, src), boxes))
        for b in boxes:
            if b.category not in categories:
                categories.append(b.category)
    cfg_cats = cfg.det_eval().categories
    rows = metrics.fg_boost_report(frames, cfg_cats or tuple(categories))
    report = out / "reports" / "fg_boost.csv"
    with open(report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("category,raw_avg,added_avg,boost,frames\n")
        for r in rows:
            boost = "n/a" if r.boost is None else repr(r.boost)
            fh.write(f"{r.category},{r.raw_avg!r},{r.added_avg!r},{boost},{r.frames}\n")
    update_manifest(out, "report-fg", [report])
    print(metrics.format_boost_table(rows))


# --- pipeline + ablation ----------------------------------------------------

PIPELINE_STAGES = ("synth", "fuse", "validate", "rasterize", "make-target",
                   "enhance", "lift")


def run_pipeline(cfg: PipelineConfig, with_target: bool | None = None,
                 union_raw: bool = False) -> None:
    need_target = cfg.enhancer_spec().kind == "oracle" if with_target is None \
        else with_target
    stage_synth(cfg)
    stage_fuse(cfg)
    stage_validate(cfg)
    stage_rasterize(cfg)
    if need_target:
        stage_make_target(cfg)
    stage_enhance(cfg)
    stage_lift(cfg, union_raw=union_raw)


def _label_survival(out: Path, scene: Scene, label: str) -> tuple[int, int]:
    """(points with `label` entering validation, points surviving it)."""
    total = kept = 0
    for idx in range(len(scene.timestamps)):
        name = _frame_name(idx)
        fused_labels, _ = io.read_labels_csv(out / "fused" / f"{name}.labels.csv")
        total += sum(1 for lab in fused_labels if lab == label)
        val_path = out / "validated" / f"{name}.labels.csv"
        if val_path.exists():
            val_labels, _ = io.read_labels_csv(val_path)
            kept += sum(1 for lab in val_labels if lab == label)
    return total, kept


def run_ablation(cfg: PipelineConfig, axes: Sequence[str]) -> None:
    """One pipeline run per configuration row; metrics land in
    reports/ablation.csv mirroring an ablation-table layout."""
    rows: list[tuple[str, dict[str, str], bool]] = [("baseline", {}, True)]
    for axis in axes:
        name, _, arg = axis.partition("=")
        if name == "no-accumulation":
            rows.append(("no-accumulation", {"window.seconds": "0.0"}, True))
        elif name == "no-validation":
            rows.append(("no-validation", {}, False))
        elif name == "enhancer":
            kinds = arg.split(":") if arg else ["passthrough", "oracle"]
            rows += [(f"enhancer={k}", {"enhancer.kind": k}, True) for k in kinds]
        elif name == "threshold":
            vals = arg.split(":") if arg else ["60", "200"]
            rows += [(f"threshold={v}", {"threshold.intensity": v}, True) for v in vals]
        else:
            raise ConfigError(f"unknown ablation axis {name!r}")

    out = cfg.out_dir
    (out / "reports").mkdir(parents=True, exist_ok=True)
    results = []
    for label, overrides, with_validation in rows:
        cell_dir = out / "ablation" / label.replace("=", "_")
        if cell_dir.exists():
            shutil.rmtree(cell_dir)
        cell_dir.mkdir(parents=True)
        cell_values = dict(cfg.values)
        cell_values.update(overrides)
        cell = PipelineConfig(cell_values, cell_dir, cfg.scene_path)
        stage_synth(cell)
        stage_fuse(cell)
        stage_validate(cell, skip_filter=not with_validation)
        stage_rasterize(cell)
        if cell.enhancer_spec().kind == "oracle":
            stage_make_target(cell)
        stage_enhance(cell)
        stage_lift(cell)
        scene = Scene.load(cell_dir / "scene.json")
        ghosts_in, ghosts_kept = _label_survival(cell_dir, scene, LABEL_GHOST)
        clut_in, clut_kept = _label_survival(cell_dir, scene, LABEL_CLUTTER)
        n_fused = n_val = n_hyper = 0
        for idx in range(len(scene.timestamps)):
            name = _frame_name(idx)
            n_fused += len(io.read_point_csv(cell_dir / "fused" / f"{name}.csv"))
            n_val += len(io.read_point_csv(cell_dir / "validated" / f"{name}.csv"))
            hyper, _, _ = io.read_hyper_csv(cell_dir / "hyper" / f"{name}.csv")
            n_hyper += len(hyper)
        results.append((label, n_fused, n_val, ghosts_in, ghosts_kept,
                        clut_in, clut_kept, n_hyper))

    report = out / "reports" / "ablation.csv"
    with open(report, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("config,fused_points,validated_points,ghosts_in,ghosts_kept,"
                 "clutter_in,clutter_kept,hyper_points\n")
        for row in results:
            fh.write(",".join(str(v) for v in row) + "\n")
    update_manifest(out, "ablate", [report])
    for row in results:
        print(f"ablate[{row[0]}]: fused={row[1]} validated={row[2]} "
              f"ghosts {row[4]}/{row[3]} clutter {row[6]}/{row[5]} hyper={row[7]}")


# --- argument parsing --------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radarpc",
        description="Multi-sensor 4D radar point cloud refinement pipeline")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--out", default="out", help="artifact directory")
    parser.add_argument("--seed", type=int, help="override seed")
    parser.add_argument("--jobs", type=int, help="worker threads per stage")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate scene, sweeps, lidar, boxes")
    p.add_argument("--scene", help="use an existing scene file instead of generating")
    p.add_argument("--objects", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--ghosts", type=int)
    p.add_argument("--clutter", type=int)

    sub.add_parser("fuse", help="align, compensate, accumulate")

    p = sub.add_parser("validate", help="cross-sensor + self-consistency filter")
    p.add_argument("--tau-d", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--k-min", type=int)

    p = sub.add_parser("rasterize", help="validated clouds to BEV PGM grids")
    p.add_argument("--threshold", type=int,
                   help="intensity threshold recorded for downstream "
                        "deraster/lift (rasters themselves are binary)")
    sub.add_parser("make-target", help="build diffusion supervision targets")

    p = sub.add_parser("enhance", help="run the configured enhancer per frame")
    p.add_argument("--enhancer", choices=["passthrough", "oracle", "external"])
    p.add_argument("--enhancer-cmd")
    p.add_argument("--threshold", type=int)

    p = sub.add_parser("lift", help="derasterize + attribute lift to hyper clouds")
    p.add_argument("--threshold", type=int)
    p.add_argument("--union-raw", action="store_true",
                   help="append raw validated points to the hyper cloud")

    p = sub.add_parser("deraster", help="PGM grid to x,y,confidence CSV")
    p.add_argument("--in", dest="pgm_in", required=True)
    p.add_argument("--csv-out", required=True)
    p.add_argument("--threshold", type=int)

    p = sub.add_parser("eval-geom", help="CD/HD/F-score of hyper clouds vs targets")
    p.add_argument("--fscore-tau", type=float)
    p.add_argument("--cd-root", action="store_true",
                   help="unsquared chamfer distance")

    p = sub.add_parser("eval-det", help="center-distance mAP on detection JSONL")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--plain-ap", action="store_true",
                   help="101-point interpolated AP without the nuScenes clip")

    sub.add_parser("report-fg", help="per-category foreground boost table")

    p = sub.add_parser("pipeline", help="run all stages in order")
    p.add_argument("--scene")
    p.add_argument("--enhancer", choices=["passthrough", "oracle", "external"])
    p.add_argument("--enhancer-cmd")
    p.add_argument("--with-target", action="store_true")
    p.add_argument("--union-raw", action="store_true")

    p = sub.add_parser("ablate", help="pipeline variants side by side")
    p.add_argument("--axes", required=True,
                   help="comma list: no-accumulation,no-validation,"
                        "enhancer[=a:b],threshold[=60:200]")
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides: dict[str, str] = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, _, v = item.partition("=")
        overrides[k.strip()] = v.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.jobs is not None:
        overrides["jobs"] = str(args.jobs)
    flag_map = {
        "objects": "synth.objects", "duration": "synth.duration",
        "ghosts": "synth.ghosts", "clutter": "synth.clutter",
        "tau_d": "validation.tau_d", "r": "validation.r",
        "k_min": "validation.k_min", "enhancer": "enhancer.kind",
        "enhancer_cmd": "enhancer.cmd", "threshold": "threshold.intensity",
        "fscore_tau": "threshold.fscore_tau",
    }
    for attr, key in flag_map.items():
        val = getattr(args, attr, None)
        if val is not None:
            overrides[key] = str(val)
    return PipelineConfig.build(args.config, overrides, args.out,
                                getattr(args, "scene", None))


def main(argv: Sequence[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        cmd = args.command
        if cmd == "synth":
            stage_synth(cfg)
        elif cmd == "fuse":
            stage_fuse(cfg)
        elif cmd == "validate":
            stage_validate(cfg)
        elif cmd == "rasterize":
            stage_rasterize(cfg)
        elif cmd == "make-target":
            stage_make_target(cfg)
        elif cmd == "enhance":
            stage_enhance(cfg)
        elif cmd == "lift":
            stage_lift(cfg, union_raw=args.union_raw)
        elif cmd == "deraster":
            stage_deraster(cfg, Path(args.pgm_in), Path(args.csv_out))
        elif cmd == "eval-geom":
            stage_eval_geom(cfg, cd_squared=not args.cd_root)
        elif cmd == "eval-det":
            stage_eval_det(cfg, Path(args.pred), Path(args.gt),
                           plain_ap=args.plain_ap)
        elif cmd == "report-fg":
            stage_report_fg(cfg)
        elif cmd == "pipeline":
            run_pipeline(cfg, with_target=args.with_target or None,
                         union_raw=args.union_raw)
        elif cmd == "ablate":
            run_ablation(cfg, [a.strip() for a in args.axes.split(",") if a.strip()])
        else:  # pragma: no cover
            raise ConfigError(f"unknown command {cmd!r}")
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except MissingArtifactError as e:
        print(f"missing artifact: {e}", file=sys.stderr)
        return 3
    except EnhancerError as e:
        print(f"enhancer failure: {e}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
