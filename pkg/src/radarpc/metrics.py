"""Evaluation: set-to-set geometric fidelity (CD/HD/F-score), foreground
boost accounting, and center-distance mAP.

Chamfer uses the squared-distance convention by default (squared=False
gives the unsquared variant). F-score needs an explicit matching
threshold; 0.2 m (about one BEV pixel) is the shipped default.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .core import Box3D, PointCloud, points_in_box_mask
from .enhance import HyperCloud

log = logging.getLogger(__name__)

DEFAULT_FSCORE_TAU = 0.2


class MetricError(ValueError):
    pass


def _as_2d(points: np.ndarray, name: str) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise MetricError(f"{name} must be an (n, 2) point set")
    if pts.shape[0] == 0:
        raise MetricError(f"{name} is empty; the metric is undefined")
    return np.ascontiguousarray(pts)


def _min_sqdists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return kernels.nearest_neighbor(a, b)[1]


def chamfer(a: np.ndarray, b: np.ndarray, squared: bool = True) -> float:
    """Symmetric Chamfer distance: mean nearest-neighbor squared distance
    in both directions (square roots first when squared=False)."""
    a = _as_2d(a, "A")
    b = _as_2d(b, "B")
    dab = _min_sqdists(a, b)
    dba = _min_sqdists(b, a)
    if not squared:
        dab = np.sqrt(dab)
        dba = np.sqrt(dba)
    return float(np.mean(dab) + np.mean(dba))


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    a = _as_2d(a, "A")
    b = _as_2d(b, "B")
    return float(np.sqrt(max(np.max(_min_sqdists(a, b)),
                             np.max(_min_sqdists(b, a)))))


def fscore(a: np.ndarray, b: np.ndarray,
           tau_match: float = DEFAULT_FSCORE_TAU) -> float:
    """A is the prediction, B the reference; a point matches when its
    nearest cross-set neighbor is within tau_match (inclusive)."""
    if tau_match <= 0.0:
        raise MetricError("tau_match must be positive")
    a = _as_2d(a, "A")
    b = _as_2d(b, "B")
    t2 = tau_match * tau_match
    precision = float(np.mean(_min_sqdists(a, b) <= t2))
    recall = float(np.mean(_min_sqdists(b, a) <= t2))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class GeomReport:
    chamfer: float
    hausdorff: float
    fscore: float
    match_tau: float


def geom_report(pred: np.ndarray, ref: np.ndarray,
                tau_match: float = DEFAULT_FSCORE_TAU,
                cd_squared: bool = True) -> GeomReport:
    return GeomReport(chamfer(pred, ref, squared=cd_squared),
                      hausdorff(pred, ref), fscore(pred, ref, tau_match),
                      tau_match)


# --- foreground boost accounting -----------------------------------------

@dataclass(frozen=True)
class BoostRow:
    category: str
    raw_avg: float
    added_avg: float
    boost: float | None   # None when no frame had raw points ("n/a")
    frames: int


def _inbox_count(xyz: np.ndarray, boxes: Sequence[Box3D], category: str) -> int:
    total = 0
    for box in boxes:
        if box.category == category:
            total += int(points_in_box_mask(xyz, box).sum())
    return total


def fg_boost_report(frames: Sequence[tuple[PointCloud, HyperCloud, Sequence[Box3D]]],
                    categories: Sequence[str]) -> list[BoostRow]:
    """Per-category in-box point accounting across frames.

    raw_avg / added_avg are per-frame means of in-box counts (raw) and of
    enhanced-minus-raw (added). The boost column is the mean of per-frame
    ratios added/raw, skipping frames with zero raw points; it is NOT the
    ratio of the two averages, which is a different number on uneven
    frames. A trailing "total" row aggregates all categories.
    """
    rows: list[BoostRow] = []
    cats = list(categories) + ["total"]
    for cat in cats:
        raws, addeds, ratios = [], [], []
        for raw_cloud, hyper, boxes in frames:
            if cat == "total":
                raw = sum(_inbox_count(raw_cloud.xyz, boxes, c) for c in categories)
                enh = sum(_inbox_count(hyper.cloud.xyz, boxes, c) for c in categories)
            else:
                raw = _inbox_count(raw_cloud.xyz, boxes, cat)
                enh = _inbox_count(hyper.cloud.xyz, boxes, cat)
            raws.append(raw)
            addeds.append(enh - raw)
            if raw > 0:
                ratios.append((enh - raw) / raw)
        boost = float(np.mean(ratios)) if ratios else None
        rows.append(BoostRow(cat, float(np.mean(raws)) if raws else 0.0,
                             float(np.mean(addeds)) if addeds else 0.0,
                             boost, len(frames)))
    return rows


def format_boost_table(rows: Sequence[BoostRow]) -> str:
    lines = [f"{'class':<14} {'raw avg':>10} {'added avg':>10} {'boost':>10}"]
    for r in rows:
        boost = "n/a" if r.boost is None else f"{100.0 * r.boost:.2f}%"
        lines.append(f"{r.category:<14} {r.raw_avg:>10.2f} {r.added_avg:>+10.2f} {boost:>10}")
    return "\n".join(lines)


# --- center-distance detection evaluation ---------------------------------

@dataclass(frozen=True)
class Detection:
    """One predicted (or ground-truth) box; GT records carry score 1.0."""

    frame_id: str
    category: str
    center: tuple[float, float, float]
    size: tuple[float, float, float]
    yaw: float
    score: float = 1.0


@dataclass(frozen=True)
class DetEvalConfig:
    dist_thresholds: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    max_range: float = 50.0
    categories: tuple[str, ...] = ()   # empty: derive from the ground truth

    def __post_init__(self) -> None:
        if list(self.dist_thresholds) != sorted(self.dist_thresholds):
            raise ValueError("dist_thresholds must be sorted ascending")


def _range_filter(records: Sequence[Detection], max_range: float) -> list[Detection]:
    return [r for r in records
            if np.hypot(r.center[0], r.center[1]) <= max_range]


def average_precision(preds: Sequence[Detection], gts: Sequence[Detection],
                      d: float, category: str, max_range: float = 50.0,
                      normalization: str = "nuscenes") -> float | None:
    """AP for one category at one center-distance threshold.

    Predictions are consumed in descending score (ties: lowest input index
    first); each greedily matches the nearest unmatched same-category GT in
    its frame within BEV center distance <= d. The nuScenes normalization
    integrates precision over recall in (0.1, 1], drops operating points
    below 0.1 precision, and rescales by 0.9; normalization="plain" is the
    raw 101-point interpolated AP. Returns None (with a warning) when the
    category has no ground truth.
    """
    preds = [p for p in _range_filter(preds, max_range) if p.category == category]
    gts = [g for g in _range_filter(gts, max_range) if g.category == category]
    npos = len(gts)
    if npos == 0:
        log.warning("category %r has no ground truth inside %.1f m; AP excluded",
                    category, max_range)
        return None

    gt_by_frame: dict[str, list[int]] = {}
    for i, g in enumerate(gts):
        gt_by_frame.setdefault(g.frame_id, []).append(i)

    order = sorted(range(len(preds)), key=lambda i: (-preds[i].score, i))
    taken: set[int] = set()
    tp = np.zeros(len(order))
    fp = np.zeros(len(order))
    for rank, pi in enumerate(order):
        p = preds[pi]
        best_j = -1
        best_dist = np.inf
        for j in gt_by_frame.get(p.frame_id, ()):
            if j in taken:
                continue
            g = gts[j]
            dist = float(np.hypot(p.center[0] - g.center[0],
                                  p.center[1] - g.center[1]))
            if dist < best_dist:
                best_dist = dist
                best_j = j
        if best_j >= 0 and best_dist <= d:
            taken.add(best_j)
            tp[rank] = 1.0
        else:
            fp[rank] = 1.0

    if len(order) == 0:
        return 0.0
    tp = np.cumsum(tp)
    fp = np.cumsum(fp)
    recall = tp / npos
    precision = tp / (tp + fp)
    rec_grid = np.linspace(0.0, 1.0, 101)
    prec_interp = np.interp(rec_grid, recall, precision, right=0.0)
    if normalization == "plain":
        return float(np.mean(prec_interp))
    clipped = prec_interp[11:] - 0.1   # recall > 0.1, precision floor 0.1
    np.clip(clipped, 0.0, None, out=clipped)
    return float(np.mean(clipped) / 0.9)


def write_detections_jsonl(records: Sequence[Detection], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps({
                "frame_id": r.frame_id, "category": r.category,
                "center": list(r.center), "size": list(r.size),
                "yaw": r.yaw, "score": r.score,
            }) + "\n")


def read_detections_jsonl(path: str | Path) -> list[Detection]:
    out: list[Detection] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            out.append(Detection(str(d["frame_id"]), d["category"],
                                 tuple(d["center"]), tuple(d["size"]),
                                 float(d["yaw"]), float(d.get("score", 1.0))))
    return out


def map_score(preds: Sequence[Detection], gts: Sequence[Detection],
              cfg: DetEvalConfig = DetEvalConfig(),
              normalization: str = "nuscenes"
              ) -> tuple[float, dict[tuple[str, float], float]]:
    """Mean AP over categories and thresholds. Categories without GT are
    excluded from the mean."""
    categories = cfg.categories or tuple(sorted({g.category for g in gts}))
    table: dict[tuple[str, float], float] = {}
    vals: list[float] = []
    for cat in categories:
        for d in cfg.dist_thresholds:
            ap = average_precision(preds, gts, d, cat, cfg.max_range, normalization)
            if ap is None:
                continue
            table[(cat, d)] = ap
            vals.append(ap)
    return (float(np.mean(vals)) if vals else 0.0), table
