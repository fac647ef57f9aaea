"""File formats for point clouds, per-point sidecars, and box lists.

Point-cloud CSV: UTF-8, LF endings, a `# frame=<label>` comment line, then
the header `x,y,z,rcs,doppler,sensor_id,t` and one point per row. Floats
are written with repr(), i.e. the shortest decimal that parses back to the
exact same double, so write -> read round-trips are bit-identical.

Hyper clouds append `confidence,source_index` columns. Label sidecars are
`index,label,object_id` rows. Box lists are JSON arrays.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import Box3D, PointCloud

POINT_HEADER = "x,y,z,rcs,doppler,sensor_id,t"
HYPER_HEADER = POINT_HEADER + ",confidence,source_index"
LABEL_HEADER = "index,label,object_id"


class FormatError(ValueError):
    pass


def _f(x: float) -> str:
    return repr(float(x))


def write_point_csv(cloud: PointCloud, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# frame={cloud.frame_id}\n")
        fh.write(POINT_HEADER + "\n")
        for i in range(len(cloud)):
            x, y, z = cloud.xyz[i]
            fh.write(f"{_f(x)},{_f(y)},{_f(z)},{_f(cloud.rcs[i])},"
                     f"{_f(cloud.doppler[i])},{int(cloud.sensor_id[i])},"
                     f"{_f(cloud.t[i])}\n")


def read_point_csv(path: str | Path) -> PointCloud:
    frame_id, rows = _read_rows(path, POINT_HEADER)
    if not rows:
        return PointCloud.empty(frame_id)
    arr = np.array(rows)
    return PointCloud(arr[:, :3], arr[:, 3], arr[:, 4],
                      arr[:, 5].astype(np.int64), arr[:, 6], frame_id)


def _read_rows(path: str | Path, header: str) -> tuple[str, list[list[float]]]:
    frame_id = ""
    rows: list[list[float]] = []
    ncols = header.count(",") + 1
    with open(path, "r", encoding="utf-8") as fh:
        header_seen = False
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("frame="):
                    frame_id = body[len("frame="):]
                continue
            if not header_seen:
                if line != header:
                    raise FormatError(f"{path}:{lineno}: expected header {header!r}, got {line!r}")
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != ncols:
                raise FormatError(f"{path}:{lineno}: expected {ncols} columns, got {len(parts)}")
            rows.append([float(p) for p in parts])
    if not header_seen:
        raise FormatError(f"{path}: missing header line")
    return frame_id, rows


def write_labels_csv(labels: list[str], object_ids: np.ndarray, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(LABEL_HEADER + "\n")
        for i, (lab, oid) in enumerate(zip(labels, object_ids)):
            fh.write(f"{i},{lab},{int(oid)}\n")


def read_labels_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    labels: list[str] = []
    oids: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != LABEL_HEADER:
            raise FormatError(f"{path}: expected header {LABEL_HEADER!r}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.rstrip("\n")
            if not line:
                continue
            idx, lab, oid = line.split(",")
            if int(idx) != len(labels):
                raise FormatError(f"{path}:{lineno}: non-contiguous index {idx}")
            labels.append(lab)
            oids.append(int(oid))
    return labels, np.array(oids, dtype=np.int64)


def write_hyper_csv(cloud: PointCloud, confidence: np.ndarray,
                    source_index: np.ndarray, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# frame={cloud.frame_id}\n")
        fh.write(HYPER_HEADER + "\n")
        for i in range(len(cloud)):
            x, y, z = cloud.xyz[i]
            fh.write(f"{_f(x)},{_f(y)},{_f(z)},{_f(cloud.rcs[i])},"
                     f"{_f(cloud.doppler[i])},{int(cloud.sensor_id[i])},"
                     f"{_f(cloud.t[i])},{_f(confidence[i])},{int(source_index[i])}\n")


def read_hyper_csv(path: str | Path) -> tuple[PointCloud, np.ndarray, np.ndarray]:
    frame_id, rows = _read_rows(path, HYPER_HEADER)
    if not rows:
        return PointCloud.empty(frame_id), np.zeros(0), np.zeros(0, np.int64)
    arr = np.array(rows)
    cloud = PointCloud(arr[:, :3], arr[:, 3], arr[:, 4],
                       arr[:, 5].astype(np.int64), arr[:, 6], frame_id)
    return cloud, arr[:, 7], arr[:, 8].astype(np.int64)


def write_boxes_json(boxes: list[Box3D], path: str | Path) -> None:
    doc = [{
        "id": b.id,
        "category": b.category,
        "center": [float(v) for v in b.center],
        "size": list(b.size),
        "yaw": float(b.yaw),
        "velocity": [float(v) for v in b.velocity],
    } for b in boxes]
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_boxes_json(path: str | Path) -> list[Box3D]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [Box3D(np.array(b["center"]), tuple(b["size"]), float(b["yaw"]),
                  b["category"], np.array(b["velocity"]), int(b["id"]))
            for b in doc]


def write_flags_csv(flags: np.ndarray, path: str | Path, column: str = "keep") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"index,{column}\n")
        for i, v in enumerate(flags):
            fh.write(f"{i},{1 if v else 0}\n")


def read_flags_csv(path: str | Path) -> np.ndarray:
    vals: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            line = line.rstrip("\n")
            if line:
                vals.append(int(line.split(",")[1]))
    return np.array(vals, dtype=bool)
