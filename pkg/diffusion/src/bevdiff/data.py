"""Training data: paired condition/target occupancy grids.

Grids load as float arrays normalized to [0, 1]; conditions and targets
must share dimensions. A toy-pair generator provides a self-contained
desk-scale corpus: sparse samples of filled rectangles (plus background
clutter kept in both channels), so the learning task is exactly
"complete the foreground, preserve the background".
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pgm import read_pgm, write_pgm, write_grid_sidecar


@dataclass(frozen=True)
class DiffusionSample:
    condition: np.ndarray  # (h, w) float in [0, 1]
    target: np.ndarray     # (h, w) float in [0, 1]
    frame_id: str

    def __post_init__(self) -> None:
        if self.condition.shape != self.target.shape:
            raise ValueError(f"{self.frame_id}: condition {self.condition.shape} "
                             f"!= target {self.target.shape}")


def load_pairs(cond_dir: str | Path, target_dir: str | Path) -> list[DiffusionSample]:
    cond_dir, target_dir = Path(cond_dir), Path(target_dir)
    samples = []
    for cpath in sorted(cond_dir.glob("*.pgm")):
        tpath = target_dir / cpath.name
        if not tpath.exists():
            raise FileNotFoundError(f"no target grid for {cpath.name} in {target_dir}")
        samples.append(DiffusionSample(read_pgm(cpath).astype(np.float32) / 255.0,
                                       read_pgm(tpath).astype(np.float32) / 255.0,
                                       cpath.stem))
    if not samples:
        raise FileNotFoundError(f"no .pgm pairs under {cond_dir}")
    return samples


def make_toy_pair(rng: np.random.Generator, size: int = 64,
                  sample_frac: float = 0.12) -> tuple[np.ndarray, np.ndarray]:
    cond = np.zeros((size, size), np.float32)
    targ = np.zeros((size, size), np.float32)
    n_bg = int(rng.integers(10, 25))
    ys = rng.integers(0, size, n_bg)
    xs = rng.integers(0, size, n_bg)
    cond[ys, xs] = 1.0
    targ[ys, xs] = 1.0
    for _ in range(int(rng.integers(1, 4))):
        w, h = rng.integers(6, 16, 2)
        y0 = int(rng.integers(1, size - h - 1))
        x0 = int(rng.integers(1, size - w - 1))
        targ[y0:y0 + h, x0:x0 + w] = 1.0
        cells = [(y, x) for y in range(y0, y0 + h) for x in range(x0, x0 + w)]
        take = max(2, int(sample_frac * len(cells)))
        for i in rng.choice(len(cells), take, replace=False):
            y, x = cells[i]
            cond[y, x] = 1.0
    return cond, targ


def make_toy_dataset(n_pairs: int, size: int = 64, seed: int = 0,
                     sample_frac: float = 0.12) -> list[DiffusionSample]:
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n_pairs):
        cond, targ = make_toy_pair(rng, size, sample_frac)
        out.append(DiffusionSample(cond, targ, f"toy{k:04d}"))
    return out


def write_dataset(samples: list[DiffusionSample], out_dir: str | Path,
                  extent: float = 50.0) -> None:
    out_dir = Path(out_dir)
    for sub in ("cond", "target"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    for s in samples:
        res = 2.0 * extent / s.condition.shape[1]
        for sub, img in (("cond", s.condition), ("target", s.target)):
            path = out_dir / sub / f"{s.frame_id}.pgm"
            write_pgm((img * 255.0).round().astype(np.uint8), path)
            write_grid_sidecar(path, -extent, extent, -extent, extent, res)


def occupied_pixels(img: np.ndarray, threshold: float) -> np.ndarray:
    """(n, 2) row/col coordinates of pixels at or above the threshold."""
    return np.argwhere(np.asarray(img) >= threshold)


def fscore_pixels(pred: np.ndarray, target: np.ndarray,
                  tol_px: float = 1.0) -> float:
    """F-score between two occupancy masks with a pixel-distance match
    tolerance; 0.0 when either side is empty."""
    pa = np.argwhere(np.asarray(pred, dtype=bool))
    ta = np.argwhere(np.asarray(target, dtype=bool))
    if len(pa) == 0 or len(ta) == 0:
        return 0.0
    d2 = ((pa[:, None, :] - ta[None, :, :]) ** 2).sum(-1)
    tol2 = tol_px * tol_px
    precision = float((d2.min(axis=1) <= tol2).mean())
    recall = float((d2.min(axis=0) <= tol2).mean())
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)
