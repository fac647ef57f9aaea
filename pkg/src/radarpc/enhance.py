"""Enhancer contract (condition BEV in, enhanced BEV out), the reference
enhancers, attribute lifting, and hyper point cloud assembly.

External enhancers are separate processes invoked as
`<cmd> <condition.pgm> <out.pgm>`; they must write a P5 PGM with identical
dimensions and exit 0. The file protocol is the whole interface, which
keeps any learned enhancer fully decoupled from this package.
"""
from __future__ import annotations

import shlex
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .bev import BEVGrid, GridSpec, derasterize, read_pgm, write_pgm
from .core import LIFTED_SENSOR_ID, PointCloud

ENHANCER_KINDS = ("passthrough", "oracle", "external")


class EnhancerError(RuntimeError):
    pass


@dataclass(frozen=True)
class EnhancerSpec:
    kind: str = "passthrough"
    external_cmd: str = ""

    def __post_init__(self) -> None:
        if self.kind not in ENHANCER_KINDS:
            raise ValueError(f"enhancer kind must be one of {ENHANCER_KINDS}")
        if self.kind == "external" and not self.external_cmd.strip():
            raise ValueError("external enhancer needs a nonempty command")


def run_external_enhancer(cmd: str, condition: BEVGrid,
                          workdir: str | Path | None = None,
                          timeout: float = 600.0) -> BEVGrid:
    """Run one enhancer invocation through the file protocol and validate
    the result. Failures raise EnhancerError carrying the captured output."""
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        cond_path = Path(tmp) / "condition.pgm"
        out_path = Path(tmp) / "enhanced.pgm"
        write_pgm(condition, cond_path)
        argv = shlex.split(cmd) + [str(cond_path), str(out_path)]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True,
                                  timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as e:
            raise EnhancerError(f"enhancer {cmd!r} failed to run: {e}") from e
        if proc.returncode != 0:
            raise EnhancerError(
                f"enhancer {cmd!r} exited {proc.returncode}\n"
                f"stdout: {proc.stdout[-2000:]}\nstderr: {proc.stderr[-2000:]}")
        if not out_path.exists():
            raise EnhancerError(f"enhancer {cmd!r} exited 0 but wrote no output\n"
                                f"stderr: {proc.stderr[-2000:]}")
        try:
            out = read_pgm(out_path, spec=condition.spec)
        except ValueError as e:
            raise EnhancerError(f"enhancer {cmd!r} wrote a malformed grid: {e}") from e
    if out.intensity.shape != condition.intensity.shape:
        raise EnhancerError(f"enhancer {cmd!r} changed grid dimensions")
    return out


def enhance(condition: BEVGrid, spec: EnhancerSpec,
            oracle_target: BEVGrid | None = None,
            workdir: str | Path | None = None) -> BEVGrid:
    """Dispatch one frame through the configured enhancer.

    passthrough echoes the condition; oracle returns the rasterized
    supervision target (test mode only, needs ground truth); external runs
    the file-protocol command.
    """
    if spec.kind == "passthrough":
        return condition
    if spec.kind == "oracle":
        if oracle_target is None:
            raise EnhancerError("oracle enhancer needs the target grid for the frame")
        if oracle_target.intensity.shape != condition.intensity.shape:
            raise EnhancerError("oracle target dimensions do not match the condition")
        return oracle_target
    return run_external_enhancer(spec.external_cmd, condition, workdir=workdir)


def check_enhancer_contract(cmd: str, spec: GridSpec | None = None,
                            seed: int = 0) -> BEVGrid:
    """Protocol conformance probe: feed a random sparse condition through
    `cmd` and validate the returned grid. Returns the output for further
    inspection. Used by this package's tests and by external enhancer test
    suites."""
    gspec = spec if spec is not None else GridSpec(-50.0, 50.0, -50.0, 50.0, 64, 64)
    rng = np.random.default_rng(seed)
    img = np.zeros((gspec.height, gspec.width), dtype=np.uint8)
    occ = rng.random((gspec.height, gspec.width)) < 0.05
    img[occ] = 255
    return run_external_enhancer(cmd, BEVGrid(gspec, img))


@dataclass(frozen=True)
class HyperCloud:
    """Enhanced 4D cloud: radar attributes plus a per-point confidence and
    the index of the validated point each attribute set was lifted from
    (-1 for raw points unioned in)."""

    cloud: PointCloud
    confidence: np.ndarray    # (n,) in [0, 1]
    source_index: np.ndarray  # (n,) int64

    def __post_init__(self) -> None:
        conf = np.ascontiguousarray(np.asarray(self.confidence, dtype=np.float64))
        src = np.ascontiguousarray(np.asarray(self.source_index, dtype=np.int64))
        if conf.shape[0] != len(self.cloud) or src.shape[0] != len(self.cloud):
            raise ValueError("confidence/source_index must align with the cloud")
        conf.flags.writeable = False
        src.flags.writeable = False
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "source_index", src)

    def __len__(self) -> int:
        return len(self.cloud)

    @staticmethod
    def empty(frame_id: str) -> "HyperCloud":
        return HyperCloud(PointCloud.empty(frame_id), np.zeros(0), np.zeros(0, np.int64))


def lift_attributes(fg_points: np.ndarray, validated: PointCloud) -> HyperCloud:
    """Give each generated (x, y, confidence) row the z/RCS/Doppler of its
    nearest validated radar point by 2D distance (ties: lowest index).

    2D is the only well-defined metric here: generated points have no z
    until the lift happens.
    """
    fg = np.asarray(fg_points, dtype=np.float64).reshape(-1, 3)
    if len(validated) == 0:
        raise ValueError("attribute lifting needs a nonempty validated cloud")
    if fg.shape[0] == 0:
        return HyperCloud.empty(validated.frame_id)
    idx, _ = kernels.nearest_neighbor(fg[:, :2], validated.xyz[:, :2])
    xyz = np.column_stack([fg[:, 0], fg[:, 1], validated.xyz[idx, 2]])
    n = fg.shape[0]
    cloud = PointCloud(xyz, validated.rcs[idx], validated.doppler[idx],
                       np.full(n, LIFTED_SENSOR_ID, np.int64),
                       validated.t[idx], validated.frame_id)
    return HyperCloud(cloud, fg[:, 2], idx)


def assemble_hyper_cloud(enhanced: BEVGrid, validated: PointCloud,
                         tau_int: int, union_raw: bool = False) -> HyperCloud:
    """Derasterize the enhanced BEV at tau_int, then lift attributes.

    By default the hyper cloud holds only lifted points; union_raw appends
    the raw validated points (confidence 1.0) for ablation runs.
    """
    fg = derasterize(enhanced, tau_int)
    if fg.shape[0] == 0:
        hyper = HyperCloud.empty(validated.frame_id)
    else:
        hyper = lift_attributes(fg, validated)
    if not union_raw:
        return hyper
    n = len(validated)
    raw = HyperCloud(validated, np.ones(n), np.full(n, -1, np.int64))
    return HyperCloud(PointCloud.concat([hyper.cloud, validated]) if len(hyper)
                      else validated,
                      np.concatenate([hyper.confidence, raw.confidence]),
                      np.concatenate([hyper.source_index, raw.source_index]))
