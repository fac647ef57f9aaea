"""Bit-exact BEV rasterization and the PGM interchange format.

The grid covers [x_min, x_max) x [y_min, y_max) with half-open intervals
and floor indexing; row 0 holds the minimum y. Files are binary P5 PGM
(maxval 255) with a `<name>.grid` text sidecar carrying the geometry, so
any external enhancer can consume and produce grids without linking
against this package.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import PointCloud

# 100 m / 512 px = 0.1953125 m; the rounded 0.195 sometimes quoted is a
# display value, the exact ratio is used everywhere


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -50.0
    x_max: float = 50.0
    y_min: float = -50.0
    y_max: float = 50.0
    width: int = 512
    height: int = 512

    def __post_init__(self) -> None:
        for name in ("x_min", "x_max", "y_min", "y_max"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("width", "height"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ValueError("grid extents must be increasing")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("grid dimensions must be positive")
        rx = (self.x_max - self.x_min) / self.width
        ry = (self.y_max - self.y_min) / self.height
        if abs(rx - ry) > 1e-12 * max(rx, ry):
            raise ValueError(f"pixels must be square: x res {rx} != y res {ry}")

    @property
    def resolution(self) -> float:
        return (self.x_max - self.x_min) / self.width


DEFAULT_GRID = GridSpec()


@dataclass(frozen=True)
class BEVGrid:
    spec: GridSpec
    intensity: np.ndarray  # (height, width) uint8, row 0 = minimum y

    def __post_init__(self) -> None:
        a = np.asarray(self.intensity, dtype=np.uint8)
        if a.shape != (self.spec.height, self.spec.width):
            raise ValueError(f"intensity shape {a.shape} does not match spec "
                             f"({self.spec.height}, {self.spec.width})")
        a = np.ascontiguousarray(a)
        a.flags.writeable = False
        object.__setattr__(self, "intensity", a)

    @staticmethod
    def zeros(spec: GridSpec) -> "BEVGrid":
        return BEVGrid(spec, np.zeros((spec.height, spec.width), dtype=np.uint8))


def rasterize_counted(cloud: PointCloud, spec: GridSpec = DEFAULT_GRID) -> tuple[BEVGrid, int]:
    """Binary occupancy raster plus the number of out-of-range points that
    were skipped."""
    res = spec.resolution
    col = np.floor((cloud.xyz[:, 0] - spec.x_min) / res).astype(np.int64)
    row = np.floor((cloud.xyz[:, 1] - spec.y_min) / res).astype(np.int64)
    ok = (col >= 0) & (col < spec.width) & (row >= 0) & (row < spec.height)
    img = np.zeros((spec.height, spec.width), dtype=np.uint8)
    img[row[ok], col[ok]] = 255
    return BEVGrid(spec, img), int((~ok).sum())


def rasterize(cloud: PointCloud, spec: GridSpec = DEFAULT_GRID) -> BEVGrid:
    return rasterize_counted(cloud, spec)[0]


def threshold(grid: BEVGrid, tau_int: int) -> BEVGrid:
    """Binarize: 255 where intensity >= tau_int (inclusive), else 0."""
    return BEVGrid(grid.spec,
                   np.where(grid.intensity >= tau_int, 255, 0).astype(np.uint8))


def derasterize(grid: BEVGrid, tau_int: int) -> np.ndarray:
    """(n, 3) array of (x, y, confidence): one row per pixel with intensity
    >= tau_int, at the pixel center, confidence = intensity / 255. Rows come
    out in raster order (row-major), which is the canonical ordering."""
    rows, cols = np.nonzero(grid.intensity >= tau_int)
    res = grid.spec.resolution
    x = grid.spec.x_min + (cols + 0.5) * res
    y = grid.spec.y_min + (rows + 0.5) * res
    conf = grid.intensity[rows, cols].astype(np.float64) / 255.0
    return np.column_stack([x, y, conf])


class PgmError(ValueError):
    pass


def _sidecar(path: str | Path) -> Path:
    return Path(path).with_suffix(".grid")


def write_pgm(grid: BEVGrid, path: str | Path) -> None:
    """Binary P5 PGM plus the `<name>.grid` geometry sidecar. Write->read
    round-trips byte-identically."""
    path = Path(path)
    header = f"P5\n{grid.spec.width} {grid.spec.height}\n255\n".encode("ascii")
    path.write_bytes(header + grid.intensity.tobytes())
    s = grid.spec
    _sidecar(path).write_text(
        f"x_min={s.x_min!r}\nx_max={s.x_max!r}\ny_min={s.y_min!r}\n"
        f"y_max={s.y_max!r}\nresolution={s.resolution!r}\n", encoding="utf-8")


def _read_sidecar(path: Path, width: int, height: int) -> GridSpec:
    fields: dict[str, float] = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition("=")
        fields[key.strip()] = float(val)
    try:
        spec = GridSpec(fields["x_min"], fields["x_max"], fields["y_min"],
                        fields["y_max"], width, height)
    except KeyError as e:
        raise PgmError(f"{path}: sidecar missing field {e}") from None
    if abs(spec.resolution - fields.get("resolution", spec.resolution)) > 1e-9:
        raise PgmError(f"{path}: sidecar resolution {fields['resolution']} does not "
                       f"match extent/size ({spec.resolution})")
    return spec


def read_pgm(path: str | Path, spec: GridSpec | None = None) -> BEVGrid:
    """Parse a P5 PGM. Grid geometry comes from the sidecar when present,
    else from `spec`; dimensions must agree. Malformed input raises
    PgmError with the offending byte offset."""
    path = Path(path)
    data = path.read_bytes()
    pos = 0

    def token() -> str:
        nonlocal pos
        while pos < len(data):
            if data[pos:pos + 1] == b"#":  # comment to end of line
                while pos < len(data) and data[pos] not in b"\r\n":
                    pos += 1
            elif data[pos] in b" \t\r\n":
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and data[pos] not in b" \t\r\n":
            pos += 1
        if start == pos:
            raise PgmError(f"{path}: truncated header at byte {start}")
        return data[start:pos].decode("ascii", errors="replace")

    magic = token()
    if magic != "P5":
        raise PgmError(f"{path}: expected P5 magic at byte 0, got {magic!r}")
    try:
        width, height, maxval = int(token()), int(token()), int(token())
    except ValueError as e:
        raise PgmError(f"{path}: bad header near byte {pos}: {e}") from None
    if maxval != 255:
        raise PgmError(f"{path}: unsupported maxval {maxval} (need 255) at byte {pos}")
    if pos >= len(data) or data[pos] not in b" \t\r\n":
        raise PgmError(f"{path}: missing whitespace after maxval at byte {pos}")
    pos += 1
    payload = data[pos:pos + width * height]
    if len(payload) != width * height:
        raise PgmError(f"{path}: payload truncated at byte {pos + len(payload)} "
                       f"(need {width * height} bytes, have {len(payload)})")

    sidecar = _sidecar(path)
    if sidecar.exists():
        gspec = _read_sidecar(sidecar, width, height)
    elif spec is not None:
        gspec = spec
    else:
        raise PgmError(f"{path}: no sidecar {sidecar.name} and no GridSpec given")
    if (gspec.width, gspec.height) != (width, height):
        raise PgmError(f"{path}: dimensions {width}x{height} do not match "
                       f"declared spec {gspec.width}x{gspec.height}")
    img = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return BEVGrid(gspec, img)
