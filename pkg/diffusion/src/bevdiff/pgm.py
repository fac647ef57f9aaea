"""Minimal P5 PGM reader/writer plus the `.grid` geometry sidecar.

This mirrors the enhancer file protocol: binary P5, maxval 255, sidecar
text with x_min/x_max/y_min/y_max/resolution. Deliberately self-contained;
the file format is the entire contract with the geometry pipeline.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np


class PgmFormatError(ValueError):
    pass


def read_pgm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    pos = 0

    def token() -> str:
        nonlocal pos
        while pos < len(data):
            if data[pos:pos + 1] == b"#":
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
            raise PgmFormatError(f"{path}: truncated header at byte {start}")
        return data[start:pos].decode("ascii", errors="replace")

    if token() != "P5":
        raise PgmFormatError(f"{path}: not a binary P5 PGM")
    width, height, maxval = int(token()), int(token()), int(token())
    if maxval != 255:
        raise PgmFormatError(f"{path}: need maxval 255, got {maxval}")
    pos += 1  # single whitespace after maxval
    payload = data[pos:pos + width * height]
    if len(payload) != width * height:
        raise PgmFormatError(f"{path}: payload truncated "
                             f"({len(payload)}/{width * height} bytes)")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width)


def write_pgm(img: np.ndarray, path: str | Path) -> None:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    header = f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.tobytes())


def write_grid_sidecar(path: str | Path, x_min: float, x_max: float,
                       y_min: float, y_max: float, resolution: float) -> None:
    Path(path).with_suffix(".grid").write_text(
        f"x_min={x_min!r}\nx_max={x_max!r}\ny_min={y_min!r}\n"
        f"y_max={y_max!r}\nresolution={resolution!r}\n", encoding="utf-8")


def copy_grid_sidecar(src_pgm: str | Path, dst_pgm: str | Path) -> None:
    src = Path(src_pgm).with_suffix(".grid")
    if src.exists():
        Path(dst_pgm).with_suffix(".grid").write_bytes(src.read_bytes())
