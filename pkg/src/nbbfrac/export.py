"""Frame export: plain PBM (P1) rasters of the embedded view."""

from __future__ import annotations

import os

import numpy as np

from .core import FractalError
from .storage import Grid, to_embedded

RENDER_CAP = 8192


def pbm_bytes(raster: np.ndarray) -> bytes:
    """Encode a 2D 0/1 array (indexed ``[y, x]``) as P1 with one row per line."""
    h, w = raster.shape
    digits = np.where(raster != 0, ord("1"), ord("0")).astype(np.uint8)
    rows = np.hstack([digits, np.full((h, 1), ord("\n"), dtype=np.uint8)])
    return f"P1\n{w} {h}\n".encode("ascii") + rows.tobytes()


def export_frame(grid: Grid, path, fmt: str = "pbm", render_cap: int = RENDER_CAP) -> None:
    if fmt != "pbm":
        raise FractalError(f"unsupported frame format {fmt!r}")
    if grid.n > render_cap:
        raise FractalError(f"side {grid.n} exceeds the render cap {render_cap}")
    data = pbm_bytes(to_embedded(grid))
    with open(os.fspath(path), "wb") as fh:
        fh.write(data)


def read_pbm(path) -> np.ndarray:
    """Read a P1 file written by :func:`export_frame` (or any plain PBM)."""
    with open(os.fspath(path), "rb") as fh:
        tokens = []
        for line in fh.read().decode("ascii").splitlines():
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise FractalError(f"{path}: not a P1 bitmap")
    w, h = int(tokens[1]), int(tokens[2])
    bits = "".join(tokens[3:])
    if len(bits) != w * h:
        raise FractalError(f"{path}: expected {w * h} pixels, found {len(bits)}")
    return (np.frombuffer(bits.encode("ascii"), dtype=np.uint8) - ord("0")).reshape(h, w)
