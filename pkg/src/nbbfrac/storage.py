"""Cell-state containers for the embedded, linear-compact and blocked layouts.

Every layout is addressed with embedded coordinates; :func:`storage_index`
translates them to a slot in a flat ``uint8`` buffer (one byte per cell).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import maps
from .core import (
    CoordinateRangeError,
    FractalDescriptor,
    FractalError,
    NotInFractalError,
    block_exponent,
    contains,
    fractal_mask,
    side,
    stored_cells,
)

DEFAULT_MEMORY_CAP = 2 * 1024**3
LAYOUTS = ("embedded", "linear", "blocked")

DEAD = 0
ALIVE = 1


class MemoryCapError(FractalError, MemoryError):
    def __init__(self, needed: int, cap: int):
        super().__init__(
            f"layout needs {needed} bytes, above the memory cap of {cap} bytes"
        )
        self.needed = needed
        self.cap = cap


@dataclass(frozen=True)
class Layout:
    kind: str
    rho: int | None = None

    def __post_init__(self):
        if self.kind not in LAYOUTS:
            raise FractalError(f"unknown layout {self.kind!r}")
        if (self.kind == "blocked") != (self.rho is not None):
            raise FractalError("a block size is given exactly for the blocked layout")

    @classmethod
    def parse(cls, value) -> "Layout":
        if isinstance(value, Layout):
            return value
        if isinstance(value, tuple):
            return cls(*value)
        return cls(value)

    def __str__(self):
        return f"blocked({self.rho})" if self.rho else self.kind


def footprint(desc: FractalDescriptor, r: int, layout) -> int:
    layout = Layout.parse(layout)
    return stored_cells(desc, r, layout.kind, layout.rho)


@dataclass(eq=False)
class Grid:
    desc: FractalDescriptor
    r: int
    layout: Layout
    buffer: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.desc.s**self.r

    @property
    def dims(self) -> tuple[int, ...]:
        """Logical shape of the stored buffer."""
        if self.layout.kind == "embedded":
            return (self.n, self.n)
        if self.layout.kind == "linear":
            w, h = maps.compact_dims(self.desc, self.r)
            return (h, w)
        rho = self.layout.rho
        return (self.num_blocks, rho, rho)

    @property
    def block_level(self) -> int:
        """Level of the coarse fractal whose cells are the blocks."""
        return self.r - block_exponent(self.desc, self.layout.rho)

    @property
    def num_blocks(self) -> int:
        return self.desc.k**self.block_level

    def copy(self) -> "Grid":
        return Grid(self.desc, self.r, self.layout, self.buffer.copy())

    def empty_like(self) -> "Grid":
        return Grid(self.desc, self.r, self.layout, np.zeros_like(self.buffer))


def create_grid(
    desc: FractalDescriptor, r: int, layout="linear", mem_cap: int | None = DEFAULT_MEMORY_CAP
) -> Grid:
    """Allocate an all-dead grid.  ``mem_cap`` of ``None`` disables the cap."""
    layout = Layout.parse(layout)
    if layout.kind == "blocked":
        m = block_exponent(desc, layout.rho)
        if m > r:
            raise FractalError(f"block size {layout.rho} exceeds the side s^{r}")
    cells = footprint(desc, r, layout)
    if mem_cap is not None and cells > mem_cap:
        raise MemoryCapError(cells, mem_cap)
    return Grid(desc, r, layout, np.zeros(cells, dtype=np.uint8))


def memory_footprint(grid: Grid) -> tuple[int, int]:
    """Stored cell count and bytes (one byte per cell)."""
    cells = int(grid.buffer.size)
    return cells, cells * grid.buffer.itemsize


def storage_index(grid: Grid, x: int, y: int) -> int:
    n = grid.n
    if not (0 <= x < n and 0 <= y < n):
        raise CoordinateRangeError(f"({x}, {y}) outside [0, {n})^2")
    kind = grid.layout.kind
    if kind == "embedded":
        return y * n + x
    if kind == "linear":
        if not contains(grid.desc, grid.r, x, y):
            raise NotInFractalError(f"({x}, {y}) is a hole; no compact slot")
        cx, cy = maps.nu(grid.desc, grid.r, x, y)
        w, _ = maps.compact_dims(grid.desc, grid.r)
        return cy * w + cx
    rho = grid.layout.rho
    lvl = grid.block_level
    bx, by = x // rho, y // rho
    if not contains(grid.desc, lvl, bx, by):
        raise NotInFractalError(f"coarse cell ({bx}, {by}) of ({x}, {y}) is a hole")
    cx, cy = maps.nu(grid.desc, lvl, bx, by)
    w, _ = maps.compact_dims(grid.desc, lvl)
    return (cy * w + cx) * rho * rho + (y % rho) * rho + (x % rho)


def storage_index_array(grid: Grid, x, y):
    """Vectorized :func:`storage_index`.

    Returns ``(index, valid)``; ``valid`` is False for coordinates outside
    the box or without a slot, and ``index`` is 0 there.  For the blocked
    layout, filler slots (in-block holes) are also reported invalid.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    kind = grid.layout.kind
    n = grid.n
    if kind == "embedded":
        valid = (x >= 0) & (x < n) & (y >= 0) & (y < n)
        idx = np.where(valid, y.astype(np.int64) * n + x, 0)
        return idx, valid
    if kind == "linear":
        cx, cy, valid = maps.nu_array(grid.desc, grid.r, x, y, strict=False)
        w, _ = maps.compact_dims(grid.desc, grid.r)
        return cy.astype(np.int64) * w + cx, valid
    rho = grid.layout.rho
    lvl = grid.block_level
    inside = (x >= 0) & (x < n) & (y >= 0) & (y < n)
    xs = np.where(inside, x, 0)
    ys = np.where(inside, y, 0)
    bx, lx = maps._divmod(xs, rho)
    by, ly = maps._divmod(ys, rho)
    cx, cy, valid = maps.nu_array(grid.desc, lvl, bx, by, strict=False)
    w, _ = maps.compact_dims(grid.desc, lvl)
    local = ly.astype(np.int64) * rho + lx
    valid &= inside & mini_mask(grid)[local]
    idx = (cy.astype(np.int64) * w + cx) * (rho * rho) + local
    return np.where(valid, idx, 0), valid


def mini_mask(grid: Grid) -> np.ndarray:
    """Flattened ``rho x rho`` occupancy of one block (row-major)."""
    return _mini_mask(grid.desc, grid.layout.rho)


@functools.lru_cache(maxsize=32)
def _mini_mask(desc, rho):
    mask = fractal_mask(desc, block_exponent(desc, rho)).ravel()
    mask.flags.writeable = False
    return mask


def get_cell(grid: Grid, x: int, y: int) -> int:
    return int(grid.buffer[storage_index(grid, x, y)])


def set_cell(grid: Grid, x: int, y: int, state: int) -> None:
    grid.buffer[storage_index(grid, x, y)] = state


def slot_coords(grid: Grid):
    """Embedded ``(x, y)`` of every storage slot plus a fractal-cell mask.

    Slot ``i`` of the buffer corresponds to entry ``i`` of the arrays.
    """
    kind = grid.layout.kind
    if kind == "embedded":
        n = grid.n
        idx = np.arange(n * n, dtype=np.int64)
        y, x = np.divmod(idx, n)
        return x, y, fractal_mask(grid.desc, grid.r).ravel()
    if kind == "linear":
        x, y = maps.compact_all(grid.desc, grid.r)
        return x, y, np.ones(x.shape, dtype=bool)
    rho = grid.layout.rho
    bx, by = maps.compact_all(grid.desc, grid.block_level)
    local = np.arange(rho * rho)
    ly, lx = np.divmod(local, rho)
    x = (bx.astype(np.int64)[:, None] * rho + lx[None, :]).ravel()
    y = (by.astype(np.int64)[:, None] * rho + ly[None, :]).ravel()
    mask = np.tile(mini_mask(grid), bx.size)
    return x, y, mask


def to_embedded(grid: Grid, mem_cap: int | None = DEFAULT_MEMORY_CAP) -> np.ndarray:
    """Render the state as an ``n x n`` array indexed ``[y, x]``."""
    n = grid.n
    if mem_cap is not None and n * n > mem_cap:
        raise MemoryCapError(n * n, mem_cap)
    if grid.layout.kind == "embedded":
        return grid.buffer.reshape(n, n).copy()
    out = np.zeros((n, n), dtype=np.uint8)
    x, y, mask = slot_coords(grid)
    out[y[mask], x[mask]] = grid.buffer[mask]
    return out


def non_fractal_slots(grid: Grid) -> np.ndarray:
    """Indices of slots that do not belong to any fractal cell."""
    _, _, mask = slot_coords(grid)
    return np.flatnonzero(~mask)
