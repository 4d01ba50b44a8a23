"""Game-of-Life style stencils on NBB fractals.

Three backends compute the same thing:

``bb``
    scans the whole ``n x n`` bounding box, reading embedded adjacency.
``lambda``
    walks only the ``k**r`` fractal cells (via the compact-to-embedded map)
    but keeps the state in embedded storage.
``compact``
    keeps the state in compact storage (linear, or blocked with ``rho``)
    and finds each neighbor by mapping to embedded space, shifting, and
    mapping back.

Each step splits its iteration domain into disjoint chunks; workers read
the front buffer and write disjoint slots of the back buffer, so the result
does not depend on the number of workers.
"""

from __future__ import annotations

import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import maps
from .core import FractalDescriptor, FractalError, block_exponent, contains, fractal_mask, side
from .storage import (
    ALIVE,
    DEFAULT_MEMORY_CAP,
    Grid,
    Layout,
    create_grid,
    mini_mask,
    slot_coords,
    storage_index_array,
)

VON_NEUMANN = ((1, 0), (-1, 0), (0, 1), (0, -1))
MOORE = VON_NEUMANN + ((1, 1), (-1, 1), (1, -1), (-1, -1))
NEIGHBORHOODS = {"moore": MOORE, "von-neumann": VON_NEUMANN}
BACKENDS = ("bb", "lambda", "compact")

CHUNK = 1 << 18

_MASK64 = (1 << 64) - 1


def neighbor_offsets(neighborhood: str = "moore") -> tuple[tuple[int, int], ...]:
    try:
        return NEIGHBORHOODS[neighborhood]
    except KeyError:
        raise FractalError(f"unknown neighborhood {neighborhood!r}") from None


@dataclass(frozen=True)
class StencilRule:
    birth: frozenset = frozenset({3})
    survive: frozenset = frozenset({2, 3})
    neighborhood: str = "moore"

    def __post_init__(self):
        object.__setattr__(self, "birth", frozenset(self.birth))
        object.__setattr__(self, "survive", frozenset(self.survive))
        neighbor_offsets(self.neighborhood)
        for c in self.birth | self.survive:
            if not 0 <= c <= 8:
                raise FractalError(f"neighbor count {c} outside [0, 8]")

    @classmethod
    def parse(cls, text: str, neighborhood: str = "moore") -> "StencilRule":
        m = re.fullmatch(r"\s*B(\d*)/S(\d*)\s*", text, flags=re.IGNORECASE)
        if not m:
            raise FractalError(f"rule {text!r} is not of the form B<digits>/S<digits>")
        return cls(
            frozenset(int(c) for c in m.group(1)),
            frozenset(int(c) for c in m.group(2)),
            neighborhood,
        )

    def __str__(self):
        b = "".join(str(c) for c in sorted(self.birth))
        s = "".join(str(c) for c in sorted(self.survive))
        return f"B{b}/S{s}"

    def table(self) -> np.ndarray:
        """Next state indexed by ``[current, count]``."""
        t = np.zeros((2, 9), dtype=np.uint8)
        t[0, sorted(self.birth)] = ALIVE
        t[1, sorted(self.survive)] = ALIVE
        return t


CONWAY = StencilRule()


def backend_layout(backend: str, block_size: int | None = None) -> Layout:
    if backend not in BACKENDS:
        raise FractalError(f"unknown backend {backend!r}; choose from {', '.join(BACKENDS)}")
    if backend == "compact":
        return Layout("blocked", block_size) if block_size else Layout("linear")
    if block_size:
        raise FractalError(f"block size applies only to the compact backend")
    return Layout("embedded")


def resolve_neighbor(desc: FractalDescriptor, r: int, cx: int, cy: int, offset):
    """Compact coordinate of the neighbor at ``offset``, or None if it is not a fractal cell."""
    x, y = maps.lam(desc, r, cx, cy)
    nx, ny = x + offset[0], y + offset[1]
    n = side(desc, r)
    if not (0 <= nx < n and 0 <= ny < n) or not contains(desc, r, nx, ny):
        return None
    return maps.nu(desc, r, nx, ny)


def neighbor_table(desc: FractalDescriptor, r: int, offsets=MOORE, layout="linear") -> np.ndarray:
    """Precomputed slot index of every neighbor of every slot; -1 where absent."""
    grid = Grid(desc, r, Layout.parse(layout), np.empty(0, dtype=np.uint8))
    x, y, mask = slot_coords(grid)
    table = np.full((x.size, len(offsets)), -1, dtype=np.int64)
    for j, (dx, dy) in enumerate(offsets):
        idx, valid = storage_index_array(grid, x + dx, y + dy)
        table[:, j] = np.where(valid & mask, idx, -1)
    return table


# ---------------------------------------------------------------------------
# Backends.  Each exposes ``domain`` (number of work items) and
# ``run(front, back, lo, hi)`` which fills ``back`` for items [lo, hi).


class _BoundingBox:
    def __init__(self, desc, r, rule, offsets):
        self.n = side(desc, r)
        self.mask = fractal_mask(desc, r)
        self.offsets = offsets
        self.table = rule.table()
        self.domain = self.n  # rows

    def run(self, front, back, lo, hi):
        n = self.n
        cur = front.reshape(n, n)
        out = back.reshape(n, n)
        padded = np.zeros((hi - lo + 2, n + 2), dtype=np.uint8)
        a, b = max(lo - 1, 0), min(hi + 1, n)
        padded[a - lo + 1 : b - lo + 1, 1:-1] = cur[a:b]
        count = np.zeros((hi - lo, n), dtype=np.uint8)
        for dx, dy in self.offsets:
            count += padded[1 + dy : hi - lo + 1 + dy, 1 + dx : n + 1 + dx]
        nxt = self.table[cur[lo:hi], count]
        out[lo:hi] = np.where(self.mask[lo:hi], nxt, 0)


class _Lambda:
    def __init__(self, desc, r, rule, offsets):
        self.desc, self.r = desc, r
        self.n = side(desc, r)
        self.w, _ = maps.compact_dims(desc, r)
        self.offsets = offsets
        self.table = rule.table()
        self.domain = desc.k**r

    def run(self, front, back, lo, hi):
        n = self.n
        idx = np.arange(lo, hi, dtype=np.int64)
        x, y = maps.lam_array(self.desc, self.r, idx % self.w, idx // self.w)
        x = x.astype(np.int64)
        y = y.astype(np.int64)
        count = np.zeros(idx.size, dtype=np.uint8)
        for dx, dy in self.offsets:
            nx, ny = x + dx, y + dy
            ok = (nx >= 0) & (nx < n) & (ny >= 0) & (ny < n)
            count += np.where(ok, front[np.where(ok, ny * n + nx, 0)], 0).astype(np.uint8)
        here = y * n + x
        back[here] = self.table[front[here], count]


class _Compact:
    def __init__(self, desc, r, rule, offsets, layout, precompute=False):
        self.desc, self.r = desc, r
        self.offsets = offsets
        self.table = rule.table()
        self.layout = layout
        self.grid = Grid(desc, r, layout, np.empty(0, dtype=np.uint8))
        if layout.kind == "linear":
            self.w, _ = maps.compact_dims(desc, r)
            self.domain = desc.k**r
        else:
            self.rho = layout.rho
            self.lvl = r - block_exponent(desc, self.rho)
            self.w, _ = maps.compact_dims(desc, self.lvl)
            self.local = np.flatnonzero(mini_mask(self.grid))
            self.domain = desc.k**self.lvl  # blocks
        self.neighbors = (
            neighbor_table(desc, r, offsets, layout) if precompute else None
        )

    def _slots(self, lo, hi):
        """Slot indices and embedded coordinates of the fractal cells in [lo, hi)."""
        if self.layout.kind == "linear":
            idx = np.arange(lo, hi, dtype=np.int64)
            x, y = maps.lam_array(self.desc, self.r, idx % self.w, idx // self.w)
            return idx, x.astype(np.int64), y.astype(np.int64)
        rho = self.rho
        blocks = np.arange(lo, hi, dtype=np.int64)
        bx, by = maps.lam_array(self.desc, self.lvl, blocks % self.w, blocks // self.w)
        ly, lx = np.divmod(self.local, rho)
        x = (bx.astype(np.int64)[:, None] * rho + lx[None, :]).ravel()
        y = (by.astype(np.int64)[:, None] * rho + ly[None, :]).ravel()
        idx = (blocks[:, None] * (rho * rho) + self.local[None, :]).ravel()
        return idx, x, y

    def run(self, front, back, lo, hi):
        if self.neighbors is not None:
            return self._run_table(front, back, lo, hi)
        idx, x, y = self._slots(lo, hi)
        count = np.zeros(idx.size, dtype=np.uint8)
        for dx, dy in self.offsets:
            nidx, valid = storage_index_array(self.grid, x + dx, y + dy)
            count += np.where(valid, front[nidx], 0).astype(np.uint8)
        back[idx] = self.table[front[idx], count]

    def _run_table(self, front, back, lo, hi):
        if self.layout.kind == "linear":
            idx = np.arange(lo, hi, dtype=np.int64)
        else:
            rho2 = self.rho * self.rho
            idx = (np.arange(lo, hi, dtype=np.int64)[:, None] * rho2 + self.local[None, :]).ravel()
        nb = self.neighbors[idx]
        vals = np.where(nb >= 0, front[np.maximum(nb, 0)], 0)
        count = vals.sum(axis=1, dtype=np.uint8)
        back[idx] = self.table[front[idx], count]


def make_backend(desc, r, backend, rule, block_size=None, offsets=None, precompute=False):
    layout = backend_layout(backend, block_size)
    offsets = tuple(offsets) if offsets is not None else neighbor_offsets(rule.neighborhood)
    if backend == "bb":
        return _BoundingBox(desc, r, rule, offsets)
    if backend == "lambda":
        return _Lambda(desc, r, rule, offsets)
    return _Compact(desc, r, rule, offsets, layout, precompute)


# ---------------------------------------------------------------------------
# Simulation state.


def splitmix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer on ``uint64`` arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64) + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _cell_keys(x, y) -> np.ndarray:
    x = np.asarray(x).astype(np.uint64)
    y = np.asarray(y).astype(np.uint64)
    return (y << np.uint64(32)) | x


def cell_uniforms(seed: int, x, y) -> np.ndarray:
    """Uniform [0, 1) draw per embedded cell, keyed by ``(seed, x, y)``."""
    s = splitmix64(np.array([seed & _MASK64], dtype=np.uint64))[0]
    z = splitmix64(_cell_keys(x, y) ^ s)
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass
class SimState:
    front: Grid
    back: Grid
    backend: str
    iteration: int = 0

    @property
    def desc(self):
        return self.front.desc

    @property
    def r(self):
        return self.front.r

    def swap(self):
        self.front, self.back = self.back, self.front


def init_state(
    desc: FractalDescriptor,
    r: int,
    backend: str = "compact",
    seed: int = 0,
    density: float = 0.5,
    block_size: int | None = None,
    mem_cap: int | None = DEFAULT_MEMORY_CAP,
) -> SimState:
    """Seeded random fill; identical pattern for every backend and layout."""
    if not 0.0 <= density <= 1.0:
        raise FractalError(f"density must lie in [0, 1], got {density}")
    layout = backend_layout(backend, block_size)
    front = create_grid(desc, r, layout, mem_cap)
    back = create_grid(desc, r, layout, mem_cap)
    size = front.buffer.size
    for lo in range(0, size, 1 << 22):
        hi = min(lo + (1 << 22), size)
        x, y, mask = _slot_range(front, lo, hi)
        alive = mask & (cell_uniforms(seed, x, y) < density)
        front.buffer[lo:hi] = alive
    return SimState(front, back, backend)


def _slot_range(grid: Grid, lo: int, hi: int):
    """Embedded coordinates and fractal mask for slots [lo, hi)."""
    idx = np.arange(lo, hi, dtype=np.int64)
    kind = grid.layout.kind
    if kind == "embedded":
        y, x = np.divmod(idx, grid.n)
        return x, y, fractal_mask(grid.desc, grid.r).ravel()[lo:hi]
    if kind == "linear":
        w, _ = maps.compact_dims(grid.desc, grid.r)
        x, y = maps.lam_array(grid.desc, grid.r, idx % w, idx // w)
        return x, y, np.ones(idx.size, dtype=bool)
    rho = grid.layout.rho
    block, local = np.divmod(idx, rho * rho)
    w, _ = maps.compact_dims(grid.desc, grid.block_level)
    bx, by = maps.lam_array(grid.desc, grid.block_level, block % w, block // w)
    ly, lx = np.divmod(local, rho)
    return bx * rho + lx, by * rho + ly, mini_mask(grid)[local]


def state_hash(grid: Grid) -> int:
    """Order-independent 64-bit hash of the alive cells, by embedded coordinate."""
    total = 0
    count = 0
    size = grid.buffer.size
    for lo in range(0, size, 1 << 22):
        hi = min(lo + (1 << 22), size)
        alive = grid.buffer[lo:hi] != 0
        if not alive.any():
            continue
        x, y, _ = _slot_range(grid, lo, hi)
        h = splitmix64(_cell_keys(x[alive], y[alive]) ^ np.uint64(0x5851F42D4C957F2D))
        total = (total + int(np.add.reduce(h, dtype=np.uint64))) & _MASK64
        count += int(alive.sum())
    z = splitmix64(np.array([total ^ count], dtype=np.uint64))[0]
    return int(z)


def max_workers() -> int:
    return os.cpu_count() or 1


class Engine:
    """Steps a :class:`SimState` with a fixed backend and rule."""

    def __init__(
        self,
        desc: FractalDescriptor,
        r: int,
        backend: str,
        rule: StencilRule = CONWAY,
        block_size: int | None = None,
        workers: int = 1,
        chunk: int | None = None,
        offsets: Sequence[tuple[int, int]] | None = None,
        precompute: bool = False,
    ):
        self.impl = make_backend(desc, r, backend, rule, block_size, offsets, precompute)
        self.workers = max(1, workers)
        if chunk is None:
            # Work items are rows or blocks for some backends; keep chunks near CHUNK cells.
            per_item = {
                _BoundingBox: side(desc, r),
                _Compact: block_size * block_size if block_size else 1,
            }.get(type(self.impl), 1)
            chunk = max(1, CHUNK // per_item)
        self.chunk = chunk
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def step(self, state: SimState) -> SimState:
        front, back = state.front.buffer, state.back.buffer
        ranges = [
            (lo, min(lo + self.chunk, self.impl.domain))
            for lo in range(0, self.impl.domain, self.chunk)
        ]
        if self._pool is None:
            for lo, hi in ranges:
                self.impl.run(front, back, lo, hi)
        else:
            # list() re-raises worker exceptions and acts as the barrier.
            list(self._pool.map(lambda b: self.impl.run(front, back, *b), ranges))
        state.swap()
        state.iteration += 1
        return state


def step(state: SimState, rule: StencilRule = CONWAY, workers: int = 1) -> SimState:
    """Advance one iteration (convenience wrapper around :class:`Engine`)."""
    rho = state.front.layout.rho
    with Engine(state.desc, state.r, state.backend, rule, rho, workers) as eng:
        return eng.step(state)


@dataclass
class SimResult:
    state: SimState
    hash: int
    step_seconds: list[float] = field(default_factory=list)


def run_simulation(
    desc: FractalDescriptor,
    r: int,
    backend: str,
    rule: StencilRule = CONWAY,
    steps: int = 0,
    seed: int = 0,
    density: float = 0.5,
    block_size: int | None = None,
    workers: int = 1,
    mem_cap: int | None = DEFAULT_MEMORY_CAP,
    precompute: bool = False,
    on_step: Callable[[SimState], None] | None = None,
    chunk: int | None = None,
) -> SimResult:
    if steps < 0:
        raise FractalError("steps must be >= 0")
    state = init_state(desc, r, backend, seed, density, block_size, mem_cap)
    times = []
    with Engine(desc, r, backend, rule, block_size, workers, chunk, precompute=precompute) as eng:
        for _ in range(steps):
            t0 = time.perf_counter()
            eng.step(state)
            times.append(time.perf_counter() - t0)
            if on_step is not None:
                on_step(state)
    return SimResult(state, state_hash(state.front), times)
