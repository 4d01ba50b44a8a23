"""Embedded <-> compact coordinate maps.

The compact layout unfolds the fractal one level at a time: the level-``mu``
replicas are laid side by side along x when ``mu`` is even and along y when
it is odd, each with stride ``k**(mu // 2)``.  ``nu`` sends an embedded cell
to its compact slot and ``lam`` undoes it by reading the compact coordinates
as base-``k`` digits.

All arithmetic is exact integer arithmetic.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    CoordinateRangeError,
    FractalDescriptor,
    FractalError,
    NotInFractalError,
    cell_count,
    side,
)

FRAGMENT_SIDE = 16


def levels(r: int) -> range:
    """Level indices visited by one map evaluation.

    Every per-level loop in this module goes through here, so a test can
    count how many levels a single map call touches.
    """
    return range(r)


def replica_id(desc: FractalDescriptor, x: int, y: int, mu: int) -> int:
    """ID of the level-``mu`` replica containing ``(x, y)``.

    The ID is the index of the sub-box ``(x // s**mu % s, y // s**mu % s)``
    in ``desc.replicas``.
    """
    p = desc.s**mu
    pos = ((x // p) % desc.s, (y // p) % desc.s)
    i = desc.replica_index(*pos)
    if i is None:
        raise NotInFractalError(
            f"({x}, {y}) falls in empty sub-box {pos} at level index {mu}"
        )
    return i


def triangle_replica_id(x: int, y: int, mu: int) -> int:
    """Procedural replica ID for the built-in Sierpinski triangle.

    Agrees with :func:`replica_id` on every triangle cell.  Reading the
    y bit with weight 2 keeps the right (ID 1) and bottom (ID 2) replicas
    apart.
    """
    return ((x >> mu) & 1) + 2 * ((y >> mu) & 1)


def tau(desc: FractalDescriptor | int, mu: int) -> tuple[int, int]:
    """Compact-space stride ``(tau_x, tau_y)`` of the level-``mu`` replicas."""
    k = desc if isinstance(desc, (int, np.integer)) else desc.k
    if mu < 0:
        raise FractalError(f"level index must be >= 0, got {mu}")
    stride = k ** (mu // 2)
    return (stride, 0) if mu % 2 == 0 else (0, stride)


def compact_dims(desc: FractalDescriptor, r: int) -> tuple[int, int]:
    """Width and height of the compact rectangle at level ``r``."""
    side(desc, r)
    return desc.k ** ((r + 1) // 2), desc.k ** (r // 2)


def _check_embedded(desc, r, x, y):
    n = side(desc, r)
    if not (0 <= x < n and 0 <= y < n):
        raise CoordinateRangeError(f"embedded ({x}, {y}) outside [0, {n})^2")


def nu(
    desc: FractalDescriptor,
    r: int,
    x: int,
    y: int,
    h: Callable[[int, int, int], int] | None = None,
) -> tuple[int, int]:
    """Compact coordinate of the embedded fractal cell ``(x, y)``.

    ``h`` overrides the replica-ID function; it defaults to the descriptor
    lookup.
    """
    _check_embedded(desc, r, x, y)
    if h is None:
        h = lambda x_, y_, mu: replica_id(desc, x_, y_, mu)  # noqa: E731
    cx = cy = 0
    for mu in levels(r):
        tx, ty = tau(desc.k, mu)
        i = h(x, y, mu)
        cx += tx * i
        cy += ty * i
    return cx, cy


def lam(desc: FractalDescriptor, r: int, cx: int, cy: int) -> tuple[int, int]:
    """Embedded coordinate of the compact slot ``(cx, cy)``; inverse of :func:`nu`."""
    w, hgt = compact_dims(desc, r)
    if not (0 <= cx < w and 0 <= cy < hgt):
        raise CoordinateRangeError(f"compact ({cx}, {cy}) outside {w}x{hgt}")
    x = y = 0
    p = 1
    for mu in levels(r):
        if mu % 2 == 0:
            cx, d = divmod(cx, desc.k)
        else:
            cy, d = divmod(cy, desc.k)
        gx, gy = desc.replicas[d]
        x += gx * p
        y += gy * p
        p *= desc.s
    return x, y


# The unprefixed name mirrors the usual symbol; ``lambda`` itself is reserved.
lambda_map = lam


@dataclass(frozen=True)
class MapMatrices:
    """Square operands whose product holds the compact coordinate.

    ``a`` carries the strides (row 0 for x, row 1 for y) and ``b`` carries
    the replica IDs in column 0.  Everything else is zero padding.
    """

    a: np.ndarray
    b: np.ndarray
    r: int

    @property
    def side(self) -> int:
        return self.a.shape[0]


def fragment_side(r: int) -> int:
    return max(FRAGMENT_SIDE, r)


def build_map_matrices(desc: FractalDescriptor, r: int, x: int, y: int) -> MapMatrices:
    _check_embedded(desc, r, x, y)
    cell_count(desc, r)  # int64 range guard
    size = fragment_side(r)
    a = np.zeros((size, size), dtype=np.int64)
    b = np.zeros((size, size), dtype=np.int64)
    for mu in levels(r):
        a[0, mu], a[1, mu] = tau(desc.k, mu)
        b[mu, 0] = replica_id(desc, x, y, mu)
    return MapMatrices(a, b, r)


def mma(a: np.ndarray, b: np.ndarray, c: np.ndarray | None = None) -> np.ndarray:
    """``a @ b + c`` on integer fragments.

    This is the seam a hardware backend would replace.
    """
    d = np.matmul(a, b)
    if c is not None:
        d += c
    return d


def nu_via_mma(
    desc: FractalDescriptor,
    r: int,
    x: int,
    y: int,
    kernel: Callable[..., np.ndarray] = mma,
) -> tuple[int, int]:
    mats = build_map_matrices(desc, r, x, y)
    acc = np.zeros_like(mats.a)
    d = kernel(mats.a, mats.b, acc)
    return int(d[0, 0]), int(d[1, 0])


# Vectorized forms used by the storage layouts and the stencil engine.
#
# The array maps consume several levels per table lookup.  A group of L
# levels (L even, starting at an even level) behaves like a level-L fractal
# scaled by s**start in embedded space and by k**(start/2) in compact space,
# so the group tables are just the level-L maps tabulated once.

TABLE_LIMIT = 1 << 16


def _index_dtype(limit: int):
    return np.int32 if limit < 2**31 else np.int64


def _divmod(a, m: int):
    if m & (m - 1) == 0:
        shift = m.bit_length() - 1
        return a >> shift, a & (m - 1)
    return np.divmod(a, m)


def group_levels(desc: FractalDescriptor) -> int:
    """Levels per lookup; 0 when even a pair of levels needs too big a table."""
    L = 0
    while desc.s ** (2 * (L + 2)) <= TABLE_LIMIT and desc.k ** (L + 2) <= TABLE_LIMIT:
        L += 2
    return L


@functools.lru_cache(maxsize=32)
def _nu_group_table(desc: FractalDescriptor, L: int):
    """Compact offsets of every local position of an L-level group, row-major.

    Holes hold -1 in the x table.
    """
    m = desc.s**L
    idx = np.arange(m * m, dtype=np.int64)
    ly, lx = np.divmod(idx, m)
    cx, cy, valid = _nu_levels(desc, L, lx, ly, 0, np.int64)
    tx = np.where(valid, cx, -1)
    return tx, cy


@functools.lru_cache(maxsize=32)
def _lam_group_table(desc: FractalDescriptor, L: int):
    """Embedded offsets of every digit pair of an L-level group, indexed ``dy * k**(L/2) + dx``."""
    half = desc.k ** (L // 2)
    idx = np.arange(half * half, dtype=np.int64)
    dy, dx = np.divmod(idx, half)
    return _lam_levels(desc, L, dx, dy, np.int64)


def _nu_levels(desc, r, xs, ys, start, dtype):
    """Per-level accumulation over levels [start, r).

    ``xs``/``ys`` are already divided by ``s**start``; strides are absolute.
    """
    table = desc.id_table.astype(dtype)
    s = desc.s
    cx = np.zeros(xs.shape, dtype=dtype)
    cy = np.zeros(xs.shape, dtype=dtype)
    valid = np.ones(xs.shape, dtype=bool)
    for mu in range(start, r):
        xs, dx = _divmod(xs, s)
        ys, dy = _divmod(ys, s)
        ids = table[dy * s + dx]
        valid &= ids >= 0
        tx, ty = tau(desc.k, mu)
        if tx:
            cx += ids * tx
        else:
            cy += ids * ty
    return cx, cy, valid


def _lam_levels(desc, r, cx, cy, dtype, start=0, scale=1):
    gx = np.array([p[0] for p in desc.replicas], dtype=dtype)
    gy = np.array([p[1] for p in desc.replicas], dtype=dtype)
    x = np.zeros(cx.shape, dtype=dtype)
    y = np.zeros(cx.shape, dtype=dtype)
    p = scale
    for mu in range(start, r):
        if mu % 2 == 0:
            cx, d = _divmod(cx, desc.k)
        else:
            cy, d = _divmod(cy, desc.k)
        x += gx[d] * p
        y += gy[d] * p
        p *= desc.s
    return x, y


def nu_array(desc: FractalDescriptor, r: int, x, y, strict: bool = True):
    """Vectorized :func:`nu`.

    With ``strict`` a non-fractal input raises; otherwise the call returns
    ``(cx, cy, valid)`` and invalid entries hold zeros.
    """
    n = side(desc, r)
    x = np.asarray(x)
    y = np.asarray(y)
    dtype = _index_dtype(max(n, cell_count(desc, r)))
    valid = (x >= 0) & (x < n) & (y >= 0) & (y < n)
    xs = np.where(valid, x, 0).astype(dtype)
    ys = np.where(valid, y, 0).astype(dtype)
    cx = np.zeros(xs.shape, dtype=dtype)
    cy = np.zeros(xs.shape, dtype=dtype)
    L = group_levels(desc)
    done = 0
    if L:
        tx, ty = (t.astype(dtype) for t in _nu_group_table(desc, L))
        m = desc.s**L
        scale = 1
        while done + L <= r:
            xs, lx = _divmod(xs, m)
            ys, ly = _divmod(ys, m)
            local = ly * m + lx
            ox = tx[local]
            valid &= ox >= 0
            cx += ox * scale
            cy += ty[local] * scale
            scale *= desc.k ** (L // 2)
            done += L
    if done < r:
        rx, ry, ok = _nu_levels(desc, r, xs, ys, done, dtype)
        cx += rx
        cy += ry
        valid &= ok
    if strict:
        if not valid.all():
            bad = tuple(np.argwhere(~valid)[0])
            raise NotInFractalError(f"({x[bad]}, {y[bad]}) is not a fractal cell")
        return cx, cy
    cx[~valid] = 0
    cy[~valid] = 0
    return cx, cy, valid


def lam_array(desc: FractalDescriptor, r: int, cx, cy):
    """Vectorized :func:`lam`."""
    w, h = compact_dims(desc, r)
    n = side(desc, r)
    cx = np.asarray(cx)
    cy = np.asarray(cy)
    if cx.size and (cx.min() < 0 or cx.max() >= w or cy.min() < 0 or cy.max() >= h):
        raise CoordinateRangeError(f"compact coordinates outside {w}x{h}")
    dtype = _index_dtype(max(n, w * h))
    cx = cx.astype(dtype)
    cy = cy.astype(dtype)
    x = np.zeros(cx.shape, dtype=dtype)
    y = np.zeros(cx.shape, dtype=dtype)
    L = group_levels(desc)
    done = 0
    scale = 1
    if L:
        ex, ey = (t.astype(dtype) for t in _lam_group_table(desc, L))
        half = desc.k ** (L // 2)
        while done + L <= r:
            cx, dx = _divmod(cx, half)
            cy, dy = _divmod(cy, half)
            digits = dy * half + dx
            x += ex[digits] * scale
            y += ey[digits] * scale
            scale *= desc.s**L
            done += L
    if done < r:
        rx, ry = _lam_levels(desc, r, cx, cy, dtype, done, scale)
        x += rx
        y += ry
    return x, y


def compact_all(desc: FractalDescriptor, r: int):
    """Embedded coordinates of every compact slot, in row-major compact order."""
    w, h = compact_dims(desc, r)
    idx = np.arange(w * h, dtype=_index_dtype(w * h))
    return lam_array(desc, r, idx % w, idx // w)


__all__ = [
    "MapMatrices",
    "build_map_matrices",
    "compact_all",
    "compact_dims",
    "lam",
    "lam_array",
    "lambda_map",
    "levels",
    "mma",
    "nu",
    "nu_array",
    "nu_via_mma",
    "replica_id",
    "tau",
    "triangle_replica_id",
]
