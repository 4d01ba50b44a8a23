"""NBB fractal descriptors and geometry primitives.

A fractal of the Non-overlapping-Bounding-Boxes class is fully described by
``k`` (replicas per level), ``s`` (linear growth per level) and the ordered
table of replica positions on the ``s x s`` sub-box grid.  The order of that
table defines the replica IDs used everywhere else in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

# Counts must stay representable in a signed 64-bit integer.
COUNT_LIMIT = 2**63


class FractalError(ValueError):
    """Base class for descriptor and geometry errors."""


class DescriptorError(FractalError):
    pass


class DuplicateReplicaError(DescriptorError):
    pass


class ReplicaOutOfGridError(DescriptorError):
    pass


class ReplicaCountError(DescriptorError):
    pass


class GrowthFactorError(DescriptorError):
    pass


class MalformedDescriptorError(DescriptorError):
    pass


class UnknownFractalError(FractalError, KeyError):
    def __str__(self):
        return self.args[0] if self.args else ""


class CoordinateRangeError(FractalError, IndexError):
    pass


class NotInFractalError(FractalError):
    pass


class CountOverflowError(FractalError, OverflowError):
    pass


@dataclass(frozen=True)
class FractalDescriptor:
    name: str
    k: int
    s: int
    replicas: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(
            self, "replicas", tuple((int(gx), int(gy)) for gx, gy in self.replicas)
        )
        if self.s < 2:
            raise GrowthFactorError(f"growth factor s must be >= 2, got {self.s}")
        if self.k < 1:
            raise ReplicaCountError(f"replica count k must be >= 1, got {self.k}")
        if len(self.replicas) != self.k:
            raise ReplicaCountError(
                f"k={self.k} but {len(self.replicas)} replica positions given"
            )
        if self.k > self.s * self.s:
            raise ReplicaCountError(f"k={self.k} exceeds s^2={self.s * self.s}")
        seen = set()
        for pos in self.replicas:
            gx, gy = pos
            if not (0 <= gx < self.s and 0 <= gy < self.s):
                raise ReplicaOutOfGridError(
                    f"replica {pos} lies outside the {self.s}x{self.s} grid"
                )
            if pos in seen:
                raise DuplicateReplicaError(f"replica position {pos} appears twice")
            seen.add(pos)

    @property
    def id_table(self) -> np.ndarray:
        """Sub-box -> replica ID, flattened as ``gy * s + gx``; -1 marks holes."""
        table = np.full(self.s * self.s, -1, dtype=np.int64)
        for i, (gx, gy) in enumerate(self.replicas):
            table[gy * self.s + gx] = i
        table.flags.writeable = False
        return table

    def replica_index(self, gx: int, gy: int) -> int | None:
        try:
            return self.replicas.index((gx, gy))
        except ValueError:
            return None


def side(desc: FractalDescriptor, r: int) -> int:
    """Embedded side length ``n = s**r``."""
    check_level(r)
    return desc.s**r


def check_level(r: int) -> None:
    if not isinstance(r, (int, np.integer)) or r < 0:
        raise FractalError(f"scale level must be a non-negative integer, got {r!r}")


def level_of_side(desc: FractalDescriptor, n: int) -> int:
    """Inverse of :func:`side`; ``n`` must be an exact power of ``s``."""
    r, m = 0, 1
    while m < n:
        m *= desc.s
        r += 1
    if m != n:
        raise FractalError(f"{n} is not a power of s={desc.s}")
    return r


_BUILTINS = {
    "sierpinski-triangle": (3, 2, [(0, 0), (1, 0), (0, 1)]),
    "sierpinski-carpet": (
        8,
        3,
        [(x, y) for y in range(3) for x in range(3) if (x, y) != (1, 1)],
    ),
    "vicsek": (5, 3, [(1, 0), (0, 1), (1, 1), (2, 1), (1, 2)]),
}

BUILTIN_NAMES = tuple(_BUILTINS)


def builtin_descriptor(name: str) -> FractalDescriptor:
    try:
        k, s, replicas = _BUILTINS[name]
    except KeyError:
        raise UnknownFractalError(
            f"unknown fractal {name!r}; built-ins are {', '.join(BUILTIN_NAMES)}"
        ) from None
    return FractalDescriptor(name, k, s, tuple(replicas))


def _parse_int(key, value, lineno):
    try:
        return int(value)
    except ValueError:
        raise MalformedDescriptorError(
            f"line {lineno}: {key} must be an integer, got {value!r}"
        ) from None


def parse_descriptor(text: str) -> FractalDescriptor:
    """Parse the line-based ``key=value`` descriptor format.

    Recognized keys are ``name``, ``k``, ``s`` and ``replicas``
    (``gx,gy;gx,gy;...``).  Lines starting with ``#`` are comments.
    """
    fields: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedDescriptorError(f"line {lineno}: expected key=value: {raw!r}")
        key, value = (t.strip() for t in line.split("=", 1))
        if key in fields:
            raise MalformedDescriptorError(f"line {lineno}: duplicate key {key!r}")
        if key == "name":
            fields[key] = value
        elif key in ("k", "s"):
            fields[key] = _parse_int(key, value, lineno)
        elif key == "replicas":
            pairs = []
            for item in value.split(";"):
                item = item.strip()
                if not item:
                    continue
                parts = [p.strip() for p in item.split(",")]
                if len(parts) != 2:
                    raise MalformedDescriptorError(
                        f"line {lineno}: replica {item!r} is not a gx,gy pair"
                    )
                pairs.append(tuple(_parse_int("replica", p, lineno) for p in parts))
            fields[key] = tuple(pairs)
        else:
            raise MalformedDescriptorError(f"line {lineno}: unknown key {key!r}")
    missing = [key for key in ("k", "s", "replicas") if key not in fields]
    if missing:
        raise MalformedDescriptorError(f"missing keys: {', '.join(missing)}")
    return FractalDescriptor(
        str(fields.get("name", "custom")), fields["k"], fields["s"], fields["replicas"]
    )


def format_descriptor(desc: FractalDescriptor) -> str:
    pairs = ";".join(f"{gx},{gy}" for gx, gy in desc.replicas)
    return f"name={desc.name}\nk={desc.k}\ns={desc.s}\nreplicas={pairs}\n"


def load_descriptor(spec: str) -> FractalDescriptor:
    """Resolve a CLI fractal argument: a built-in name or ``@path``."""
    if spec.startswith("@"):
        with open(spec[1:], encoding="utf-8") as fh:
            return parse_descriptor(fh.read())
    return builtin_descriptor(spec)


def contains(desc: FractalDescriptor, r: int, x: int, y: int) -> bool:
    n = side(desc, r)
    if not (0 <= x < n and 0 <= y < n):
        raise CoordinateRangeError(f"({x}, {y}) outside [0, {n})^2")
    occupied = set(desc.replicas)
    for _ in range(r):
        if (x % desc.s, y % desc.s) not in occupied:
            return False
        x //= desc.s
        y //= desc.s
    return True


def contains_array(desc: FractalDescriptor, r: int, x, y) -> np.ndarray:
    """Vectorized membership; out-of-box coordinates are reported as outside."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    n = side(desc, r)
    inside = (x >= 0) & (x < n) & (y >= 0) & (y < n)
    xs, ys = np.where(inside, x, 0), np.where(inside, y, 0)
    table = desc.id_table
    for _ in range(r):
        inside &= table[(ys % desc.s) * desc.s + xs % desc.s] >= 0
        xs = xs // desc.s
        ys = ys // desc.s
    return inside


def fractal_mask(desc: FractalDescriptor, r: int) -> np.ndarray:
    """Boolean ``n x n`` occupancy raster indexed ``[y, x]``.

    Built as a Kronecker power of the one-level pattern.
    """
    base = np.zeros((desc.s, desc.s), dtype=bool)
    for gx, gy in desc.replicas:
        base[gy, gx] = True
    mask = np.ones((1, 1), dtype=bool)
    for _ in range(r):
        mask = np.kron(base, mask)
    return mask


def enumerate_cells(desc: FractalDescriptor, r: int) -> Iterator[tuple[int, int]]:
    """Fractal cells in row-major embedded order."""
    check_level(r)
    n = desc.s**r
    for y in range(n):
        for x in range(n):
            if contains(desc, r, x, y):
                yield (x, y)


def cell_count(desc: FractalDescriptor, r: int) -> int:
    check_level(r)
    count = desc.k**r
    if count >= COUNT_LIMIT:
        raise CountOverflowError(f"k^r = {desc.k}^{r} exceeds 2^63")
    return count


def hausdorff_dimension(desc: FractalDescriptor) -> float:
    return math.log(desc.k) / math.log(desc.s)


def block_exponent(desc: FractalDescriptor, rho: int) -> int:
    """Return ``m`` with ``rho == s**m``; raise if ``rho`` is not a power of ``s``."""
    m, p = 0, 1
    while p < rho:
        p *= desc.s
        m += 1
    if p != rho or rho < 1:
        raise FractalError(f"block size {rho} is not a power of s={desc.s}")
    return m


def stored_cells(desc: FractalDescriptor, r: int, layout: str = "linear", rho: int | None = None) -> int:
    """Number of storage slots a layout needs at level ``r``."""
    check_level(r)
    if layout == "embedded":
        return desc.s ** (2 * r)
    if layout == "linear":
        return desc.k**r
    if layout == "blocked":
        if rho is None:
            raise FractalError("blocked layout needs a block size")
        m = block_exponent(desc, rho)
        if m > r:
            raise FractalError(f"block size {rho} exceeds the fractal side s^{r}")
        return desc.k ** (r - m) * rho * rho
    raise FractalError(f"unknown layout {layout!r}")


def compression_ratio(desc: FractalDescriptor, r: int, layout: str = "linear", rho: int | None = None) -> Fraction:
    """Exact embedded-to-stored cell ratio."""
    return Fraction(desc.s ** (2 * r), stored_cells(desc, r, layout, rho))


def compression_factor(desc: FractalDescriptor, r: int, layout: str = "linear", rho: int | None = None) -> float:
    return float(compression_ratio(desc, r, layout, rho))
