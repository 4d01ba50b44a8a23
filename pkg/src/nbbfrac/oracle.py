"""Brute-force references for the coordinate maps and the stencil backends.

``unfold_compact_oracle`` builds the compact layout by literally replicating
the previous level, using only the stride table; it never evaluates the
closed-form maps.  The ``verify_*`` functions compare the fast paths
against these references and collect every violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import maps
from .core import FractalDescriptor, FractalError, cell_count, enumerate_cells
from .maps import tau
from .stencil import CONWAY, BACKENDS, Engine, StencilRule, init_state
from .storage import to_embedded

ORACLE_LIMIT = 2_000_000


def unfold_compact_oracle(desc: FractalDescriptor, r: int) -> dict:
    """Embedded -> compact mapping built level by level.

    Going from level ``mu`` to ``mu + 1`` places replica ``i`` of the
    current pattern at embedded offset ``(gx, gy) * s**mu`` and compact
    offset ``i * tau(k, mu)``.
    """
    if cell_count(desc, r) > ORACLE_LIMIT:
        raise FractalError(f"{desc.k}^{r} cells exceed the oracle limit {ORACLE_LIMIT}")
    mapping = {(0, 0): (0, 0)}
    span = 1
    for mu in range(r):
        tx, ty = tau(desc.k, mu)
        grown = {}
        for i, (gx, gy) in enumerate(desc.replicas):
            ex, ey = gx * span, gy * span
            ox, oy = i * tx, i * ty
            for (x, y), (cx, cy) in mapping.items():
                grown[(x + ex, y + ey)] = (cx + ox, cy + oy)
        mapping = grown
        span *= desc.s
    return mapping


def literal_triangle_replica_id(x: int, y: int, mu: int) -> int:
    """Replica ID with both coordinate bits weighted 1.

    Not injective: the right and bottom replicas both get ID 1.  Kept only
    so :func:`verify_maps` can show the collisions it causes.
    """
    return ((x >> mu) & 1) + ((y >> mu) & 1)


@dataclass
class MapReport:
    desc: str
    r: int
    cells_checked: int = 0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def format(self, limit: int = 20) -> str:
        head = (
            f"{self.desc} r={self.r}: {'PASS' if self.passed else 'FAIL'}, "
            f"{self.cells_checked} cells checked, {len(self.violations)} violations"
        )
        lines = [head] + [f"  {v}" for v in self.violations[:limit]]
        if len(self.violations) > limit:
            lines.append(f"  ... {len(self.violations) - limit} more")
        return "\n".join(lines)


def verify_maps(desc: FractalDescriptor, r: int, h=None, check_mma: bool = True) -> MapReport:
    """Check nu against the unfolding oracle, its bijectivity, the inverse, and the MMA form.

    ``h`` substitutes a different replica-ID function into nu.
    """
    report = MapReport(desc.name, r)
    bad = report.violations
    oracle = unfold_compact_oracle(desc, r)
    w, hgt = maps.compact_dims(desc, r)
    owner = {}
    for x, y in enumerate_cells(desc, r):
        report.cells_checked += 1
        c = maps.nu(desc, r, x, y, h=h)
        if c != oracle.get((x, y)):
            bad.append(f"nu{(x, y)} = {c}, oracle gives {oracle.get((x, y))}")
        if not (0 <= c[0] < w and 0 <= c[1] < hgt):
            bad.append(f"nu{(x, y)} = {c} outside {w}x{hgt}")
            continue
        if c in owner:
            bad.append(f"collision: nu{owner[c]} = nu{(x, y)} = {c}")
        else:
            owner[c] = (x, y)
        back = maps.lam(desc, r, *c)
        if back != (x, y):
            bad.append(f"lambda(nu{(x, y)}) = {back}")
        if check_mma:
            m = maps.nu_via_mma(desc, r, x, y)
            if m != maps.nu(desc, r, x, y):
                bad.append(f"nu_via_mma{(x, y)} = {m} differs from nu")
    if len(owner) != w * hgt:
        bad.append(f"image covers {len(owner)} of {w * hgt} compact slots")
    for cy in range(hgt):
        for cx in range(w):
            e = maps.lam(desc, r, cx, cy)
            try:
                c = maps.nu(desc, r, *e, h=h)
            except FractalError as exc:
                bad.append(f"nu(lambda{(cx, cy)}) failed: {exc}")
                continue
            if c != (cx, cy):
                bad.append(f"nu(lambda{(cx, cy)}) = {c}")
    return report


@dataclass
class StencilReport:
    desc: str
    r: int
    steps: int
    divergence: tuple | None = None  # (iteration, backend, (x, y))

    @property
    def passed(self) -> bool:
        return self.divergence is None

    def format(self) -> str:
        if self.passed:
            return f"{self.desc} r={self.r}: PASS, {self.steps} steps, backends agree"
        it, backend, xy = self.divergence
        return f"{self.desc} r={self.r}: FAIL, {backend} diverges from bb at iteration {it}, cell {xy}"


def _first_difference(a: np.ndarray, b: np.ndarray):
    diff = np.argwhere(a != b)
    if diff.size == 0:
        return None
    y, x = diff[0]
    return int(x), int(y)


def verify_stencil(
    desc: FractalDescriptor,
    r: int,
    rule: StencilRule = CONWAY,
    seed: int = 42,
    steps: int = 100,
    density: float = 0.5,
    block_size: int | None = None,
    compact_offsets=None,
) -> StencilReport:
    """Run bb, lambda and compact in lockstep and report the first disagreement.

    ``compact_offsets`` replaces the compact backend's neighbor offsets, for
    fault-injection self-tests.
    """
    report = StencilReport(desc.name, r, steps)
    states, engines = {}, {}
    for backend in BACKENDS:
        rho = block_size if backend == "compact" else None
        states[backend] = init_state(desc, r, backend, seed, density, rho)
        offsets = compact_offsets if backend == "compact" else None
        engines[backend] = Engine(desc, r, backend, rule, rho, offsets=offsets)
    try:
        for it in range(steps + 1):
            if it:
                for backend in BACKENDS:
                    engines[backend].step(states[backend])
            ref = to_embedded(states["bb"].front)
            for backend in BACKENDS[1:]:
                where = _first_difference(ref, to_embedded(states[backend].front))
                if where is not None:
                    report.divergence = (it, backend, where)
                    return report
    finally:
        for eng in engines.values():
            eng.close()
    return report
