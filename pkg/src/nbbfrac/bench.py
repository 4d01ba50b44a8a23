"""Benchmark harness: timed Game-of-Life runs per (level, backend, block size).

Each configuration gets one untimed warm-up step, then ``reps`` timed runs
of ``iters`` iterations.  Mean and standard deviation are taken over the
per-run ms/iteration figures.  Speedup is the bounding-box mean divided by
the configuration's mean, at the same fractal and level.

Configurations whose grid would exceed the memory cap are not run; they
are written with ``mean_ms`` set to ``infeasible``.
"""

from __future__ import annotations

import csv
import logging
import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable

from .core import FractalDescriptor, FractalError, block_exponent
from .stencil import CONWAY, Engine, StencilRule, backend_layout, init_state
from .storage import DEFAULT_MEMORY_CAP, footprint

log = logging.getLogger(__name__)

CSV_FIELDS = (
    "fractal",
    "level",
    "n",
    "backend",
    "block_size",
    "reps",
    "iters",
    "mean_ms",
    "stddev_ms",
    "mem_cells",
    "speedup_vs_bb",
)
INFEASIBLE = "infeasible"
NOT_AVAILABLE = "NA"

PRESETS = {
    "full": dict(reps=100, iters=1000, levels=range(1, 17), block_sizes=(2, 4, 8, 16, 32)),
    "desk": dict(reps=5, iters=50, levels=range(1, 11), block_sizes=(2, 4, 8, 16, 32)),
}


@dataclass
class BenchRecord:
    fractal: str
    level: int
    n: int
    backend: str
    block_size: int | None
    reps: int
    iters: int
    mean_ms: float | None
    stddev_ms: float | None
    mem_cells: int
    speedup_vs_bb: float | None = None

    @property
    def feasible(self) -> bool:
        return self.mean_ms is not None

    def row(self) -> dict:
        d = asdict(self)
        d["block_size"] = "-" if self.block_size is None else self.block_size
        d["mean_ms"] = INFEASIBLE if self.mean_ms is None else f"{self.mean_ms:.6f}"
        d["stddev_ms"] = NOT_AVAILABLE if self.stddev_ms is None else f"{self.stddev_ms:.6f}"
        d["speedup_vs_bb"] = (
            NOT_AVAILABLE if self.speedup_vs_bb is None else f"{self.speedup_vs_bb:.6f}"
        )
        return d

    @classmethod
    def from_row(cls, row: dict) -> "BenchRecord":
        def num(v):
            return None if v in (INFEASIBLE, NOT_AVAILABLE, "") else float(v)

        return cls(
            fractal=row["fractal"],
            level=int(row["level"]),
            n=int(row["n"]),
            backend=row["backend"],
            block_size=None if row["block_size"] == "-" else int(row["block_size"]),
            reps=int(row["reps"]),
            iters=int(row["iters"]),
            mean_ms=num(row["mean_ms"]),
            stddev_ms=num(row["stddev_ms"]),
            mem_cells=int(row["mem_cells"]),
            speedup_vs_bb=num(row["speedup_vs_bb"]),
        )


@dataclass
class BenchConfig:
    desc: FractalDescriptor
    levels: Iterable[int]
    backends: tuple[str, ...] = ("bb", "lambda", "compact")
    reps: int = 5
    iters: int = 50
    block_sizes: tuple[int, ...] = ()
    mem_cap: int | None = DEFAULT_MEMORY_CAP
    workers: int = 1
    seed: int = 42
    density: float = 0.5
    rule: StencilRule = field(default=CONWAY)
    warmup: int = 1


def configurations(cfg: BenchConfig):
    """Yield ``(level, backend, block_size)`` in output order."""
    for r in cfg.levels:
        for backend in cfg.backends:
            if backend != "compact":
                yield r, backend, None
                continue
            yield r, backend, None
            for rho in cfg.block_sizes:
                try:
                    m = block_exponent(cfg.desc, rho)
                except FractalError:
                    log.info("block size %d is not a power of s=%d; skipped", rho, cfg.desc.s)
                    continue
                if 1 <= m <= r:
                    yield r, backend, rho


def time_config(cfg: BenchConfig, r: int, backend: str, rho: int | None) -> tuple[float, float]:
    state = init_state(cfg.desc, r, backend, cfg.seed, cfg.density, rho, cfg.mem_cap)
    per_iter = []
    with Engine(cfg.desc, r, backend, cfg.rule, rho, cfg.workers) as eng:
        for _ in range(cfg.warmup):
            eng.step(state)
        for _ in range(cfg.reps):
            t0 = time.perf_counter()
            for _ in range(cfg.iters):
                eng.step(state)
            elapsed = time.perf_counter() - t0
            per_iter.append(1000.0 * elapsed / max(cfg.iters, 1))
    mean = statistics.fmean(per_iter)
    std = statistics.stdev(per_iter) if len(per_iter) > 1 else 0.0
    return mean, std


def bench_run(cfg: BenchConfig) -> list[BenchRecord]:
    records = []
    bb_mean = {}
    for r, backend, rho in configurations(cfg):
        layout = backend_layout(backend, rho)
        cells = footprint(cfg.desc, r, layout)
        rec = BenchRecord(
            cfg.desc.name, r, cfg.desc.s**r, backend, rho, cfg.reps, cfg.iters,
            None, None, cells,
        )
        if cfg.mem_cap is not None and cells > cfg.mem_cap:
            log.warning(
                "%s r=%d %s: %d cells exceed the %d-byte cap; marked infeasible",
                cfg.desc.name, r, layout, cells, cfg.mem_cap,
            )
        else:
            log.info("%s r=%d %s", cfg.desc.name, r, layout)
            rec.mean_ms, rec.stddev_ms = time_config(cfg, r, backend, rho)
            if backend == "bb":
                bb_mean[r] = rec.mean_ms
        records.append(rec)
    for rec in records:
        ref = bb_mean.get(rec.level)
        if ref is not None and rec.feasible and rec.mean_ms > 0:
            rec.speedup_vs_bb = 1.0 if rec.backend == "bb" else ref / rec.mean_ms
    return records


def write_csv(records: Iterable[BenchRecord], fh) -> None:
    writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.row())


def read_csv(fh) -> list[BenchRecord]:
    reader = csv.DictReader(fh)
    if tuple(reader.fieldnames or ()) != CSV_FIELDS:
        raise FractalError(f"unexpected CSV header {reader.fieldnames}")
    return [BenchRecord.from_row(row) for row in reader]
