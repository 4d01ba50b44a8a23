import io

import pytest

from nbbfrac.bench import (
    CSV_FIELDS,
    INFEASIBLE,
    BenchConfig,
    bench_run,
    configurations,
    read_csv,
    write_csv,
)
from nbbfrac.core import builtin_descriptor
from nbbfrac.storage import footprint
from nbbfrac.stencil import backend_layout


@pytest.fixture(scope="module")
def records():
    cfg = BenchConfig(
        builtin_descriptor("sierpinski-triangle"), range(3, 6), reps=3, iters=2, block_sizes=(2, 3, 4, 64)
    )
    return bench_run(cfg)


def test_configurations_skip_impossible_blocks():
    cfg = BenchConfig(builtin_descriptor("sierpinski-triangle"), [2], block_sizes=(2, 3, 4, 8))
    assert list(configurations(cfg)) == [
        (2, "bb", None),
        (2, "lambda", None),
        (2, "compact", None),
        (2, "compact", 2),
        (2, "compact", 4),
    ]


def test_bb_speedup_is_one(records):
    for rec in records:
        if rec.backend == "bb":
            assert rec.speedup_vs_bb == 1.0


def test_speedup_is_ratio_of_means(records):
    bb = {rec.level: rec.mean_ms for rec in records if rec.backend == "bb"}
    for rec in records:
        assert rec.speedup_vs_bb == pytest.approx(bb[rec.level] / rec.mean_ms)
        assert rec.mean_ms > 0 and rec.stddev_ms >= 0


def test_memory_column(records):
    for rec in records:
        layout = backend_layout(rec.backend, rec.block_size)
        assert rec.mem_cells == footprint(builtin_descriptor(rec.fractal), rec.level, layout)
        assert rec.n == 2**rec.level


def test_csv_roundtrip(records):
    buf = io.StringIO()
    write_csv(records, buf)
    text = buf.getvalue()
    assert text.splitlines()[0] == ",".join(CSV_FIELDS)
    assert len(text.splitlines()) == len(records) + 1
    back = read_csv(io.StringIO(text))
    assert [(r.level, r.backend, r.block_size, r.mem_cells) for r in back] == [
        (r.level, r.backend, r.block_size, r.mem_cells) for r in records
    ]
    for a, b in zip(back, records):
        assert a.mean_ms == pytest.approx(b.mean_ms, abs=1e-6)


def test_mem_cap_marks_infeasible():
    desc = builtin_descriptor("sierpinski-triangle")
    cfg = BenchConfig(desc, [6], reps=1, iters=1, mem_cap=1000)
    recs = bench_run(cfg)
    by_backend = {r.backend: r for r in recs}
    assert not by_backend["bb"].feasible and not by_backend["lambda"].feasible
    assert by_backend["compact"].feasible and by_backend["compact"].speedup_vs_bb is None
    buf = io.StringIO()
    write_csv(recs, buf)
    assert f",{INFEASIBLE}," in buf.getvalue()
    assert read_csv(io.StringIO(buf.getvalue()))[0].mean_ms is None
