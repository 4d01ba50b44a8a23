import numpy as np
import pytest

from nbbfrac.core import (
    BUILTIN_NAMES,
    FractalError,
    NotInFractalError,
    builtin_descriptor,
    compression_ratio,
    enumerate_cells,
    fractal_mask,
)
from nbbfrac.storage import (
    ALIVE,
    DEAD,
    MemoryCapError,
    create_grid,
    footprint,
    get_cell,
    memory_footprint,
    non_fractal_slots,
    set_cell,
    slot_coords,
    storage_index,
    storage_index_array,
    to_embedded,
)


def test_create_footprints(triangle):
    assert create_grid(triangle, 6, "linear").buffer.size == 729
    assert create_grid(triangle, 6, ("blocked", 4)).buffer.size == 1296
    assert create_grid(triangle, 6, "embedded").buffer.size == 4096
    assert not create_grid(triangle, 6, "linear").buffer.any()


def test_create_rejects_bad_blocks(triangle):
    with pytest.raises(FractalError):
        create_grid(triangle, 6, ("blocked", 3))
    with pytest.raises(FractalError):
        create_grid(triangle, 2, ("blocked", 8))


def test_memory_cap(triangle):
    with pytest.raises(MemoryCapError, match="1000"):
        create_grid(triangle, 6, "embedded", mem_cap=1000)
    assert create_grid(triangle, 6, "linear", mem_cap=1000).buffer.size == 729


def test_footprint_formulas_without_allocating(triangle):
    assert footprint(triangle, 16, "embedded") == 4_294_967_296
    assert footprint(triangle, 16, "linear") == 43_046_721
    assert footprint(triangle, 6, ("blocked", 4)) == 1296


def test_memory_footprint(triangle):
    cells, nbytes = memory_footprint(create_grid(triangle, 6, ("blocked", 4)))
    assert cells == nbytes == 1296


def test_storage_index_examples(triangle):
    assert storage_index(create_grid(triangle, 2, "linear"), 0, 3) == 8
    for layout in ("linear", "embedded", ("blocked", 2)):
        assert storage_index(create_grid(triangle, 2, layout), 0, 0) == 0
    assert storage_index(create_grid(triangle, 2, ("blocked", 2)), 3, 0) == 5
    assert storage_index(create_grid(triangle, 2, "embedded"), 1, 3) == 13


def test_storage_index_errors(triangle):
    with pytest.raises(NotInFractalError):
        storage_index(create_grid(triangle, 2, "linear"), 2, 2)
    blocked = create_grid(triangle, 2, ("blocked", 2))
    with pytest.raises(NotInFractalError):
        storage_index(blocked, 2, 2)
    # A hole inside an occupied block still has a filler slot.
    assert storage_index(blocked, 1, 1) == 3


def test_get_set_roundtrip(triangle):
    g = create_grid(triangle, 2, "linear")
    assert get_cell(g, 0, 3) == DEAD
    set_cell(g, 0, 3, ALIVE)
    assert get_cell(g, 0, 3) == ALIVE
    assert int(g.buffer.sum()) == 1
    with pytest.raises(NotInFractalError):
        get_cell(g, 2, 2)


def test_linear_index_is_bijection(triangle):
    for r in range(9):
        g = create_grid(triangle, r, "linear")
        idx = [storage_index(g, x, y) for x, y in enumerate_cells(triangle, r)]
        assert sorted(idx) == list(range(3**r))


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_blocked_indices_distinct_and_not_filler(name):
    desc = builtin_descriptor(name)
    for m in (1, 2):
        rho = desc.s**m
        for r in range(m, 5):
            g = create_grid(desc, r, ("blocked", rho))
            _, _, mask = slot_coords(g)
            idx = [storage_index(g, x, y) for x, y in enumerate_cells(desc, r)]
            assert len(set(idx)) == len(idx) == desc.k**r
            assert mask[idx].all()
            assert int(mask.sum()) == desc.k**r


@pytest.mark.parametrize("layout", ["embedded", "linear", ("blocked", 2), ("blocked", 4)])
def test_array_index_matches_scalar(triangle, layout):
    g = create_grid(triangle, 5, layout)
    cells = np.array(list(enumerate_cells(triangle, 5)))
    idx, valid = storage_index_array(g, cells[:, 0], cells[:, 1])
    assert valid.all()
    assert idx.tolist() == [storage_index(g, int(x), int(y)) for x, y in cells]


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_footprint_times_compression_is_embedded(name):
    desc = builtin_descriptor(name)
    for r in range(25):
        assert footprint(desc, r, "linear") * compression_ratio(desc, r) == desc.s ** (2 * r)


@pytest.mark.parametrize("name", BUILTIN_NAMES)
def test_blocked_overhead_constant_in_level(name):
    desc = builtin_descriptor(name)
    for m in (1, 2):
        rho = desc.s**m
        ratios = {footprint(desc, r, ("blocked", rho)) / desc.k**r for r in range(m, 20)}
        assert ratios == {rho * rho / desc.k**m}


def test_to_embedded_and_filler(triangle):
    for layout in ("embedded", "linear", ("blocked", 2)):
        g = create_grid(triangle, 3, layout)
        for x, y in enumerate_cells(triangle, 3):
            set_cell(g, x, y, ALIVE)
        assert (to_embedded(g) == fractal_mask(triangle, 3)).all()
        assert not g.buffer[non_fractal_slots(g)].any()
