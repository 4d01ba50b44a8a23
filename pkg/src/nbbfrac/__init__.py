"""Compact storage, coordinate maps and stencil simulation for NBB fractals."""

from .core import (
    BUILTIN_NAMES,
    FractalDescriptor,
    FractalError,
    NotInFractalError,
    builtin_descriptor,
    cell_count,
    compression_factor,
    contains,
    enumerate_cells,
    hausdorff_dimension,
    parse_descriptor,
)
from .maps import build_map_matrices, compact_dims, lam, nu, nu_via_mma, replica_id, tau
from .stencil import StencilRule, init_state, run_simulation, step
from .storage import create_grid, get_cell, memory_footprint, set_cell, storage_index

__version__ = "0.1.0"
