"""Overlapping coverings of the cell grid by square subdomains.

The covering is a staggered lattice of axis-aligned cell blocks. With the
default block size 8 and stride 4 each block overlaps its neighbours by
half its width/height, every cell lies in at most four blocks, and block
multiplicities are powers of two (so the 1/multiplicity weights used in
local assembly are exact in floating point).

Block origins and sizes are kept even so that every non-interior fine
edge inside a block has its partner edge (the other half of the same
coarse edge) inside the block as well; the two-level transform relies on
this.
"""

from dataclasses import dataclass, field

import numpy as np

from .coeff import CoefficientField
from .errors import ConfigurationError, DimensionError
from .fem import local_velocity_matrix
from .grid import Grid


@dataclass
class Subdomain:
    index: int
    origin: tuple  # (i0, j0) in cells
    size: int      # cells per side, square
    cells: np.ndarray
    edges: np.ndarray  # sorted global edge ids; defines the local numbering

    def local_index_of(self, edge_ids: np.ndarray) -> np.ndarray:
        pos = np.searchsorted(self.edges, edge_ids)
        if np.any(pos >= self.edges.size) or np.any(self.edges[pos] != edge_ids):
            raise DimensionError("edge not contained in subdomain")
        return pos


@dataclass
class Covering:
    grid: Grid
    sub_cells: int
    stride: int
    subdomains: list
    multiplicity: np.ndarray = field(repr=False)  # per cell

    def __len__(self):
        return len(self.subdomains)


def _origins(n: int, sub_cells: int, stride: int) -> np.ndarray:
    if n <= sub_cells:
        return np.array([0])
    if (n - sub_cells) % stride != 0:
        raise ConfigurationError(
            f"stride {stride} does not tile n={n} with blocks of {sub_cells}"
        )
    return np.arange(0, n - sub_cells + 1, stride)


def build_covering(grid: Grid, sub_cells: int = 8, stride: int = 4) -> Covering:
    """Staggered covering by sub_cells x sub_cells blocks.

    A grid no larger than one block is covered by a single subdomain.
    """
    if sub_cells < 2 or sub_cells % 2 != 0:
        raise ConfigurationError(f"block size must be even and >= 2, got {sub_cells}")
    if stride < 2 or stride % 2 != 0 or stride > sub_cells:
        raise ConfigurationError(
            f"stride must be even, >= 2 and <= block size, got {stride}"
        )
    n = grid.n
    size = min(sub_cells, n)
    origins = _origins(n, sub_cells, stride)

    subdomains = []
    multiplicity = np.zeros(grid.num_cells, dtype=np.int64)
    idx = 0
    for j0 in origins:
        for i0 in origins:
            cells = grid.cells_in_block(i0, j0, size, size)
            edges = grid.edges_in_block(i0, j0, size, size)
            subdomains.append(
                Subdomain(index=idx, origin=(int(i0), int(j0)), size=int(size),
                          cells=cells, edges=edges)
            )
            multiplicity[cells] += 1
            idx += 1

    if np.any(multiplicity == 0):
        raise ConfigurationError("covering leaves cells uncovered")
    if multiplicity.max() > 4:
        raise ConfigurationError(
            f"cell multiplicity {multiplicity.max()} exceeds 4; "
            f"choose stride >= sub_cells/2"
        )
    return Covering(grid=grid, sub_cells=sub_cells, stride=stride,
                    subdomains=subdomains, multiplicity=multiplicity)


def assemble_local(grid: Grid, field_: CoefficientField, subdomain: Subdomain,
                   multiplicity: np.ndarray) -> np.ndarray:
    """Dense local matrix: element matrices of the block's cells, each
    scaled by 1/multiplicity so the subdomain sum reproduces the global
    matrix exactly."""
    m = subdomain.edges.size
    A_i = np.zeros((m, m))
    for cell in subdomain.cells:
        loc = subdomain.local_index_of(grid.cell_table[cell])
        elem = local_velocity_matrix(field_.alpha[cell], grid.h)
        A_i[np.ix_(loc, loc)] += elem / multiplicity[cell]
    return A_i
