"""Uniform rectangular grids with RT0 edge numbering and P0 cell numbering.

The velocity space is lowest-order Raviart-Thomas on an n-by-n grid of
squares over the unit square; one degree of freedom per edge, equal to the
average normal flux through the edge with a globally fixed normal (+x on
vertical edges, +y on horizontal edges). The pressure space is piecewise
constant, one DOF per cell.

Numbering is deterministic raster order:

* vertical edges first: rows j = 0..n-1 bottom to top, within a row the
  columns i = 0..n left to right, id = j*(n+1) + i;
* then horizontal edges: rows j = 0..n, columns i = 0..n-1,
  id = n*(n+1) + j*n + i;
* cells row-major: id = j*n + i.
"""

import numpy as np

from .errors import ConfigurationError

# Local edge order within a cell and the outward-normal signs for that order.
# (left, right, bottom, top); global normals make left/bottom inward.
CELL_EDGE_SIGNS = np.array([-1.0, 1.0, -1.0, 1.0])

VERTICAL = 0
HORIZONTAL = 1


class Grid:
    """Geometry and numbering tables for one refinement level.

    Attributes
    ----------
    n : int
        Cells per side (power of two).
    h : float
        Mesh size 1/n.
    num_cells, num_edges : int
        n*n and 2*n*(n+1).
    cell_table : (num_cells, 4) int array
        Edge ids (left, right, bottom, top) of every cell; combine with
        CELL_EDGE_SIGNS for outward-normal orientation.
    edge_orientation : (num_edges,) int array
        VERTICAL or HORIZONTAL.
    edge_cells : (num_edges, 2) int array
        Adjacent cell ids, -1 where missing (boundary edges).
    edge_boundary : (num_edges,) bool array
        True for edges on the domain boundary.
    """

    def __init__(self, n: int):
        if n < 2 or (n & (n - 1)) != 0:
            raise ConfigurationError(
                f"grid size must be a power of two >= 2, got {n}"
            )
        self.n = n
        self.h = 1.0 / n
        self.num_cells = n * n
        self.num_vedges = n * (n + 1)
        self.num_hedges = n * (n + 1)
        self.num_edges = 2 * n * (n + 1)

        ci, cj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
        ci = ci.T.ravel()  # row-major over (j, i)
        cj = cj.T.ravel()
        left = self.vedge_id(ci, cj)
        right = self.vedge_id(ci + 1, cj)
        bottom = self.hedge_id(ci, cj)
        top = self.hedge_id(ci, cj + 1)
        self.cell_table = np.column_stack([left, right, bottom, top])

        self.edge_orientation = np.empty(self.num_edges, dtype=np.int8)
        self.edge_orientation[: self.num_vedges] = VERTICAL
        self.edge_orientation[self.num_vedges:] = HORIZONTAL

        self.edge_cells = np.full((self.num_edges, 2), -1, dtype=np.int64)
        cells = self.cell_id(ci, cj)
        # vertical edge (i, j): left neighbour is cell (i-1, j), right (i, j)
        self.edge_cells[left, 1] = cells
        self.edge_cells[right, 0] = cells
        # horizontal edge (i, j): below is cell (i, j-1), above (i, j)
        self.edge_cells[bottom, 1] = cells
        self.edge_cells[top, 0] = cells

        self.edge_boundary = np.any(self.edge_cells < 0, axis=1)

    def vedge_id(self, i, j):
        """Vertical edge at x = i*h crossing cell row j (i in 0..n, j in 0..n-1)."""
        return np.asarray(j) * (self.n + 1) + np.asarray(i)

    def hedge_id(self, i, j):
        """Horizontal edge at y = j*h over cell column i (i in 0..n-1, j in 0..n)."""
        return self.num_vedges + np.asarray(j) * self.n + np.asarray(i)

    def cell_id(self, i, j):
        return np.asarray(j) * self.n + np.asarray(i)

    def cells_in_block(self, i0, j0, si, sj):
        """Cell ids of the block [i0, i0+si) x [j0, j0+sj), row-major."""
        ii = np.arange(i0, i0 + si)
        jj = np.arange(j0, j0 + sj)
        return (jj[:, None] * self.n + ii[None, :]).ravel()

    def edges_in_block(self, i0, j0, si, sj):
        """Sorted ids of all edges of cells in the given block (closed range)."""
        vi = np.arange(i0, i0 + si + 1)
        vj = np.arange(j0, j0 + sj)
        v = (vj[:, None] * (self.n + 1) + vi[None, :]).ravel()
        hi = np.arange(i0, i0 + si)
        hj = np.arange(j0, j0 + sj + 1)
        h = self.num_vedges + (hj[:, None] * self.n + hi[None, :]).ravel()
        return np.sort(np.concatenate([v, h]))

    def __repr__(self):
        return f"Grid(n={self.n})"


def build_grid(n: int) -> Grid:
    """Build the grid for n cells per side. n must be a power of two >= 2."""
    return Grid(n)
