"""RT0/P0 finite element assembly for the weighted H(div) Darcy problem.

Assembles the weighted velocity mass matrix (alpha u, v), the divergence
matrix (div u, q), the H(div) stiffness A for
Lambda_alpha(u, v) = (alpha u, v) + (div u, div v), and the saddle-point
system

    [ M_alpha  -B_div^T ] [u]   [  0  ]
    [ -B_div      0     ] [p] = [ -f  ]

with pressure boundary condition p = 0 on the whole boundary (which is
natural in the mixed form, so no velocity DOF is eliminated).

All element integrals are closed-form; the integrands are polynomials of
degree <= 2 on each cell.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .coeff import CoefficientField
from .errors import CoefficientError, DimensionError
from .grid import CELL_EDGE_SIGNS, Grid

# Reference mass coupling for unit-flux RT0 DOFs in local (L, R, B, T) order;
# scale by alpha_T * h^2. Cross-direction products integrate to zero.
_MREF = np.array(
    [
        [1.0 / 3.0, 1.0 / 6.0, 0.0, 0.0],
        [1.0 / 6.0, 1.0 / 3.0, 0.0, 0.0],
        [0.0, 0.0, 1.0 / 3.0, 1.0 / 6.0],
        [0.0, 0.0, 1.0 / 6.0, 1.0 / 3.0],
    ]
)

# div phi_e = sign_e / h on the cell, so the div-div element matrix is
# h^2 * d d^T = s s^T with entries +-1, independent of h.
_DLOC = np.outer(CELL_EDGE_SIGNS, CELL_EDGE_SIGNS)


@dataclass
class SaddleSystem:
    """Blocks of the mixed system and its preconditioner ingredients."""

    grid: Grid
    M_alpha: sp.csr_matrix
    B_div: sp.csr_matrix
    A: sp.csr_matrix  # M_alpha + B_div^T M_p^{-1} B_div, exact for RT0/P0
    M_p_diag: np.ndarray  # pressure mass diagonal, entries h^2
    rhs_u: np.ndarray
    rhs_p: np.ndarray

    def matrix(self) -> sp.csr_matrix:
        """Full indefinite block matrix [[M, -B^T], [-B, 0]]."""
        return sp.bmat(
            [[self.M_alpha, -self.B_div.T], [-self.B_div, None]], format="csr"
        )

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.rhs_u, self.rhs_p])


def local_velocity_matrix(alpha_T: float, h: float) -> np.ndarray:
    """Element matrix of Lambda_alpha on one cell, local order (L, R, B, T).

    Returns alpha_T*h^2*M_ref + s s^T, which is symmetric positive definite
    for alpha_T > 0.
    """
    if alpha_T <= 0.0:
        raise CoefficientError(f"cell coefficient must be positive, got {alpha_T}")
    return alpha_T * h * h * _MREF + _DLOC


def _check_field(grid: Grid, field: CoefficientField):
    if field.n != grid.n:
        raise DimensionError(
            f"field has n={field.n}, grid has n={grid.n}"
        )


def assemble_mass(grid: Grid, field: CoefficientField) -> sp.csr_matrix:
    """Weighted velocity mass matrix (alpha u, v)."""
    _check_field(grid, field)
    return _assemble_cellwise(grid, field.alpha * grid.h * grid.h, _MREF)


def assemble_divdiv(grid: Grid) -> sp.csr_matrix:
    """Velocity matrix of (div u, div v)."""
    ones = np.ones(grid.num_cells)
    return _assemble_cellwise(grid, ones, _DLOC)


def assemble_velocity(grid: Grid, field: CoefficientField) -> sp.csr_matrix:
    """Stiffness matrix of the weighted H(div) form Lambda_alpha. SPD."""
    _check_field(grid, field)
    scale = field.alpha * grid.h * grid.h
    coo_rows, coo_cols, coo_vals = [], [], []
    for a in range(4):
        for b in range(4):
            coo_rows.append(grid.cell_table[:, a])
            coo_cols.append(grid.cell_table[:, b])
            coo_vals.append(scale * _MREF[a, b] + _DLOC[a, b])
    A = sp.coo_matrix(
        (np.concatenate(coo_vals), (np.concatenate(coo_rows), np.concatenate(coo_cols))),
        shape=(grid.num_edges, grid.num_edges),
    ).tocsr()
    A.sum_duplicates()
    return A


def _assemble_cellwise(grid, cell_scale, local4):
    rows, cols, vals = [], [], []
    for a in range(4):
        for b in range(4):
            if local4[a, b] == 0.0:
                continue
            rows.append(grid.cell_table[:, a])
            cols.append(grid.cell_table[:, b])
            vals.append(cell_scale * local4[a, b])
    M = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.num_edges, grid.num_edges),
    ).tocsr()
    M.sum_duplicates()
    return M


def assemble_bdiv(grid: Grid) -> sp.csr_matrix:
    """Divergence matrix, rows = cells: (div u, chi_T) = sum_e s_e h u_e."""
    rows = np.repeat(np.arange(grid.num_cells), 4)
    cols = grid.cell_table.ravel()
    vals = np.tile(CELL_EDGE_SIGNS * grid.h, grid.num_cells)
    return sp.coo_matrix(
        (vals, (rows, cols)), shape=(grid.num_cells, grid.num_edges)
    ).tocsr()


def assemble_rhs(grid: Grid, c: float) -> np.ndarray:
    """Cellwise averages of the source f: +c on [0.2,0.3]x[0.7,0.8],
    -c on [0.7,0.8]x[0.2,0.3], zero elsewhere."""
    n, h = grid.n, grid.h
    lo = np.arange(n) * h
    hi = lo + h

    def overlap(a, b):
        return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)

    frac_x_plus = overlap(0.2, 0.3) / h
    frac_y_plus = overlap(0.7, 0.8) / h
    frac_x_minus = overlap(0.7, 0.8) / h
    frac_y_minus = overlap(0.2, 0.3) / h
    f = c * (
        np.outer(frac_y_plus, frac_x_plus) - np.outer(frac_y_minus, frac_x_minus)
    )
    return f.ravel()


def assemble_saddle(grid: Grid, field: CoefficientField, rhs_c: float = 0.0) -> SaddleSystem:
    """Assemble all blocks of the mixed system with source constant rhs_c."""
    _check_field(grid, field)
    M = assemble_mass(grid, field)
    B = assemble_bdiv(grid)
    A = assemble_velocity(grid, field)
    h2 = grid.h * grid.h
    f_cells = assemble_rhs(grid, rhs_c)
    return SaddleSystem(
        grid=grid,
        M_alpha=M,
        B_div=B,
        A=A,
        M_p_diag=np.full(grid.num_cells, h2),
        rhs_u=np.zeros(grid.num_edges),
        rhs_p=-h2 * f_cells,
    )
