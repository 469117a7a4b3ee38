"""Additive Schur complement approximation and the multilevel hierarchy.

Each level carries a covering by overlapping subdomains, local matrices
A_i with exact splitting sum_i R_i^T A_i R_i = A, the two-level transform
and per-subdomain transformed blocks, the local Schur complements S_i,
and their scatter-assembled sum Q. The coarse-level matrix is Q itself
(A^(k+1) := Q^(k), same object), which makes the construction recursive:
Q is structurally an RT0 edge matrix on the coarse grid.

Coarse levels need local matrices too. They are not re-assembled from
elements; instead every Schur piece S_i (supported on the closed edge
block of a coarse cell footprint) is handed to each coarse-level
subdomain whose cell range contains that footprint, weighted by one over
the number of such subdomains. The weights are 1, 1/2 or 1/4, so the
splitting identity stays exact and every local matrix remains SPD
(each block edge is covered by at least one SPD piece).
"""

from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import la
from .coeff import CoefficientField
from .covering import Covering, Subdomain, assemble_local, build_covering
from .errors import ConfigurationError, FactorizationError, InternalError
from .fem import assemble_velocity
from .grid import Grid, build_grid
from .transform import LocalTransform, TwoLevelTransform, build_transform


@dataclass
class SubdomainOperator:
    """Transformed blocks of one subdomain's local matrix."""

    sub: Subdomain
    lt: LocalTransform
    A11: np.ndarray
    A12: np.ndarray
    A22: np.ndarray
    chol11: la.DenseFactor
    schur: np.ndarray

    def solve11(self, b: np.ndarray) -> np.ndarray:
        return la.solve(self.chol11, b)


@dataclass
class SchurPiece:
    """A local Schur complement viewed as a coarse-grid edge matrix."""

    matrix: np.ndarray
    origin: tuple  # in coarse cells
    size: int
    edge_ids: np.ndarray  # coarse edge ids (sorted)


@dataclass
class AuxLevel:
    k: int
    grid: Grid
    coarse_grid: Grid
    A: sp.csr_matrix
    covering: Covering
    transform: TwoLevelTransform
    A_hat: sp.csr_matrix
    subs: list
    Q: sp.csr_matrix
    D_f: sp.csr_matrix

    @property
    def n1(self) -> int:
        return self.transform.splitting.n1

    @property
    def n2(self) -> int:
        return self.transform.splitting.n2


@dataclass(frozen=True)
class HierarchyConfig:
    sub_cells: int = 8
    stride: int = 4
    coarsest_n: int = 4


@dataclass
class Hierarchy:
    grid: Grid
    config: HierarchyConfig
    levels: list
    matrices: list = dc_field(repr=False)  # A^(0..l); matrices[k+1] is levels[k].Q
    coarsest: la.DenseFactor = dc_field(repr=False)

    @property
    def depth(self) -> int:
        return len(self.levels)


def local_schur(A_hat_i: np.ndarray, lt: LocalTransform):
    """Blocks, factorization and Schur complement of one transformed
    local matrix. Returns (S_i, chol(A11), A11, A12, A22)."""
    f, c = lt.loc_fine, lt.loc_coarse
    A11 = A_hat_i[np.ix_(f, f)]
    A12 = A_hat_i[np.ix_(f, c)]
    A22 = A_hat_i[np.ix_(c, c)]
    chol = la.dense_cholesky(A11)
    X = la.solve(chol, A12)
    S = A22 - A12.T @ X
    S = 0.5 * (S + S.T)
    return S, chol, A11, A12, A22


def build_asca(subs: list, n2: int) -> sp.csr_matrix:
    """Q = sum_i R_{i:2}^T S_i R_{i:2}, scatter-assembled."""
    rows, cols, vals = [], [], []
    for so in subs:
        gc = so.lt.gc
        m = gc.size
        rows.append(np.repeat(gc, m))
        cols.append(np.tile(gc, m))
        vals.append(so.schur.ravel())
    Q = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n2, n2),
    ).tocsr()
    Q.sum_duplicates()
    return Q


def _build_d_fine(subs: list, n1: int) -> sp.csr_matrix:
    """D_f = sum_i R_{i:1}^T A_{i:11} R_{i:1} on the global fine hat set."""
    rows, cols, vals = [], [], []
    for so in subs:
        gf = so.lt.gf
        m = gf.size
        rows.append(np.repeat(gf, m))
        cols.append(np.tile(gf, m))
        vals.append(so.A11.ravel())
    D = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n1, n1),
    ).tocsr()
    D.sum_duplicates()
    D.eliminate_zeros()
    return D


def _build_level(k: int, grid: Grid, A: sp.csr_matrix, local_mats: list,
                 covering: Covering) -> AuxLevel:
    coarse_grid = build_grid(grid.n // 2)
    transform = build_transform(grid, coarse_grid, covering)
    A_hat = la.triple_product(transform.J.T, A, transform.J)

    subs = []
    for sub, lt, A_i in zip(covering.subdomains, transform.locals, local_mats):
        A_hat_i = lt.J.T @ A_i @ lt.J
        A_hat_i = 0.5 * (A_hat_i + A_hat_i.T)
        try:
            S, chol, A11, A12, A22 = local_schur(A_hat_i, lt)
        except FactorizationError as exc:
            raise FactorizationError(
                f"local matrix of subdomain {sub.index} at level {k} "
                f"not SPD ({exc})", pivot=exc.pivot, subdomain=sub.index,
            ) from exc
        subs.append(SubdomainOperator(sub=sub, lt=lt, A11=A11, A12=A12,
                                      A22=A22, chol11=chol, schur=S))

    splitting = transform.splitting
    Q = build_asca(subs, splitting.n2)
    D_f = _build_d_fine(subs, splitting.n1)
    return AuxLevel(k=k, grid=grid, coarse_grid=coarse_grid, A=A,
                    covering=covering, transform=transform, A_hat=A_hat,
                    subs=subs, Q=Q, D_f=D_f)


def _pieces_of(level: AuxLevel) -> list:
    pieces = []
    for so in level.subs:
        i0, j0 = so.sub.origin
        pieces.append(SchurPiece(matrix=so.schur, origin=(i0 // 2, j0 // 2),
                                 size=so.sub.size // 2, edge_ids=so.lt.gc))
    return pieces


def _assemble_from_pieces(covering: Covering, pieces: list) -> list:
    """Distribute Schur pieces to the subdomains containing their cell
    footprint, with 1/count weights (counts are powers of two)."""
    assignments = [[] for _ in covering.subdomains]
    for piece in pieces:
        holders = []
        for j, sub in enumerate(covering.subdomains):
            a0, b0 = sub.origin
            if (a0 <= piece.origin[0] and piece.origin[0] + piece.size <= a0 + sub.size
                    and b0 <= piece.origin[1] and piece.origin[1] + piece.size <= b0 + sub.size):
                holders.append(j)
        if not holders:
            raise InternalError(
                f"Schur piece at {piece.origin} size {piece.size} fits no subdomain"
            )
        w = 1.0 / len(holders)
        for j in holders:
            assignments[j].append((piece, w))

    local_mats = []
    for sub, assigned in zip(covering.subdomains, assignments):
        m = sub.edges.size
        A_j = np.zeros((m, m))
        for piece, w in assigned:
            loc = sub.local_index_of(piece.edge_ids)
            A_j[np.ix_(loc, loc)] += w * piece.matrix
        local_mats.append(A_j)
    return local_mats


def build_hierarchy(grid: Grid, field: CoefficientField, levels: int,
                    config: HierarchyConfig = HierarchyConfig()) -> Hierarchy:
    """Build the full hierarchy with `levels` coarsening steps.

    The coarsest grid must keep at least config.coarsest_n cells per side;
    its matrix is factorized densely.
    """
    if levels < 0:
        raise ConfigurationError(f"levels must be >= 0, got {levels}")
    if grid.n >> levels < config.coarsest_n or grid.n % (1 << levels) != 0:
        raise ConfigurationError(
            f"cannot coarsen n={grid.n} {levels} times with coarsest "
            f"size {config.coarsest_n}"
        )

    A = assemble_velocity(grid, field)
    matrices = [A]
    level_list = []
    cur_grid = grid
    pieces = None
    for k in range(levels):
        covering = build_covering(cur_grid, config.sub_cells, config.stride)
        if k == 0:
            local_mats = [
                assemble_local(cur_grid, field, sub, covering.multiplicity)
                for sub in covering.subdomains
            ]
        else:
            local_mats = _assemble_from_pieces(covering, pieces)
        level = _build_level(k, cur_grid, matrices[k], local_mats, covering)
        level_list.append(level)
        matrices.append(level.Q)
        pieces = _pieces_of(level)
        cur_grid = level.coarse_grid

    coarsest = la.dense_cholesky(matrices[-1].toarray())
    return Hierarchy(grid=grid, config=config, levels=level_list,
                     matrices=matrices, coarsest=coarsest)


def assemble_aux_dense(level: AuxLevel) -> np.ndarray:
    """Dense auxiliary matrix (test/diagnostic use; inflated dimension)."""
    sizes = [so.lt.loc_fine.size for so in level.subs]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n1t = int(offsets[-1])
    n2 = level.n2
    At = np.zeros((n1t + n2, n1t + n2))
    for so, off in zip(level.subs, offsets[:-1]):
        s = so.lt.loc_fine.size
        gc = so.lt.gc
        At[off : off + s, off : off + s] = so.A11
        At[off : off + s, n1t + gc] = so.A12
        At[n1t + gc, off : off + s] = so.A12.T
        At[np.ix_(n1t + gc, n1t + gc)] += so.A22
    return At


def assemble_aux_sparse(level: AuxLevel) -> sp.csr_matrix:
    """Sparse auxiliary matrix for iterative estimators."""
    sizes = [so.lt.loc_fine.size for so in level.subs]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    n1t = int(offsets[-1])
    n2 = level.n2
    rows, cols, vals = [], [], []
    for so, off in zip(level.subs, offsets[:-1]):
        s = so.lt.loc_fine.size
        gc = n1t + so.lt.gc
        loc = off + np.arange(s)
        rows.append(np.repeat(loc, s))
        cols.append(np.tile(loc, s))
        vals.append(so.A11.ravel())
        rows.append(np.repeat(loc, gc.size))
        cols.append(np.tile(gc, s))
        vals.append(so.A12.ravel())
        rows.append(np.repeat(gc, s))
        cols.append(np.tile(loc, gc.size))
        vals.append(so.A12.T.ravel())
        rows.append(np.repeat(gc, gc.size))
        cols.append(np.tile(gc, gc.size))
        vals.append(so.A22.ravel())
    At = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n1t + n2, n1t + n2),
    ).tocsr()
    At.sum_duplicates()
    return At


def aux_offsets(level: AuxLevel):
    """Flat layout of auxiliary vectors: per-subdomain fine blocks, then
    the shared coarse block. Returns (offsets, total_fine, total)."""
    sizes = [so.lt.loc_fine.size for so in level.subs]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    n1t = int(offsets[-1])
    return offsets, n1t, n1t + level.n2
