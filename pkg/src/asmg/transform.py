"""Two-level basis transformation for RT0 edge DOFs.

Every edge of the coarse grid is the union of two fine-grid edges. The
transform maps each such fine pair (u1, u2) to a half-difference
(a fine DOF) and a half-sum (a coarse DOF); fine edges interior to coarse
cells are kept as they are. In matrix form u = J u_hat where the columns
of J carry the +-1/2 pattern (the hat basis vectors are the half-sum and
half-difference combinations) and the inverse carries entries +-1, so
J @ Jinv is the identity bit-exactly.

Hat numbering: interior edges first (in edge-id order), then one
(difference, sum) pair per coarse edge, pairs ordered by coarse edge id.
The same construction applies per subdomain; global and local transforms
are compatible in the sense R_i J = J_i R_hat_i, which is verified at
build time.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .covering import Covering
from .errors import ConfigurationError, InternalError
from .grid import Grid


@dataclass
class DofSplitting:
    """Partition of hat indices into fine (interior + differences) and
    coarse (sums) sets; both sorted ascending."""

    fine: np.ndarray
    coarse: np.ndarray

    @property
    def n1(self) -> int:
        return self.fine.size

    @property
    def n2(self) -> int:
        return self.coarse.size


@dataclass
class LocalTransform:
    J: np.ndarray              # dense local transform, natural x hat
    hat_ids: np.ndarray        # global hat id per local hat position (monotone)
    loc_fine: np.ndarray       # local hat positions of fine DOFs
    loc_coarse: np.ndarray     # local hat positions of coarse DOFs
    gf: np.ndarray             # positions inside the global fine set
    gc: np.ndarray             # global coarse edge ids (sorted)


@dataclass
class TwoLevelTransform:
    grid: Grid
    coarse_grid: Grid
    J: sp.csr_matrix
    Jinv: sp.csr_matrix
    splitting: DofSplitting
    interior: np.ndarray       # fine edge ids not lying on coarse edges
    pair_first: np.ndarray     # per coarse edge id: first fine edge
    pair_second: np.ndarray
    locals: list               # LocalTransform per covering subdomain

    @property
    def num_interior(self) -> int:
        return self.interior.size


def _check_pair(grid_fine: Grid, grid_coarse: Grid):
    if grid_coarse.n * 2 != grid_fine.n:
        raise ConfigurationError(
            f"coarse grid n={grid_coarse.n} is not half of fine n={grid_fine.n}"
        )


def _interior_mask(grid: Grid) -> np.ndarray:
    """Fine edges not contained in any coarse edge: vertical edges on odd
    columns and horizontal edges on odd rows."""
    mask = np.zeros(grid.num_edges, dtype=bool)
    vi = np.arange(grid.num_vedges) % (grid.n + 1)
    mask[: grid.num_vedges] = vi % 2 == 1
    hj = np.arange(grid.num_hedges) // grid.n
    mask[grid.num_vedges :] = hj % 2 == 1
    return mask


def _coarse_pairs(grid_fine: Grid, grid_coarse: Grid):
    """For each coarse edge id, the two fine edge ids it is made of.

    The "first" edge is the one with smaller id; both lie on the coarse
    edge's line, so for vertical edges first means lower row, for
    horizontal edges smaller column.
    """
    nH = grid_coarse.n
    first = np.empty(grid_coarse.num_edges, dtype=np.int64)
    second = np.empty(grid_coarse.num_edges, dtype=np.int64)

    J, I = np.meshgrid(np.arange(nH), np.arange(nH + 1), indexing="ij")
    cid = (J * (nH + 1) + I).ravel()
    first[cid] = grid_fine.vedge_id(2 * I.ravel(), 2 * J.ravel())
    second[cid] = grid_fine.vedge_id(2 * I.ravel(), 2 * J.ravel() + 1)

    J, I = np.meshgrid(np.arange(nH + 1), np.arange(nH), indexing="ij")
    cid = grid_coarse.num_vedges + (J * nH + I).ravel()
    first[cid] = grid_fine.hedge_id(2 * I.ravel(), 2 * J.ravel())
    second[cid] = grid_fine.hedge_id(2 * I.ravel() + 1, 2 * J.ravel())
    return first, second


def _coarse_id_of_edges(grid_fine: Grid, grid_coarse: Grid, edges: np.ndarray) -> np.ndarray:
    """Coarse edge id containing each given non-interior fine edge."""
    nH = grid_coarse.n
    out = np.empty(edges.size, dtype=np.int64)
    vert = edges < grid_fine.num_vedges
    vi = edges[vert] % (grid_fine.n + 1)
    vj = edges[vert] // (grid_fine.n + 1)
    out[vert] = (vj // 2) * (nH + 1) + vi // 2
    he = edges[~vert] - grid_fine.num_vedges
    hi = he % grid_fine.n
    hj = he // grid_fine.n
    out[~vert] = grid_coarse.num_vedges + (hj // 2) * nH + hi // 2
    return out


def build_splitting(grid_fine: Grid, grid_coarse: Grid) -> DofSplitting:
    _check_pair(grid_fine, grid_coarse)
    n_int = grid_fine.num_edges - 2 * grid_coarse.num_edges
    ne_H = grid_coarse.num_edges
    fine = np.concatenate([np.arange(n_int), n_int + 2 * np.arange(ne_H)])
    coarse = n_int + 2 * np.arange(ne_H) + 1
    return DofSplitting(fine=np.sort(fine), coarse=coarse)


def _global_J(grid: Grid, interior: np.ndarray, first: np.ndarray,
              second: np.ndarray):
    n_int = interior.size
    ne_H = first.size
    N = grid.num_edges

    rows = np.concatenate([interior, first, second, first, second])
    cols = np.concatenate(
        [
            np.arange(n_int),
            n_int + 2 * np.arange(ne_H),      # difference columns
            n_int + 2 * np.arange(ne_H),
            n_int + 2 * np.arange(ne_H) + 1,  # sum columns
            n_int + 2 * np.arange(ne_H) + 1,
        ]
    )
    signs = np.concatenate(
        [
            np.ones(ne_H),
            -np.ones(ne_H),
            np.ones(ne_H),
            np.ones(ne_H),
        ]
    )
    # identity on interior DOFs; J carries the +-1/2 pattern on the pairs
    # and the inverse the +-1 pattern, so J @ Jinv is exactly I
    vals = np.concatenate([np.ones(n_int), 0.5 * signs])
    inv_vals = np.concatenate([np.ones(n_int), signs])
    J = sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()
    Jinv = sp.coo_matrix((inv_vals, (cols, rows)), shape=(N, N)).tocsr()
    return J, Jinv


def _local_transform(grid_fine: Grid, grid_coarse: Grid, edges: np.ndarray,
                     interior_mask: np.ndarray, interior_pos: np.ndarray,
                     n_int: int) -> LocalTransform:
    is_int = interior_mask[edges]
    loc_int_edges = edges[is_int]
    paired_edges = edges[~is_int]
    cids = _coarse_id_of_edges(grid_fine, grid_coarse, paired_edges)
    order = np.argsort(cids, kind="stable")
    cids = cids[order]
    paired_edges = paired_edges[order]
    if cids.size % 2 != 0 or np.any(cids[0::2] != cids[1::2]):
        raise InternalError("subdomain splits a coarse-edge pair")
    pair_cids = cids[0::2]
    # within a pair, stable sort by coarse id keeps edge-id order, and the
    # smaller edge id is the "first" member by construction
    e1 = paired_edges[0::2]
    e2 = paired_edges[1::2]

    m = edges.size
    n_loc_int = loc_int_edges.size
    n_pairs = pair_cids.size
    Jloc = np.zeros((m, m))

    hat_ids = np.empty(m, dtype=np.int64)
    int_nat = np.flatnonzero(is_int)
    Jloc[int_nat, np.arange(n_loc_int)] = 1.0
    hat_ids[:n_loc_int] = interior_pos[loc_int_edges]

    l1 = np.searchsorted(edges, e1)
    l2 = np.searchsorted(edges, e2)
    pd = n_loc_int + 2 * np.arange(n_pairs)
    ps = pd + 1
    Jloc[l1, pd] = 0.5
    Jloc[l2, pd] = -0.5
    Jloc[l1, ps] = 0.5
    Jloc[l2, ps] = 0.5
    hat_ids[pd] = n_int + 2 * pair_cids
    hat_ids[ps] = n_int + 2 * pair_cids + 1
    if np.any(np.diff(hat_ids) <= 0):
        raise InternalError("local hat numbering is not monotone")

    loc_fine = np.concatenate([np.arange(n_loc_int), n_loc_int + 2 * np.arange(n_pairs)])
    loc_coarse = n_loc_int + 2 * np.arange(n_pairs) + 1
    return LocalTransform(
        J=Jloc,
        hat_ids=hat_ids,
        loc_fine=loc_fine,
        loc_coarse=loc_coarse,
        gf=np.empty(0, dtype=np.int64),  # filled by build_transform
        gc=pair_cids,
    )


def build_transform(grid_fine: Grid, grid_coarse: Grid, covering: Covering) -> TwoLevelTransform:
    _check_pair(grid_fine, grid_coarse)
    interior_mask = _interior_mask(grid_fine)
    interior = np.flatnonzero(interior_mask)
    n_int = interior.size
    interior_pos = np.full(grid_fine.num_edges, -1, dtype=np.int64)
    interior_pos[interior] = np.arange(n_int)
    first, second = _coarse_pairs(grid_fine, grid_coarse)

    J, Jinv = _global_J(grid_fine, interior, first, second)
    splitting = build_splitting(grid_fine, grid_coarse)

    locals_ = []
    for sub in covering.subdomains:
        lt = _local_transform(grid_fine, grid_coarse, sub.edges,
                              interior_mask, interior_pos, n_int)
        fine_hats = lt.hat_ids[lt.loc_fine]
        lt.gf = np.searchsorted(splitting.fine, fine_hats)
        if np.any(splitting.fine[lt.gf] != fine_hats):
            raise InternalError("local fine DOF missing from global fine set")
        locals_.append(lt)

    tl = TwoLevelTransform(
        grid=grid_fine, coarse_grid=grid_coarse, J=J, Jinv=Jinv,
        splitting=splitting, interior=interior,
        pair_first=first, pair_second=second, locals=locals_,
    )
    _verify_compatibility(tl, covering)
    return tl


def _verify_compatibility(tl: TwoLevelTransform, covering: Covering):
    # R_i J = J_i R_hat_i must hold entrywise; a violation means the local
    # pair bookkeeping disagrees with the global one.
    for sub, lt in zip(covering.subdomains, tl.locals):
        left = tl.J[sub.edges, :].tocsr()
        rows, cols = np.nonzero(lt.J)
        right = sp.coo_matrix(
            (lt.J[rows, cols], (rows, lt.hat_ids[cols])),
            shape=(sub.edges.size, tl.grid.num_edges),
        ).tocsr()
        diff = left - right
        diff.eliminate_zeros()
        if diff.nnz:
            raise InternalError(
                f"incompatible transforms on subdomain {sub.index}"
            )
