"""Auxiliary space multigrid preconditioner.

Pieces, bottom to top:

* PiOperator: the transfer Pi = D^{-1} R Dtilde between the auxiliary
  space (per-subdomain fine blocks plus a shared coarse block) and the
  two-level basis. The solve with D = blockdiag(D_f, I) runs PCG with an
  ILUE preconditioner, or a sparse direct factorization when an exactly
  linear operator is required.
* IlueFactor: incomplete factorization of D_f with exact local factors:
  U = sum_i R_i^T U_i R_i from local Cholesky factors, L = U^T diag(U)^{-1}.
* Gauss-Seidel sweeps in the two-level basis.
* AsmgPreconditioner: the recursive AMLI cycle. apply_C is the pure
  auxiliary space correction; apply_B wraps it with m forward/backward
  Gauss-Seidel sweeps. Coarse corrections run nu inner GCG iterations
  preconditioned by the next level (nu=1 V-cycle, nu=2 W-cycle), a single
  application for the linear variant, or the dense coarsest solve.
* gcg: flexible conjugate gradients with full reorthogonalization of
  search directions, usable with the nonlinear preconditioner.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import la
from .asca import AuxLevel, Hierarchy, aux_offsets
from .errors import (
    BreakdownError,
    ConfigurationError,
    FactorizationError,
    SolverStallError,
)


@dataclass(frozen=True)
class AmliConfig:
    cycle: str = "V"          # "V" or "W"; nu overrides when set
    nu: int = 0               # 0 = derive from cycle
    m: int = 0                # Gauss-Seidel pre/post sweeps per level
    variant: str = "gcg"      # "gcg" (nonlinear) or "linear" (p(t) = 1 - t)
    d_solver: str = "pcg"     # "pcg" or "direct"
    inner_tol: float = 1e-6   # residual reduction for D-solves
    inner_cap: int = 200
    tau: float = 1.0          # relaxation for stationary iteration drivers

    def resolve_nu(self) -> int:
        if self.nu:
            return self.nu
        if self.cycle not in ("V", "W"):
            raise ConfigurationError(f"cycle must be V or W, got {self.cycle!r}")
        return 1 if self.cycle == "V" else 2

    def validate(self):
        if self.m < 0:
            raise ConfigurationError(f"smoothing steps must be >= 0, got {self.m}")
        if self.variant not in ("gcg", "linear"):
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if self.d_solver not in ("pcg", "direct"):
            raise ConfigurationError(f"unknown D-solver {self.d_solver!r}")
        if self.tau < 1.0:
            raise ConfigurationError(f"relaxation tau must be >= 1, got {self.tau}")
        if not (0 < self.inner_tol < 1):
            raise ConfigurationError("inner tolerance must be in (0, 1)")
        self.resolve_nu()


class IlueFactor:
    """B = L U with U the overlap-assembled exact local upper factors."""

    def __init__(self, L: sp.csr_matrix, U: sp.csr_matrix):
        self.L = L
        self.U = U

    def apply(self, y: np.ndarray) -> np.ndarray:
        z = spla.spsolve_triangular(self.L, y, lower=True, unit_diagonal=True)
        return spla.spsolve_triangular(self.U, z, lower=False)


def build_ilue(pieces: list, n: int) -> IlueFactor:
    """pieces: (dense SPD local matrix, global index array) per subdomain.

    Index arrays must be strictly increasing so local upper factors stay
    upper after scattering.
    """
    rows, cols, vals = [], [], []
    for sub_id, (D_i, gidx) in enumerate(pieces):
        try:
            C = np.linalg.cholesky(D_i)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError(
                f"local D piece {sub_id} is singular: {exc}", subdomain=sub_id
            ) from exc
        U_i = C.diagonal()[:, None] * C.T
        m = gidx.size
        rows.append(np.repeat(gidx, m))
        cols.append(np.tile(gidx, m))
        vals.append(U_i.ravel())
    U = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    U.sum_duplicates()
    U = sp.triu(U, format="csr")  # scatter cannot create lower fill; drop zeros
    dU = U.diagonal()
    if np.any(dU <= 0):
        raise FactorizationError("assembled upper factor has a non-positive pivot")
    L = (U.T).multiply(1.0 / dU).tocsr()
    return IlueFactor(L=L, U=U)


class PiOperator:
    """Transfer between the auxiliary space and the two-level basis.

    Auxiliary vectors are flat arrays: all per-subdomain fine blocks
    concatenated, then the shared coarse block.
    """

    def __init__(self, level: AuxLevel, d_solver: str = "pcg",
                 inner_tol: float = 1e-6, inner_cap: int = 200):
        self.level = level
        self.inner_tol = inner_tol
        self.inner_cap = inner_cap
        self.offsets, self.n1t, self.ntot = aux_offsets(level)
        self.n_i: list = []
        self.mode = d_solver
        if d_solver == "direct":
            self._lu = spla.splu(level.D_f.tocsc())
            self.ilue = None
        elif d_solver == "pcg":
            pieces = [(so.A11, so.lt.gf) for so in level.subs]
            self.ilue = build_ilue(pieces, level.n1)
            self._lu = None
        else:
            raise ConfigurationError(f"unknown D-solver {d_solver!r}")

    def solve_d(self, y: np.ndarray) -> np.ndarray:
        """Solve D_f z = y (the fine block of D; the coarse block is I)."""
        if self._lu is not None:
            x = self._lu.solve(y)
            # refine once; see la.solve for the conditioning rationale
            return x + self._lu.solve(y - self.level.D_f @ x)
        if not np.any(y):
            return np.zeros_like(y)
        from .solvers import pcg  # deferred to keep module layering acyclic

        x, report = pcg(self.level.D_f, self.ilue.apply, y,
                        tol=self.inner_tol, max_iter=self.inner_cap)
        self.n_i.append(report.iterations)
        if not report.converged:
            raise SolverStallError(
                f"inner PCG on D stalled at level {self.level.k}",
                iterations=report.iterations,
                residual=report.residuals[-1] if report.residuals else None,
            )
        return x

    # aux-space building blocks
    def apply_r(self, v_aux: np.ndarray) -> tuple:
        out_f = np.zeros(self.level.n1)
        for so, off in zip(self.level.subs, self.offsets[:-1]):
            s = so.lt.gf.size
            # indices are unique within one subdomain, so += accumulates
            out_f[so.lt.gf] += v_aux[off : off + s]
        return out_f, v_aux[self.n1t :].copy()

    def apply_rt(self, v_f: np.ndarray, v_c: np.ndarray) -> np.ndarray:
        out = np.empty(self.ntot)
        for so, off in zip(self.level.subs, self.offsets[:-1]):
            out[off : off + so.lt.gf.size] = v_f[so.lt.gf]
        out[self.n1t :] = v_c
        return out

    def apply_dtilde(self, v_aux: np.ndarray) -> np.ndarray:
        out = np.empty(self.ntot)
        for so, off in zip(self.level.subs, self.offsets[:-1]):
            s = so.lt.gf.size
            out[off : off + s] = so.A11 @ v_aux[off : off + s]
        out[self.n1t :] = v_aux[self.n1t :]
        return out

    def apply_pi(self, v_aux: np.ndarray) -> np.ndarray:
        """Pi v = D^{-1} R Dtilde v, a two-level-basis vector."""
        y_f, y_c = self.apply_r(self.apply_dtilde(v_aux))
        split = self.level.transform.splitting
        out = np.empty(split.n1 + split.n2)
        out[split.fine] = self.solve_d(y_f)
        out[split.coarse] = y_c
        return out

    def apply_pi_t(self, v_hat: np.ndarray) -> np.ndarray:
        """Pi^T v = Dtilde R^T D^{-1} v, an auxiliary-space vector."""
        split = self.level.transform.splitting
        w_f = self.solve_d(v_hat[split.fine])
        return self.apply_dtilde(self.apply_rt(w_f, v_hat[split.coarse]))

    def apply_pi_aux(self, v_aux: np.ndarray) -> np.ndarray:
        """pi = R^T Pi, the auxiliary-space projection whose Atilde-norm
        bounds the two-grid condition number."""
        v_hat = self.apply_pi(v_aux)
        split = self.level.transform.splitting
        return self.apply_rt(v_hat[split.fine], v_hat[split.coarse])

    def apply_pi_aux_t(self, v_aux: np.ndarray) -> np.ndarray:
        """pi^T = Pi^T R."""
        y_f, y_c = self.apply_r(v_aux)
        split = self.level.transform.splitting
        hat = np.empty(split.n1 + split.n2)
        hat[split.fine] = y_f
        hat[split.coarse] = y_c
        return self.apply_pi_t(hat)


def apply_pi(pi: PiOperator, v_aux: np.ndarray) -> np.ndarray:
    return pi.apply_pi(v_aux)


def apply_pi_T(pi: PiOperator, v_hat: np.ndarray) -> np.ndarray:
    return pi.apply_pi_t(v_hat)


def smooth(A: sp.csr_matrix, x: np.ndarray, b: np.ndarray, m: int,
           backward: bool = False, tri: sp.csr_matrix = None) -> np.ndarray:
    """m Gauss-Seidel sweeps on A x = b starting from x."""
    if m == 0:
        return x
    if tri is None:
        tri = sp.triu(A, format="csr") if backward else sp.tril(A, format="csr")
    if np.any(tri.diagonal() == 0):
        raise FactorizationError("zero diagonal entry in Gauss-Seidel sweep")
    for _ in range(m):
        x = x + spla.spsolve_triangular(tri, b - A @ x, lower=not backward)
    return x


def symmetrized_smooth(A: sp.csr_matrix, x: np.ndarray, b: np.ndarray,
                       m: int = 1) -> np.ndarray:
    """Forward then backward sweeps; realizes the symmetrized smoother."""
    x = smooth(A, x, b, m, backward=False)
    return smooth(A, x, b, m, backward=True)


@dataclass
class GcgResult:
    iterations: int
    residuals: list
    converged: bool


def gcg(apply_A, apply_M, b: np.ndarray, nu: int = 0, tol: float = 0.0,
        max_iter: int = 200, level: int = None):
    """Generalized (flexible) CG with full reorthogonalization.

    Runs exactly `nu` iterations when nu > 0 (AMLI stabilization mode),
    otherwise iterates until the residual drops by `tol` relative to the
    right-hand side. The preconditioner may be nonlinear.
    """
    x = np.zeros_like(b)
    r = b.copy()
    norm0 = np.linalg.norm(r)
    residuals = [norm0]
    if norm0 == 0.0:
        return x, GcgResult(iterations=0, residuals=residuals, converged=True)
    dirs, adirs, paps = [], [], []
    limit = nu if nu > 0 else max_iter
    converged = False
    for _ in range(limit):
        if nu == 0 and residuals[-1] <= tol * norm0:
            converged = True
            break
        if residuals[-1] == 0.0:
            converged = True
            break
        z = apply_M(r)
        p = z
        for pj, apj, papj in zip(dirs, adirs, paps):
            p = p - (np.dot(z, apj) / papj) * pj
        ap = apply_A(p)
        pap = np.dot(p, ap)
        if pap <= 0.0:
            raise BreakdownError(
                f"non-positive curvature {pap:.3e} in GCG", level=level
            )
        alpha = np.dot(p, r) / pap
        x = x + alpha * p
        r = r - alpha * ap
        dirs.append(p)
        adirs.append(ap)
        paps.append(pap)
        residuals.append(np.linalg.norm(r))
    else:
        converged = bool(nu > 0 or residuals[-1] <= tol * norm0)
    return x, GcgResult(iterations=len(dirs), residuals=residuals,
                        converged=converged)


class AsmgPreconditioner:
    """Recursive AMLI-cycle preconditioner over a built hierarchy."""

    def __init__(self, hierarchy: Hierarchy, config: AmliConfig = AmliConfig()):
        config.validate()
        self.hierarchy = hierarchy
        self.config = config
        self.nu = config.resolve_nu()
        self.pis = [
            PiOperator(level, d_solver=config.d_solver,
                       inner_tol=config.inner_tol, inner_cap=config.inner_cap)
            for level in hierarchy.levels
        ]
        self.tris = []
        for level in hierarchy.levels:
            if config.m > 0:
                self.tris.append(
                    (sp.tril(level.A_hat, format="csr"),
                     sp.triu(level.A_hat, format="csr"))
                )
            else:
                self.tris.append(None)

    # statistics
    def reset_stats(self):
        for pi in self.pis:
            pi.n_i.clear()

    def max_n_i(self) -> int:
        counts = [max(pi.n_i) for pi in self.pis if pi.n_i]
        return max(counts) if counts else 0

    def apply(self, r: np.ndarray) -> np.ndarray:
        """Preconditioner action in the natural edge basis at level 0."""
        if not self.hierarchy.levels:
            return la.solve(self.hierarchy.coarsest, r)
        J0 = self.hierarchy.levels[0].transform.J
        return J0 @ self.apply_B(0, J0.T @ r)

    def apply_C(self, k: int, dhat: np.ndarray) -> np.ndarray:
        """Auxiliary space correction at level k (two-level basis)."""
        level = self.hierarchy.levels[k]
        pi = self.pis[k]
        split = level.transform.splitting

        w_f = pi.solve_d(dhat[split.fine])
        q2 = dhat[split.coarse].copy()

        p1 = []
        g = q2
        for so in level.subs:
            q1_i = so.A11 @ w_f[so.lt.gf]
            p1_i = so.solve11(q1_i)
            p1.append(p1_i)
            g[so.lt.gc] -= so.A12.T @ p1_i

        p2 = self._coarse_correct(k, g)

        y_f = np.zeros(level.n1)
        for so, p1_i in zip(level.subs, p1):
            q1_i = p1_i - so.solve11(so.A12 @ p2[so.lt.gc])
            y_f[so.lt.gf] += so.A11 @ q1_i

        out = np.empty(split.n1 + split.n2)
        out[split.fine] = pi.solve_d(y_f)
        out[split.coarse] = p2
        return out

    def apply_B(self, k: int, dhat: np.ndarray) -> np.ndarray:
        """Smoothed cycle at level k; equals apply_C when m = 0."""
        m = self.config.m
        if m == 0:
            return self.apply_C(k, dhat)
        level = self.hierarchy.levels[k]
        lower, upper = self.tris[k]
        A_hat = level.A_hat
        u = smooth(A_hat, np.zeros_like(dhat), dhat, m, tri=lower)
        v = u + self.apply_C(k, dhat - A_hat @ u)
        return smooth(A_hat, v, dhat, m, backward=True, tri=upper)

    def _coarse_correct(self, k: int, g: np.ndarray) -> np.ndarray:
        """Approximate A^(k+1)^{-1} g in the natural basis of level k+1."""
        if k + 1 == self.hierarchy.depth:
            return la.solve(self.hierarchy.coarsest, g)
        Jc = self.hierarchy.levels[k + 1].transform.J
        ghat = Jc.T @ g
        if self.config.variant == "linear":
            xhat = self.apply_B(k + 1, ghat)
        else:
            A_next = self.hierarchy.levels[k + 1].A_hat
            xhat, _ = gcg(
                lambda v: A_next @ v,
                lambda r: self.apply_B(k + 1, r),
                ghat, nu=self.nu, level=k + 1,
            )
        return Jc @ xhat
