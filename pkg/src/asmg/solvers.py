"""Outer Krylov solvers and the block-diagonal saddle-point preconditioner.

minres implements the standard preconditioned Lanczos/Givens recurrence;
the per-iteration quantity phibar is the residual norm in the inverse
preconditioner inner product, which is monotone by construction and
drives the stopping test. The true residual is re-checked after the loop.
"""

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConfigurationError
from .fem import SaddleSystem
from .precond import AsmgPreconditioner, gcg


@dataclass
class SolveReport:
    iterations: int
    residuals: list
    converged: bool
    wall_time: float = 0.0
    n_asmg_max: int = 0
    n_i_max: int = 0
    true_residual: float = float("nan")

    @property
    def rho_r(self) -> float:
        if self.iterations < 1 or not self.residuals or self.residuals[0] == 0:
            return float("nan")
        return float(
            (self.residuals[-1] / self.residuals[0]) ** (1.0 / self.iterations)
        )


def _as_operator(A):
    if callable(A):
        return A
    return lambda v: A @ v


def pcg(A, precond, b: np.ndarray, tol: float = 1e-8, max_iter: int = 500,
        x0: np.ndarray = None):
    """Preconditioned conjugate gradients; stops on ||r|| <= tol ||b||
    (||r0|| when b = 0 and a nonzero initial guess is given)."""
    apply_A = _as_operator(A)
    apply_M = _as_operator(precond) if precond is not None else (lambda r: r)
    t0 = time.perf_counter()
    x = np.zeros_like(b) if x0 is None else x0.astype(float).copy()
    r = b - apply_A(x) if x0 is not None else b.copy()
    norm_b = np.linalg.norm(b)
    ref = norm_b if norm_b > 0 else np.linalg.norm(r)
    residuals = [np.linalg.norm(r)]
    if ref == 0.0 or residuals[0] <= tol * ref:
        return x, SolveReport(0, residuals, True, time.perf_counter() - t0,
                              true_residual=residuals[0])
    z = apply_M(r)
    p = z.copy()
    rz = np.dot(r, z)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        ap = apply_A(p)
        alpha = rz / np.dot(p, ap)
        x += alpha * p
        r -= alpha * ap
        residuals.append(np.linalg.norm(r))
        if residuals[-1] <= tol * ref:
            converged = True
            break
        z = apply_M(r)
        rz_new = np.dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    true_res = np.linalg.norm(b - apply_A(x)) / ref
    return x, SolveReport(it, residuals, converged,
                          time.perf_counter() - t0, true_residual=true_res)


def minres(saddle: SaddleSystem, precond, tol: float = 1e-8,
           max_iter: int = 500, x0: np.ndarray = None):
    """Preconditioned MinRes on the indefinite block system.

    Returns (u, p, SolveReport). The iteration stops when the residual
    norm in the inverse-preconditioner inner product has dropped by tol
    relative to its initial value.
    """
    K = saddle.matrix()
    b = saddle.rhs()
    apply_P = precond.apply if hasattr(precond, "apply") else _as_operator(precond)
    nu_dofs = saddle.grid.num_edges
    t0 = time.perf_counter()

    x = np.zeros_like(b) if x0 is None else x0.astype(float).copy()
    r1 = b - K @ x if x0 is not None else b.copy()
    y = apply_P(r1)
    beta1_sq = np.dot(r1, y)
    if beta1_sq < 0:
        raise ConfigurationError("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1_sq)
    residuals = [beta1]
    if beta1 == 0.0:
        report = _finish_report(saddle, precond, K, b, x, residuals, True, t0)
        return x[:nu_dofs], x[nu_dofs:], report

    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs = -1.0
    sn = 0.0
    w = np.zeros_like(b)
    w2 = np.zeros_like(b)
    r2 = r1
    converged = False

    itn = 0
    for itn in range(1, max_iter + 1):
        v = y / beta
        y = K @ v
        if itn >= 2:
            y -= (beta / oldb) * r1
        alfa = np.dot(v, y)
        y -= (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = apply_P(r2)
        oldb = beta
        beta_sq = np.dot(r2, y)
        if beta_sq < 0:
            raise ConfigurationError("preconditioner lost positive definiteness")
        beta = np.sqrt(beta_sq)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.sqrt(gbar * gbar + beta * beta), np.finfo(float).eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        residuals.append(phibar)
        if phibar <= tol * beta1:
            converged = True
            break

    report = _finish_report(saddle, precond, K, b, x, residuals, converged, t0)
    return x[:nu_dofs], x[nu_dofs:], report


def _finish_report(saddle, precond, K, b, x, residuals, converged, t0):
    true_res = np.linalg.norm(b - K @ x)
    norm_b = np.linalg.norm(b)
    report = SolveReport(
        iterations=len(residuals) - 1,
        residuals=residuals,
        converged=converged,
        wall_time=time.perf_counter() - t0,
        true_residual=true_res / norm_b if norm_b > 0 else true_res,
    )
    if hasattr(precond, "stats"):
        report.n_asmg_max, report.n_i_max = precond.stats()
    return report


class BlockPreconditioner:
    """Block-diagonal preconditioner: an H(div) solve on the velocity
    block, the inverse diagonal pressure mass on the pressure block.

    velocity modes:
      "solve": GCG preconditioned by the ASMG cycle, run until the
               residual drops by the factor varpi (records iteration
               counts);
      "apply": a single ASMG application;
      "exact": sparse direct solve (testing).
    """

    def __init__(self, saddle: SaddleSystem, velocity, mode: str = "solve",
                 varpi: float = 1e8, max_inner: int = 200):
        self.saddle = saddle
        self.mode = mode
        self.varpi = varpi
        self.max_inner = max_inner
        self.n_asmg: list = []
        if mode == "exact":
            self._lu = spla.splu(saddle.A.tocsc())
            self.asmg = None
        elif mode in ("solve", "apply"):
            if not isinstance(velocity, AsmgPreconditioner) and not callable(velocity):
                raise ConfigurationError("velocity block needs an ASMG preconditioner")
            self.asmg = velocity
            self._lu = None
        else:
            raise ConfigurationError(f"unknown velocity mode {mode!r}")

    def _solve_velocity(self, r: np.ndarray) -> np.ndarray:
        if self.mode == "exact":
            return self._lu.solve(r)
        apply_asmg = self.asmg.apply if hasattr(self.asmg, "apply") else self.asmg
        if self.mode == "apply":
            return apply_asmg(r)
        x, info = gcg(lambda v: self.saddle.A @ v, apply_asmg, r,
                      tol=1.0 / self.varpi, max_iter=self.max_inner)
        self.n_asmg.append(info.iterations)
        return x

    def apply(self, r: np.ndarray) -> np.ndarray:
        nu = self.saddle.grid.num_edges
        out = np.empty_like(r)
        out[:nu] = self._solve_velocity(r[:nu])
        out[nu:] = r[nu:] / self.saddle.M_p_diag
        return out

    def stats(self) -> tuple:
        n_asmg = max(self.n_asmg) if self.n_asmg else 0
        n_i = 0
        if self.asmg is not None and hasattr(self.asmg, "max_n_i"):
            n_i = self.asmg.max_n_i()
        return n_asmg, n_i

    def reset_stats(self):
        self.n_asmg.clear()
        if self.asmg is not None and hasattr(self.asmg, "reset_stats"):
            self.asmg.reset_stats()
