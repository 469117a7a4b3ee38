"""Diagnostics, experiment configuration, and the batch runner.

The quality measures live here: average residual reduction, the norm of
the error propagation operator of the linear cycle, the auxiliary-space
projection norm that bounds the two-grid condition number, and operator
complexity with the per-column sparsity bound on the coarse matrix.
"""

import csv
import io
import time
from dataclasses import dataclass, field as dc_field, fields as dc_fields

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .asca import (
    AuxLevel,
    Hierarchy,
    HierarchyConfig,
    assemble_aux_dense,
    assemble_aux_sparse,
    aux_offsets,
    build_hierarchy,
)
from .coeff import (
    CoefficientField,
    gen_binary_islands,
    gen_random_field,
    load_raster,
    resample,
    rescale,
    write_raster,
)
from .errors import ConfigurationError
from .fem import assemble_saddle
from .grid import build_grid
from .precond import AmliConfig, AsmgPreconditioner, PiOperator, gcg
from .solvers import BlockPreconditioner, minres

# Base mesh on which case [b] exponents are sampled; finer benchmark meshes
# refine this field rather than redraw it.
RANDOM_BASE_N = 16


def rho_r(residuals) -> float:
    """Average residual reduction factor (||r_n|| / ||r_0||)^(1/n)."""
    if len(residuals) < 2:
        raise ConfigurationError("need at least the initial and one residual")
    if residuals[0] == 0:
        raise ConfigurationError("initial residual is zero")
    n = len(residuals) - 1
    return float((residuals[-1] / residuals[0]) ** (1.0 / n))


@dataclass
class PowerEstimate:
    value: float
    iterations: int
    converged: bool


def estimate_rho_e(A: sp.csr_matrix, apply_C, tol: float = 1e-4,
                   max_iter: int = 400, seed: int = 1234) -> PowerEstimate:
    """A-norm of E = I - C^{-1}A by power iteration in the A inner product.

    C must be linear and symmetric; E is then A-self-adjoint and the
    Rayleigh quotient converges to the extremal eigenvalue.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(A.shape[0])
    av = A @ v
    vav = np.dot(v, av)
    lam_prev = 0.0
    for it in range(1, max_iter + 1):
        w = v - apply_C(av)
        aw = A @ w
        lam = np.dot(v, aw) / vav
        waw = np.dot(w, aw)
        if waw <= vav * np.finfo(float).eps:
            # the error operator contracted to round-off in one step; the
            # Rayleigh quotient is pure noise from here, so report the
            # measured factor instead of iterating on it
            value = float(np.sqrt(max(waw, 0.0) / vav))
            return PowerEstimate(value=value, iterations=it, converged=True)
        v = w / np.sqrt(waw)
        av = A @ v
        vav = np.dot(v, av)
        if it > 1 and abs(lam - lam_prev) <= tol * max(abs(lam), 1e-30):
            return PowerEstimate(value=float(abs(lam)), iterations=it,
                                 converged=True)
        lam_prev = lam
    return PowerEstimate(value=float(abs(lam_prev)), iterations=max_iter,
                         converged=False)


def _dense_r_dtilde(level: AuxLevel):
    """Dense transfer R and block matrix Dtilde of one level (small sizes)."""
    offsets, n1t, ntot = aux_offsets(level)
    split = level.transform.splitting
    N = split.n1 + split.n2
    R = np.zeros((N, ntot))
    Dt = np.zeros((ntot, ntot))
    for so, off in zip(level.subs, offsets[:-1]):
        s = so.lt.gf.size
        R[split.fine[so.lt.gf], off + np.arange(s)] = 1.0
        Dt[off : off + s, off : off + s] = so.A11
    R[split.coarse, n1t + np.arange(split.n2)] = 1.0
    Dt[n1t:, n1t:] = np.eye(split.n2)
    return R, Dt


def estimate_c_pi(level: AuxLevel, dense_cap: int = 4000,
                  tol: float = 1e-6) -> float:
    """The squared Atilde-norm of the projection pi = R^T (R Dtilde R^T)^{-1} R Dtilde.

    Dense generalized eigenvalue computation up to dense_cap auxiliary
    dimensions, a shift-free Lanczos estimate above it. Both paths build
    the projection from scratch, independent of the preconditioner code.
    """
    offsets, n1t, ntot = aux_offsets(level)
    if ntot <= dense_cap:
        At = assemble_aux_dense(level)
        R, Dt = _dense_r_dtilde(level)
        RD = R @ Dt
        D = RD @ R.T
        pi = R.T @ np.linalg.solve(D, RD)
        B = pi.T @ At @ pi
        B = 0.5 * (B + B.T)
        vals = scipy.linalg.eigh(B, 0.5 * (At + At.T), eigvals_only=True)
        return float(vals[-1])

    At = assemble_aux_sparse(level)
    pi_op = PiOperator(level, d_solver="direct")
    lu = spla.splu(At.tocsc())

    def b_mat(v):
        u = pi_op.apply_pi_aux(v)
        w = At @ u
        return pi_op.apply_pi_aux_t(w)

    B = spla.LinearOperator((ntot, ntot), matvec=b_mat, dtype=float)
    Minv = spla.LinearOperator((ntot, ntot), matvec=lu.solve, dtype=float)
    vals = spla.eigsh(B, k=1, M=At, Minv=Minv, which="LA", tol=tol,
                      return_eigenvectors=False)
    return float(vals[0])


@dataclass
class ComplexityReport:
    dims: list
    nnzs: list
    ratio: float
    column_bound_ok: bool
    worst_slack: int


def operator_complexity(hierarchy: Hierarchy) -> ComplexityReport:
    """Total nonzeros across levels relative to the finest matrix, plus
    the per-column sparsity bound on every coarse-level matrix."""
    dims = [int(A.shape[0]) for A in hierarchy.matrices]
    nnzs = [int(A.nnz) for A in hierarchy.matrices]
    ratio = float(sum(nnzs)) / nnzs[0]

    ok = True
    worst = np.iinfo(np.int64).max
    for level, Q in zip(hierarchy.levels, hierarchy.matrices[1:]):
        bound = np.zeros(Q.shape[0], dtype=np.int64)
        for so in level.subs:
            bound[so.lt.gc] += so.lt.gc.size
        counts = np.diff(Q.tocsc().indptr)
        slack = bound - counts
        worst = min(worst, int(slack.min()))
        if np.any(slack < 0):
            ok = False
    if not hierarchy.levels:
        worst = 0
    return ComplexityReport(dims=dims, nnzs=nnzs, ratio=ratio,
                            column_bound_ok=ok, worst_slack=worst)


def stationary_error_reduction(A: sp.csr_matrix, apply_C, reduction: float = 1e8,
                               max_iter: int = 25, tau: float = 1.0,
                               seed: int = 99) -> tuple:
    """Run x <- x + tau^{-1} C (0 - A x) from a random start on A x = 0 and
    report how many steps the A-norm of the error needs to drop by the
    given factor. Returns (iterations or -1, error history)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.standard_normal(A.shape[0])
    e0 = np.sqrt(np.dot(x, A @ x))
    history = [e0]
    for it in range(1, max_iter + 1):
        x = x - apply_C(A @ x) / tau
        e = np.sqrt(max(np.dot(x, A @ x), 0.0))
        history.append(e)
        if e <= e0 / reduction:
            return it, history
    return -1, history


# --- experiment configuration ------------------------------------------------

_CONFIG_TYPES = {
    "study": str, "case": str, "n": int, "levels": int, "q": int,
    "seed": int, "cycle": str, "nu": int, "m": int, "varpi": float,
    "tol": float, "tau": float, "inner_tol": float, "rhs_c": float,
    "coeff_file": str, "out": str, "sub_cells": int, "stride": int,
    "max_iter": int, "cpi": bool, "rhoe": bool, "complexity": bool,
}


@dataclass
class ExperimentConfig:
    study: str = "run"
    case: str = "b"
    n: int = 64
    levels: int = -1  # -1: coarsen down to the 4x4 grid
    q: int = 0
    seed: int = 0
    cycle: str = "V"
    nu: int = 0
    m: int = 0
    varpi: float = 1e8
    tol: float = 1e-8
    tau: float = 1.0
    inner_tol: float = 1e-6
    rhs_c: float = 0.0
    coeff_file: str = ""
    out: str = ""
    sub_cells: int = 8
    stride: int = 4
    max_iter: int = 200
    cpi: bool = False
    rhoe: bool = False
    complexity: bool = False

    def validate(self):
        if self.study not in ("run", "minres", "diag", "gen"):
            raise ConfigurationError(f"unknown study {self.study!r}")
        if self.case not in ("a", "b", "c"):
            raise ConfigurationError(f"case must be a, b or c, got {self.case!r}")
        if self.q < 0 or self.q > 16:
            raise ConfigurationError(f"contrast exponent out of range: {self.q}")
        if self.levels < -1:
            raise ConfigurationError(f"levels must be >= 0, got {self.levels}")
        if self.tol <= 0 or self.varpi < 1:
            raise ConfigurationError("tol must be positive and varpi >= 1")
        if self.case == "c" and not self.coeff_file:
            raise ConfigurationError("case c needs --coeff-file with a raster")

    def to_text(self) -> str:
        lines = []
        for f in dc_fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={v!r}" if isinstance(v, str) else f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigurationError(f"line {lineno}: expected key=value, got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_TYPES:
                raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
            typ = _CONFIG_TYPES[key]
            try:
                if typ is bool:
                    parsed = value.lower() in ("1", "true", "yes")
                elif typ is str:
                    parsed = value.strip("'\"")
                else:
                    parsed = typ(value)
            except ValueError as exc:
                raise ConfigurationError(f"line {lineno}: bad value for {key}: {exc}")
            setattr(cfg, key, parsed)
        return cfg


REPORT_SCHEMA = "asmg-report-v1"
_REPORT_COLUMNS = [
    "study", "case", "n", "levels", "q", "seed", "cycle", "m", "nu",
    "varpi", "tol", "rhs_c", "iterations", "converged", "rho_r",
    "n_asmg_max", "n_i_max", "c_pi", "rho_e", "complexity", "nnz_levels",
    "wall_time",
]


@dataclass
class Report:
    rows: list = dc_field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# {REPORT_SCHEMA}\n")
        writer = csv.DictWriter(buf, fieldnames=_REPORT_COLUMNS)
        writer.writeheader()
        for row in self.rows:
            out = {}
            for key in _REPORT_COLUMNS:
                v = row.get(key, "")
                # plain-float repr round-trips exactly and keeps numpy
                # scalars out of the file
                out[key] = repr(float(v)) if isinstance(v, float) else v
            writer.writerow(out)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Report":
        lines = text.splitlines()
        if not lines or not lines[0].startswith(f"# {REPORT_SCHEMA}"):
            raise ConfigurationError("unrecognized report schema line")
        reader = csv.DictReader(lines[1:])
        rows = []
        for raw in reader:
            row = {}
            for key, value in raw.items():
                if value is None or value == "":
                    continue
                for conv in (int, float):
                    try:
                        row[key] = conv(value)
                        break
                    except ValueError:
                        continue
                else:
                    if value == "True":
                        row[key] = True
                    elif value == "False":
                        row[key] = False
                    else:
                        row[key] = value
            rows.append(row)
        return cls(rows=rows)

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def build_field(cfg: ExperimentConfig) -> CoefficientField:
    if cfg.coeff_file:
        field = load_raster(cfg.coeff_file)
        if field.n != cfg.n:
            field = rescale(resample(field, cfg.n))
        return field
    if cfg.case == "a":
        return gen_binary_islands(cfg.n, cfg.q)
    if cfg.case == "b":
        # Refinement studies must solve one fixed medium: draw the random
        # exponents once at the base resolution and replicate cell values on
        # finer meshes. Redrawing per mesh would change the problem with n
        # (and per-fine-cell noise is exactly what the coarse space cannot
        # represent, so the condition numbers would not be comparable).
        base = min(cfg.n, RANDOM_BASE_N)
        field = gen_random_field(base, cfg.q, cfg.seed)
        if cfg.n > base:
            field = resample(field, cfg.n)
        return field
    raise ConfigurationError("case c needs --coeff-file with a raster")


def resolve_levels(cfg: ExperimentConfig, coarsest_n: int = 4) -> int:
    """levels = -1 means coarsen down to the coarsest_n grid."""
    if cfg.levels >= 0:
        return cfg.levels
    lev = 0
    n = cfg.n
    while n % 2 == 0 and n // 2 >= coarsest_n:
        n //= 2
        lev += 1
    return lev


def _base_row(cfg: ExperimentConfig, levels: int) -> dict:
    return {
        "study": cfg.study, "case": cfg.case, "n": cfg.n,
        "levels": levels, "q": cfg.q, "seed": cfg.seed,
        "cycle": cfg.cycle, "m": cfg.m, "nu": cfg.nu, "varpi": cfg.varpi,
        "tol": cfg.tol, "rhs_c": cfg.rhs_c,
    }


def run_experiment(cfg: ExperimentConfig) -> Report:
    cfg.validate()
    t0 = time.perf_counter()
    levels = resolve_levels(cfg)
    row = _base_row(cfg, levels)

    if cfg.study == "gen":
        field = build_field(cfg)
        if not cfg.out:
            raise ConfigurationError("gen needs --out for the raster path")
        write_raster(cfg.out, field)
        row["converged"] = True
        row["wall_time"] = time.perf_counter() - t0
        return Report(rows=[row])

    grid = build_grid(cfg.n)
    field = build_field(cfg)
    hconfig = HierarchyConfig(sub_cells=cfg.sub_cells, stride=cfg.stride)
    hierarchy = build_hierarchy(grid, field, levels, hconfig)

    if cfg.study == "diag":
        want_all = not (cfg.cpi or cfg.rhoe or cfg.complexity)
        if cfg.cpi or want_all:
            if not hierarchy.levels:
                raise ConfigurationError("projection norm needs levels >= 1")
            row["c_pi"] = estimate_c_pi(hierarchy.levels[0])
        if cfg.rhoe or want_all:
            lin = AsmgPreconditioner(
                hierarchy,
                AmliConfig(cycle=cfg.cycle, nu=cfg.nu, m=cfg.m,
                           variant="linear", d_solver="direct", tau=cfg.tau),
            )
            est = estimate_rho_e(hierarchy.matrices[0], lin.apply)
            row["rho_e"] = est.value
        if cfg.complexity or want_all:
            comp = operator_complexity(hierarchy)
            row["complexity"] = comp.ratio
            row["nnz_levels"] = ";".join(str(z) for z in comp.nnzs)
        row["converged"] = True
        row["wall_time"] = time.perf_counter() - t0
        report = Report(rows=[row])
        if cfg.out:
            report.write(cfg.out)
        return report

    amli = AmliConfig(cycle=cfg.cycle, nu=cfg.nu, m=cfg.m, variant="gcg",
                      d_solver="pcg", inner_tol=cfg.inner_tol, tau=cfg.tau)
    asmg = AsmgPreconditioner(hierarchy, amli)

    if cfg.study == "run":
        A = hierarchy.matrices[0]
        rng = np.random.Generator(np.random.PCG64(cfg.seed + 7))
        x0 = rng.standard_normal(A.shape[0])
        b = -(A @ x0)  # solve A x = 0 from the random start
        x, info = gcg(lambda v: A @ v, asmg.apply, b, tol=cfg.tol,
                      max_iter=cfg.max_iter)
        row["iterations"] = info.iterations
        row["converged"] = info.converged
        if info.iterations >= 1:
            row["rho_r"] = rho_r(info.residuals)
        row["n_i_max"] = asmg.max_n_i()
    else:  # minres
        saddle = assemble_saddle(grid, field, rhs_c=cfg.rhs_c)
        block = BlockPreconditioner(saddle, asmg, mode="solve", varpi=cfg.varpi)
        x0 = None
        if cfg.rhs_c == 0.0:
            rng = np.random.Generator(np.random.PCG64(cfg.seed + 7))
            x0 = rng.standard_normal(saddle.grid.num_edges + saddle.grid.num_cells)
        u, p, rep = minres(saddle, block, tol=cfg.tol, max_iter=cfg.max_iter,
                           x0=x0)
        row["iterations"] = rep.iterations
        row["converged"] = rep.converged
        if rep.iterations >= 1:
            row["rho_r"] = rep.rho_r
        row["n_asmg_max"] = rep.n_asmg_max
        row["n_i_max"] = rep.n_i_max

    row["wall_time"] = time.perf_counter() - t0
    report = Report(rows=[row])
    if cfg.out:
        report.write(cfg.out)
    return report
