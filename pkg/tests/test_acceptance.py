"""End-to-end acceptance battery.

One test per numbered criterion. Each test prints exactly one PASS/FAIL
line (run with -s to see them live), checks the stated tolerances, and
enforces its runtime budget. Measured quantities ride along in the line
so a failure is diagnosable from the log alone.
"""

import os
import time

import numpy as np
import pytest
import scipy.linalg

from asmg import (
    AmliConfig,
    AsmgPreconditioner,
    ExperimentConfig,
    HierarchyConfig,
    build_covering,
    build_grid,
    build_hierarchy,
    estimate_c_pi,
    estimate_rho_e,
    gen_random_field,
    operator_complexity,
    run_experiment,
)
from asmg.asca import assemble_aux_dense, aux_offsets
from asmg.diag import build_field, stationary_error_reduction
from asmg.fem import assemble_saddle

# rows from the long-running solve criteria, shared so the inner-solver
# criterion does not repeat them
_rows = {}


def report(num, ok, detail):
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def bench_field(case, n, q, seed=0):
    return build_field(ExperimentConfig(case=case, n=n, q=q, seed=seed))


def two_level(case, n, q, sub=8, stride=4, seed=0):
    cfg = HierarchyConfig(sub_cells=sub, stride=stride, coarsest_n=2)
    return build_hierarchy(build_grid(n), bench_field(case, n, q, seed), 1, cfg)


def velocity_row(n, levels, q, cycle, m, seed=0):
    key = ("run", n, levels, q, cycle, m, seed)
    if key not in _rows:
        cfg = ExperimentConfig(study="run", case="b", n=n, levels=levels,
                               q=q, seed=seed, cycle=cycle, m=m, tol=1e-8)
        _rows[key] = run_experiment(cfg).rows[0]
    return _rows[key]


def minres_row(n, levels, q, cycle, m, rhs_c=0.0, seed=0):
    key = ("minres", n, levels, q, cycle, m, rhs_c, seed)
    if key not in _rows:
        cfg = ExperimentConfig(study="minres", case="b", n=n, levels=levels,
                               q=q, seed=seed, cycle=cycle, m=m,
                               varpi=1e8, tol=1e-8, rhs_c=rhs_c)
        _rows[key] = run_experiment(cfg).rows[0]
    return _rows[key]


def rel_fro(X, Y):
    return np.linalg.norm(X - Y) / max(np.linalg.norm(Y), 1e-300)


def test_criterion_01_exact_identities():
    t0 = time.perf_counter()
    worst = 0.0
    ok = True
    notes = []
    for n, sub, stride in [(4, 2, 2), (8, 4, 2), (8, 8, 4), (16, 8, 4)]:
        h = two_level("b", n, 4, sub, stride)
        level = h.levels[0]
        A = level.A.toarray()

        # decomposition: the multiplicity-scaled local matrices sum back
        from asmg.covering import assemble_local

        field = bench_field("b", n, 4)
        acc = np.zeros_like(A)
        for s in level.covering.subdomains:
            A_i = assemble_local(level.grid, field, s, level.covering.multiplicity)
            acc[np.ix_(s.edges, s.edges)] += A_i
        worst = max(worst, rel_fro(acc, A))

        # local transforms commute with restriction, entrywise exact
        Jd = level.transform.J.toarray()
        for s, lt in zip(level.covering.subdomains, level.transform.locals):
            if not np.array_equal(Jd[s.edges, :][:, lt.hat_ids], lt.J):
                ok = False
                notes.append(f"R_i J mismatch at n={n}")
                break

        # shared coarse block equals the transformed coarse-coarse block
        At = assemble_aux_dense(level)
        _, n1t, _ = aux_offsets(level)
        Ah = level.A_hat.toarray()
        split = level.transform.splitting
        worst = max(worst, rel_fro(At[n1t:, n1t:],
                                   Ah[np.ix_(split.coarse, split.coarse)]))

        if n <= 8:
            # congruence chain back to the natural basis
            from asmg.diag import _dense_r_dtilde

            R, _ = _dense_r_dtilde(level)
            worst = max(worst, rel_fro(R @ At @ R.T, Ah))
            Jinv = level.transform.Jinv.toarray()
            worst = max(worst, rel_fro(Jinv.T @ (R @ At @ R.T) @ Jinv, A))

    # coarse matrices are the approximations themselves, bit for bit
    h2 = build_hierarchy(build_grid(16), bench_field("b", 16, 4), 2)
    for k, level in enumerate(h2.levels):
        nxt = h2.matrices[k + 1]
        if nxt is not level.Q or not np.array_equal(nxt.data, level.Q.data):
            ok = False
            notes.append(f"A^({k + 1}) is not Q^({k})")

    elapsed = time.perf_counter() - t0
    ok = ok and worst <= 1e-12 and elapsed < 10
    detail = f"worst relative Frobenius {worst:.2e}, {elapsed:.1f}s"
    if notes:
        detail += "; " + "; ".join(notes)
    report(1, ok, detail)


def test_criterion_02_asca_matches_dense_schur():
    t0 = time.perf_counter()
    worst = 0.0
    for n, sub, stride in [(4, 2, 2), (8, 4, 2)]:
        for seed in range(5):
            cfg = HierarchyConfig(sub_cells=sub, stride=stride, coarsest_n=2)
            field = gen_random_field(n, 5, seed)
            h = build_hierarchy(build_grid(n), field, 1, cfg)
            level = h.levels[0]
            At = assemble_aux_dense(level)
            _, n1t, _ = aux_offsets(level)
            S = At[n1t:, n1t:] - At[:n1t, n1t:].T @ np.linalg.solve(
                At[:n1t, :n1t], At[:n1t, n1t:]
            )
            worst = max(worst, rel_fro(level.Q.toarray(), S))

    # one subdomain covering the grid: the exact global Schur complement
    h = two_level("b", 8, 4, 8, 4)
    level = h.levels[0]
    assert len(level.covering) == 1
    Ah = level.A_hat.toarray()
    f, c = level.transform.splitting.fine, level.transform.splitting.coarse
    S = Ah[np.ix_(c, c)] - Ah[np.ix_(c, f)] @ np.linalg.solve(
        Ah[np.ix_(f, f)], Ah[np.ix_(f, c)]
    )
    worst_single = rel_fro(level.Q.toarray(), S)

    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and worst_single <= 1e-12 and elapsed < 30
    report(2, ok, f"10 fields worst {worst:.2e}, single-subdomain "
                  f"{worst_single:.2e}, {elapsed:.1f}s")


def _chol_ld(M):
    """Lower Cholesky factor in extended precision."""
    L = np.zeros_like(M)
    for j in range(M.shape[0]):
        c = M[j:, j] - L[j:, :j] @ L[j, :j]
        L[j, j] = np.sqrt(c[0])
        L[j + 1:, j] = c[1:] / L[j, j]
    return L


def _solve_lower(L, B):
    X = B.copy()
    for i in range(L.shape[0]):
        X[i] = (X[i] - L[i, :i] @ X[:i]) / L[i, i]
    return X


def _solve_upper(U, B):
    X = B.copy()
    for i in range(U.shape[0] - 1, -1, -1):
        X[i] = (X[i] - U[i, i + 1:] @ X[i + 1:]) / U[i, i]
    return X


def test_criterion_03_two_level_spectral_equivalence():
    # The preconditioner action is algebraically the block UL inverse of
    # C_hat = [[D, B], [B', Q + B'inv(D)B]] in the half-difference basis,
    # with D, B, Q the stored operator blocks, so the pencil (A, C) is
    # congruent to (J'AJ, C_hat).  Evaluating that reduction in 80-bit
    # arithmetic pushes the measurement noise to ~eps_ld * cond << 1e-8;
    # what remains is the true spectrum of the shipped float64 operators.
    ld = np.longdouble
    t0 = time.perf_counter()
    fails = []
    results = []
    for n in (8, 16):
        for q in (0, 3, 6):
            h = two_level("b", n, q)
            level = h.levels[0]
            A = h.matrices[0].toarray().astype(ld)
            N = A.shape[0]
            split = level.transform.splitting
            f, c = split.fine, split.coarse
            J = level.transform.J.toarray().astype(ld)
            Ahat = J.T @ (A @ J)
            D = level.D_f.toarray().astype(ld)
            B = np.zeros((split.n1, split.n2), dtype=ld)
            for so in level.subs:
                B[np.ix_(so.lt.gf, so.lt.gc)] += so.A12.astype(ld)
            Ld = _chol_ld(D)
            X = _solve_upper(Ld.T, _solve_lower(Ld, B))
            C22 = level.Q.toarray().astype(ld) + B.T @ X
            Chat = np.zeros((N, N), dtype=ld)
            Chat[np.ix_(f, f)] = D
            Chat[np.ix_(f, c)] = B
            Chat[np.ix_(c, f)] = B.T
            Chat[np.ix_(c, c)] = 0.5 * (C22 + C22.T)
            Lc = _chol_ld(Chat)
            G = _solve_lower(Lc, _solve_lower(Lc, Ahat).T)
            lam = np.linalg.eigvalsh((0.5 * (G + G.T)).astype(float))
            c_pi = estimate_c_pi(level)
            results.append((n, q, lam.min(), lam.max(), c_pi))
            if lam.min() < 1.0 - 1e-8 or lam.max() > c_pi + 1e-6:
                fails.append(
                    f"n={n} q={q}: lam_min-1={lam.min() - 1:.2e}, "
                    f"lam_max-c_pi={lam.max() - c_pi:.2e}"
                )
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 120
    worst_min = min(r[2] for r in results)
    worst_max = max(r[3] - r[4] for r in results)
    detail = (f"lam_min-1 >= {worst_min - 1:.2e}, "
              f"lam_max-c_pi <= {worst_max:.2e}, {elapsed:.1f}s")
    if fails:
        detail += "; " + "; ".join(fails)
    report(3, ok, detail)


def test_criterion_04_projection_norm_robust():
    t0 = time.perf_counter()
    fails = []
    spans = []
    for case in ("a", "b"):
        for n in (16, 32):
            vals = []
            for q in range(7):
                h = two_level(case, n, q)
                vals.append(estimate_c_pi(h.levels[0]))
            spread = max(vals) / min(vals)
            spans.append(f"[{case}] n={n}: max {max(vals):.4f} spread {spread:.4f}")
            if max(vals) > 2.0 or spread > 1.35:
                fails.append(spans[-1])
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 300
    report(4, ok, "; ".join(spans) + f", {elapsed:.1f}s")


def test_criterion_05_linear_cycle_contraction():
    t0 = time.perf_counter()
    fails = []
    rho_max = 0.0
    it_max = 0
    for n, levels in [(32, 3), (64, 4)]:
        grid = build_grid(n)
        for q in range(7):
            h = build_hierarchy(grid, bench_field("b", n, q), levels)
            pre = AsmgPreconditioner(
                h, AmliConfig(cycle="V", m=0, variant="linear",
                              d_solver="direct")
            )
            A = h.matrices[0]
            est = estimate_rho_e(A, pre.apply)
            rho_max = max(rho_max, est.value)
            if not (est.converged and est.value < 0.8):
                fails.append(f"rho_e={est.value:.3f} at n={n} q={q}")
                continue
            # the scaled stationary iteration: errors contract by at
            # least rho/(2+rho) per step once tau splits the spectrum
            tau = 1.0 + est.value / 2.0
            iters, _ = stationary_error_reduction(
                A, pre.apply, reduction=1e8, max_iter=25, tau=tau
            )
            if iters < 0:
                fails.append(f"stationary stalled at n={n} q={q}")
            else:
                it_max = max(it_max, iters)
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 300
    detail = (f"rho_e <= {rho_max:.4f}, stationary 1e8 cut in <= {it_max} "
              f"iterations, {elapsed:.1f}s")
    if fails:
        detail += "; " + "; ".join(fails)
    report(5, ok, detail)


def test_criterion_06_nonlinear_cycle_counts():
    t0 = time.perf_counter()
    fails = []
    lines = []
    for cycle, m, bound, spread_bound in [("V", 2, 12, 2.0), ("W", 1, 8, 1.5)]:
        counts = []
        for q in range(7):
            row = velocity_row(64, 4, q, cycle, m)
            if not row["converged"]:
                fails.append(f"{cycle} m={m} q={q} did not converge")
                counts.append(row["iterations"])
                continue
            counts.append(row["iterations"])
        spread = max(counts) / min(counts)
        lines.append(f"{cycle} m={m}: n_asmg={counts} spread {spread:.2f}")
        if max(counts) > bound or spread > spread_bound:
            fails.append(lines[-1])
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 600
    report(6, ok, "; ".join(lines) + f", {elapsed:.1f}s")


def test_criterion_07_minres_scalability():
    t0 = time.perf_counter()
    counts = {}
    fails = []
    for n, levels in [(16, 2), (32, 3), (64, 4)]:
        row = minres_row(n, levels, 4, "W", 1)
        counts[n] = row["iterations"]
        if not row["converged"] or row["iterations"] > 30:
            fails.append(f"n={n}: {row['iterations']} iterations, "
                         f"converged={row['converged']}")
    if counts[64] > 1.5 * counts[16]:
        fails.append(f"growth {counts[16]} -> {counts[64]} exceeds 1.5x")

    spe_note = "raster absent, slice check skipped"
    for cand in ("spe10_s44.txt", os.path.join("data", "spe10_s44.txt"),
                 os.environ.get("ASMG_SPE10", "")):
        if cand and os.path.exists(cand):
            cfg = ExperimentConfig(study="minres", case="c", coeff_file=cand,
                                   n=128, levels=5, cycle="W", m=1,
                                   varpi=1e8, tol=1e-8)
            row = run_experiment(cfg).rows[0]
            spe_note = f"slice-44 n=128: {row['iterations']} iterations"
            if not row["converged"] or abs(row["iterations"] - 17) > 5:
                fails.append(spe_note)
            break

    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 1200
    detail = (f"n_minres {counts[16]}/{counts[32]}/{counts[64]} at "
              f"n=16/32/64; {spe_note}; {elapsed:.1f}s")
    if fails:
        detail += "; " + "; ".join(fails)
    report(7, ok, detail)


def test_criterion_08_inner_solver_quality():
    t0 = time.perf_counter()
    worst = 0
    # solve-style configurations reuse the recorded runs
    for n, levels in [(16, 2), (32, 3), (64, 4)]:
        worst = max(worst, minres_row(n, levels, 4, "W", 1)["n_i_max"])
    for cycle, m in [("V", 2), ("W", 1)]:
        for q in range(7):
            worst = max(worst, velocity_row(64, 4, q, cycle, m)["n_i_max"])
    # linear-cycle configurations: drive the same inner solves directly
    rng = np.random.Generator(np.random.PCG64(31))
    for n, levels in [(32, 3), (64, 4)]:
        grid = build_grid(n)
        for q in (0, 3, 6):
            h = build_hierarchy(grid, bench_field("b", n, q), levels)
            pre = AsmgPreconditioner(
                h, AmliConfig(cycle="V", m=0, variant="linear", d_solver="pcg")
            )
            for _ in range(3):
                pre.apply(rng.standard_normal(h.matrices[0].shape[0]))
            worst = max(worst, pre.max_n_i())
    elapsed = time.perf_counter() - t0
    ok = worst <= 12 and elapsed < 600
    report(8, ok, f"inner PCG needed <= {worst} iterations "
                  f"(bound 12), {elapsed:.1f}s")


def test_criterion_09_sparsity_and_complexity():
    t0 = time.perf_counter()
    fails = []
    ratios = {}
    for sub, stride, tag in [(8, 4, "default"), (4, 2, "compact")]:
        cfg = HierarchyConfig(sub_cells=sub, stride=stride)
        vals = []
        for n, levels in [(16, 2), (32, 3), (64, 4)]:
            h = build_hierarchy(build_grid(n), bench_field("b", n, 4),
                                levels, cfg)
            comp = operator_complexity(h)
            vals.append(comp.ratio)
            if not comp.column_bound_ok:
                fails.append(f"column bound violated ({tag}, n={n}, "
                             f"slack {comp.worst_slack})")
        ratios[tag] = vals
    # the half-width compact covering realizes the bounded-complexity
    # construction; the wide default trades fill for robustness
    if max(ratios["compact"]) > 2.5:
        fails.append(f"compact complexity {max(ratios['compact']):.2f} > 2.5")
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 60
    detail = (f"column bound holds; complexity compact "
              f"{'/'.join(f'{r:.2f}' for r in ratios['compact'])}, default "
              f"{'/'.join(f'{r:.2f}' for r in ratios['default'])} "
              f"(n=16/32/64), {elapsed:.1f}s")
    if fails:
        detail += "; " + "; ".join(fails)
    report(9, ok, detail)


def test_criterion_10_inf_sup_robustness():
    t0 = time.perf_counter()
    fails = []
    lines = []
    for n in (4, 8, 16):
        grid = build_grid(n)
        gammas = []
        for q in (0, 3, 6):
            saddle = assemble_saddle(grid, bench_field("b", n, q))
            A = saddle.A.toarray()
            w, V = np.linalg.eigh(A)
            Ainv_h = (V / np.sqrt(w)) @ V.T
            P = (saddle.B_div.toarray() / grid.h) @ Ainv_h
            gammas.append(scipy.linalg.svdvals(P)[-1])
        ratio = max(gammas) / min(gammas)
        lines.append(f"n={n}: gamma in [{min(gammas):.4f}, {max(gammas):.4f}]")
        if ratio > 2.0:
            fails.append(f"n={n} ratio {ratio:.3f} > 2")
    elapsed = time.perf_counter() - t0
    ok = not fails and elapsed < 120
    report(10, ok, "; ".join(lines) + f", {elapsed:.1f}s")


def test_criterion_11_nonzero_rhs():
    t0 = time.perf_counter()
    zero = minres_row(64, 4, 4, "W", 1)
    forced = minres_row(64, 4, 4, "W", 1, rhs_c=1.0)
    elapsed = time.perf_counter() - t0
    ok = (zero["converged"] and forced["converged"]
          and forced["iterations"] <= zero["iterations"] + 3
          and elapsed < 600)
    report(11, ok, f"n_minres {forced['iterations']} with sources vs "
                   f"{zero['iterations']} without, {elapsed:.1f}s")
