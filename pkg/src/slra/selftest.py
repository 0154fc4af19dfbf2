"""Built-in sanity suite for the CLI.

Each check re-derives an expected result through an independent batch or
closed-form path and compares it against the recursive implementation.
Everything is seeded; a clean build passes deterministically.
"""

from __future__ import annotations

import numpy as np

from . import baselines, reference, switched_rls
from .decomposition import (
    assemble_decomposition,
    build_hankel,
    build_shaping_pattern,
    default_patterns,
)
from .experiment import ExperimentConfig, emit_csv, run_mse_vs_rank

__all__ = ["run_selftest", "CHECKS"]


def _random_block(rng, n, m, k):
    r = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    x = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    return r, x


def check_hankel_commutation():
    """Window picked from the observation Hankel matrix equals the banded
    projection coordinate, 500 random triples."""
    rng = np.random.default_rng(11)
    M, I = 75, 3
    worst = 0.0
    for _ in range(500):
        r = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        s = rng.standard_normal(I) + 1j * rng.standard_normal(I)
        d = int(rng.integers(1, 5))
        b = int(rng.integers(1, 5))
        pat = build_shaping_pattern(d, b, M, 4, I)
        selector = np.zeros(M)
        selector[pat.gamma] = 1.0
        lhs = np.vdot(s, selector @ build_hankel(r, I))
        S = assemble_decomposition([s], [pat], M)
        rhs = (S.matrix.conj().T @ r)[0]
        denom = max(abs(rhs), 1e-300)
        worst = max(worst, abs(lhs - rhs) / denom)
    return worst <= 1e-12, f"worst relative gap {worst:.3e}"


def check_rls_batch_equivalence():
    """Recursive filter bank with unit forgetting matches the dense batch
    least-squares solution."""
    rng = np.random.default_rng(23)
    M, D, K, n = 24, 4, 2, 100
    pats = default_patterns(M, D, 3)
    filters = rng.standard_normal((D, 3)) + 1j * rng.standard_normal((D, 3))
    S = assemble_decomposition(list(filters), pats, M)
    state = switched_rls.init_state(M, D, K, basis_len=3, forgetting=1.0,
                                    init_scale=1e8)
    r_block, x_block = _random_block(rng, n, M, K)
    for r, x in zip(r_block, x_block):
        r_D = S.reduce(r)
        e = x - state.W.conj().T @ r_D
        switched_rls.update_filter_bank(state, r_D, e)
    W_batch = reference.batch_filter_solve(r_block, x_block, S.matrix, lam=1.0)
    gap = np.linalg.norm(state.W - W_batch) / np.linalg.norm(W_batch)
    return gap <= 1e-6, f"relative gap {gap:.3e}"


def check_full_rank_rls_batch():
    rng = np.random.default_rng(29)
    M, K, n = 16, 2, 100
    state = baselines.init_full_rank_rls(M, K, forgetting=1.0, init_scale=1e8)
    r_block, x_block = _random_block(rng, n, M, K)
    for r, x in zip(r_block, x_block):
        baselines.full_rank_rls_step(state, r, x=x)
    W_batch = reference.batch_filter_solve(r_block, x_block, np.eye(M), lam=1.0)
    gap = np.linalg.norm(state.w - W_batch) / np.linalg.norm(W_batch)
    return gap <= 1e-6, f"relative gap {gap:.3e}"


def check_basis_batch_equivalence():
    """Recursive basis solves converge to the exact block normal
    equations once re-solved to their fixed point."""
    rng = np.random.default_rng(31)
    M, D, K, I, n = 16, 2, 2, 3, 50
    state = switched_rls.init_state(M, D, K, basis_len=I, forgetting=1.0,
                                    init_scale=1e4)
    W = rng.standard_normal((D, K)) + 1j * rng.standard_normal((D, K))
    state.W = W
    r_block, x_block = _random_block(rng, n, M, K)
    for r, x in zip(r_block, x_block):
        switched_rls.update_basis_filters(state, r, x, branch=1, t=1)
    for _ in range(60):
        switched_rls.update_basis_filters(state, r_block[-1], x_block[-1],
                                          branch=1, t=2)
    br = state.branches[0]
    batch = reference.batch_basis_solve(
        r_block, x_block, br.offsets, I, W,
        np.array([[1, 0, 0], [1, 0, 0]], dtype=complex),
        lam=1.0, sweeps=200, prior_scale=1e4)
    gap = np.linalg.norm(br.filters - batch) / np.linalg.norm(batch)
    return gap <= 1e-6, f"relative gap {gap:.3e}"


def check_block_coordinate_monotonicity():
    rng = np.random.default_rng(37)
    M, D, K, I, n = 24, 3, 2, 3, 50
    offsets = [p.gamma for p in default_patterns(M, D, I)]
    r_block, x_block = _random_block(rng, n, M, K)
    W0 = np.zeros((D, K), dtype=complex)
    W0[0, :] = 1.0
    filters0 = np.zeros((D, I), dtype=complex)
    filters0[:, 0] = 1.0
    _, _, costs = reference.alternating_block_descent(
        r_block, x_block, offsets, I, W0, filters0, lam=1.0, sweeps=10)
    diffs = np.diff(costs)
    ok = bool(np.all(diffs <= 1e-10 * max(1.0, costs[0])))
    return ok, f"max increase {diffs.max():.3e}"


def check_switching_invariance():
    rng = np.random.default_rng(41)
    ok = True
    for _ in range(1000):
        errors = rng.lognormal(size=4)
        scale = float(rng.uniform(0.1, 10.0))
        a = switched_rls.select_branch(errors)
        b = switched_rls.select_branch(scale * errors)
        ok &= a == b and errors[a - 1] == errors.min()
    ok &= switched_rls.select_branch([0.3, 0.3]) == 1
    return ok, "argmin invariant under positive scaling"


def check_pd_inverse():
    """Inverse-correlation recursion equals direct inversion of the
    weighted sample correlation plus the decayed initialization."""
    rng = np.random.default_rng(43)
    D, K, lam, delta, n = 4, 2, 0.98, 0.01, 150
    state = switched_rls.init_state(8, D, K, forgetting=lam, init_scale=delta)
    R_acc = np.eye(D, dtype=complex) / delta
    for _ in range(n):
        r_D = rng.standard_normal(D) + 1j * rng.standard_normal(D)
        e = rng.standard_normal(K) + 1j * rng.standard_normal(K)
        switched_rls.update_filter_bank(state, r_D, e)
        R_acc = lam * R_acc + np.outer(r_D, r_D.conj())
    gap = np.linalg.norm(state.P_D - np.linalg.inv(R_acc)) / np.linalg.norm(state.P_D)
    return gap <= 1e-8, f"relative gap {gap:.3e}"


def check_eigen_mmse():
    """Dominant-subspace residual MSE is non-increasing in the subspace
    dimension and hits the full solution at D = M."""
    rng = np.random.default_rng(47)
    M, K = 8, 2
    A = rng.standard_normal((M, K)) + 1j * rng.standard_normal((M, K))
    R = A @ A.conj().T + 0.5 * np.eye(M)
    cov = baselines.CovariancePair(
        R=R, P=A, sigma_x2=1.1 * np.trace(A.conj().T @ np.linalg.solve(R, A)).real)
    values = [baselines.mmse_value(baselines.eigen_subspace(R, D), cov)
              for D in range(1, M + 1)]
    monotone = bool(np.all(np.diff(values) <= 1e-10))
    full = abs(values[-1] - (cov.sigma_x2
                             - np.trace(A.conj().T @ np.linalg.solve(R, A)).real))
    return monotone and full <= 1e-10, f"full-rank gap {full:.3e}"


def check_determinism():
    import os
    import tempfile

    config = ExperimentConfig(
        users=2, spreading_gain=4, antennas=1, channel_taps=5,
        ranks=(1, 2), rank=2, branches=2, iterations=1, packet=80,
        training=30, runs=2, seed=9, algos=("glrds", "full_rls"),
    )
    outputs = []
    for _ in range(2):
        points = run_mse_vs_rank(config)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "out.csv")
            emit_csv(points, path, metadata={"seed": config.seed})
            with open(path, "rb") as fh:
                outputs.append(fh.read())
    return outputs[0] == outputs[1], "two seeded runs, identical bytes"


CHECKS = [
    ("hankel_commutation", check_hankel_commutation),
    ("reduced_rls_vs_batch", check_rls_batch_equivalence),
    ("full_rank_rls_vs_batch", check_full_rank_rls_batch),
    ("basis_solve_vs_batch", check_basis_batch_equivalence),
    ("block_descent_monotone", check_block_coordinate_monotonicity),
    ("branch_switching_invariance", check_switching_invariance),
    ("inverse_correlation_identity", check_pd_inverse),
    ("eigen_mmse_monotone", check_eigen_mmse),
    ("experiment_determinism", check_determinism),
]


def run_selftest(out=print):
    """Run every check; returns (passed, results) where results is a list
    of (name, ok, detail)."""
    results = []
    passed = True
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failure, not an abort
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
        passed &= ok
        if out is not None:
            out(f"[{'ok' if ok else 'FAIL'}] {name}: {detail}")
    return passed, results
