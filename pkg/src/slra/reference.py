"""Batch reference solvers used to cross-check the recursions.

Everything here works on a frozen block of samples with explicit
weighted sums and dense solves: no inversion-lemma updates, no windowed
fast paths.  Deliberately slower and structurally independent of the
recursive implementations so the two can be compared in tests and in the
CLI selftest.
"""

from __future__ import annotations

import numpy as np

from .decomposition import build_hankel

__all__ = [
    "block_windows",
    "weighted_block_cost",
    "batch_filter_solve",
    "batch_basis_solve",
    "alternating_block_descent",
    "quadratic_mse",
]


def block_windows(r_block, offsets, basis_len):
    """Windows of every sample at every offset, via explicit Hankel rows.

    Returns shape (n_samples, D, basis_len).
    """
    r_block = np.asarray(r_block, dtype=np.complex128)
    out = np.empty((r_block.shape[0], len(offsets), basis_len), dtype=np.complex128)
    for n, r in enumerate(r_block):
        H = build_hankel(r, basis_len)
        for d, g in enumerate(offsets):
            out[n, d] = H[g]
    return out


def _weights(n, lam):
    # lam^{n-1-l} for l = 0..n-1 (most recent sample has weight 1)
    return lam ** np.arange(n - 1, -1, -1, dtype=float)


def weighted_block_cost(r_block, x_block, S_dense, W, lam=1.0):
    """Exponentially weighted squared-error cost of (S, W) on the block."""
    r_block = np.asarray(r_block, dtype=np.complex128)
    x_block = np.asarray(x_block, dtype=np.complex128)
    w = _weights(r_block.shape[0], lam)
    est = (r_block @ np.conj(S_dense)) @ np.conj(W)     # rows W^H S^H r
    resid = x_block - est
    return float(np.sum(w * np.einsum("nk,nk->n", resid, resid.conj()).real))


def batch_filter_solve(r_block, x_block, S_dense, lam=1.0, prior_scale=None):
    """Exact weighted LS filter bank for a fixed basis.

    Solves (sum_l w_l rD rD^H [+ prior]) W = sum_l w_l rD x^H with
    rD = S^H r.  ``prior_scale`` adds the decayed initialization term
    lam^n / prior_scale * I that the recursive filter carries.
    """
    r_block = np.asarray(r_block, dtype=np.complex128)
    x_block = np.asarray(x_block, dtype=np.complex128)
    n = r_block.shape[0]
    w = _weights(n, lam)
    rD = r_block @ np.conj(S_dense)                     # rows (S^H r)^T
    R = (rD * w[:, None]).T @ rD.conj()
    R = 0.5 * (R + R.conj().T)
    P = (rD * w[:, None]).T @ x_block.conj()
    if prior_scale is not None:
        R = R + (lam ** n / prior_scale) * np.eye(R.shape[0])
    W, *_ = np.linalg.lstsq(R, P, rcond=None)
    return W


def batch_basis_solve(r_block, x_block, offsets, basis_len, W, filters,
                      lam=1.0, sweeps=1, prior_scale=None):
    """Exact normal-equation solve of every basis filter, others fixed.

    For each dimension d (Gauss-Seidel within a sweep) the filter solves

        omega_d * A_d s_d = p_d - sum_{j != d} G[j, d] * A_{dj} s_j

    with A_d = sum_l w_l u_d u_d^H, A_{dj} = sum_l w_l u_d u_j^H,
    p_d = sum_l w_l conj(W[d,:] . x[l]) u_d[l], omega_d and G the
    filter-bank row energies and Gram matrix.  Dead rows (omega_d = 0)
    are skipped.  Returns a fresh filters array.
    """
    x_block = np.asarray(x_block, dtype=np.complex128)
    filters = np.array(filters, dtype=np.complex128, copy=True)
    D = len(offsets)
    n = np.asarray(r_block).shape[0]
    w = _weights(n, lam)
    U = block_windows(r_block, offsets, basis_len)      # (n, D, I)

    A = np.einsum("n,ndi,nje->djie", w, U, U.conj())    # (D, D, I, I)
    G = W @ W.conj().T
    omega = G.diagonal().real
    proj = np.conj(x_block @ W.T)                       # rows conj(W x[l]) -> (n, D)
    p = np.einsum("n,nd,ndi->di", w, proj, U)

    prior = (lam ** n / prior_scale) if prior_scale is not None else 0.0
    for _ in range(sweeps):
        for d in range(D):
            if omega[d] <= 0.0:
                continue
            rhs = p[d].copy()
            for j in range(D):
                if j != d:
                    rhs -= G[j, d] * (A[d, j] @ filters[j])
            lhs = omega[d] * A[d, d] + prior * np.eye(basis_len)
            s, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
            filters[d] = s
    return filters


def alternating_block_descent(r_block, x_block, offsets, basis_len, W0, filters0,
                              lam=1.0, sweeps=10):
    """Alternate exact basis and filter solves on a frozen block.

    Returns the cost after the initial point and after every sweep; each
    sweep solves all basis filters (one Gauss-Seidel pass) then the
    filter bank.
    """
    from .decomposition import ShapingPattern, assemble_decomposition

    def dense(filters):
        pats = [ShapingPattern(d=d + 1, b=1, gamma=int(g), basis_len=basis_len)
                for d, g in enumerate(offsets)]
        return assemble_decomposition(list(filters), pats,
                                      np.asarray(r_block).shape[1]).matrix

    W = np.array(W0, dtype=np.complex128, copy=True)
    filters = np.array(filters0, dtype=np.complex128, copy=True)
    costs = [weighted_block_cost(r_block, x_block, dense(filters), W, lam)]
    for _ in range(sweeps):
        filters = batch_basis_solve(r_block, x_block, offsets, basis_len, W,
                                    filters, lam=lam, sweeps=1)
        costs.append(weighted_block_cost(r_block, x_block, dense(filters), W, lam))
        W = batch_filter_solve(r_block, x_block, dense(filters), lam=lam)
        costs.append(weighted_block_cost(r_block, x_block, dense(filters), W, lam))
    return filters, W, np.asarray(costs)


def quadratic_mse(S_dense, W, cov):
    """Ensemble MSE of a fixed (S, W): sigma_x2 - 2 Re tr(W^H S^H P)
    + tr(W^H S^H R S W)."""
    SW = S_dense @ W
    lin = np.trace(W.conj().T @ (S_dense.conj().T @ cov.P)).real
    quad = np.trace(SW.conj().T @ cov.R @ SW).real
    return float(cov.sigma_x2 - 2.0 * lin + quad)
