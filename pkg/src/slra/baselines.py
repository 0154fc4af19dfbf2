"""Reference filters and closed-form evaluators.

Covariance-based optima (reduced filter, residual MSE, principal
subspace) plus a standard exponentially-weighted full-dimension RLS used
as the comparison baseline in the experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .decomposition import DecompositionMatrix

__all__ = [
    "CovariancePair",
    "FullRankRlsState",
    "estimate_covariances",
    "optimal_reduced_filter",
    "mmse_value",
    "eigen_subspace",
    "init_full_rank_rls",
    "full_rank_rls_step",
]

_COND_LIMIT = 1e12


@dataclass(frozen=True)
class CovariancePair:
    """Second-order statistics of the observation/desired pair.

    R is the M x M Hermitian observation correlation, P the M x K
    cross-correlation with the desired vector, sigma_x2 the desired
    signal power E[||x||^2].
    """

    R: np.ndarray
    P: np.ndarray
    sigma_x2: float


def estimate_covariances(r_samples, x_samples):
    """Sample-average covariance pair from stacked samples.

    ``r_samples`` has one observation per row, ``x_samples`` the matching
    desired vectors (a 1-D array is treated as K=1).  R-hat is Hermitian
    by construction.
    """
    r_samples = np.asarray(r_samples, dtype=np.complex128)
    x_samples = np.asarray(x_samples, dtype=np.complex128)
    if x_samples.ndim == 1:
        x_samples = x_samples[:, None]
    if r_samples.ndim != 2 or r_samples.shape[0] < 1:
        raise ValueError("need at least one observation row")
    if x_samples.shape[0] != r_samples.shape[0]:
        raise ValueError("r and x sample counts differ")
    n = r_samples.shape[0]
    R = r_samples.T @ r_samples.conj() / n
    R = 0.5 * (R + R.conj().T)
    P = r_samples.T @ x_samples.conj() / n
    sigma_x2 = float(np.mean(np.einsum("nk,nk->n", x_samples, x_samples.conj()).real))
    return CovariancePair(R=R, P=P, sigma_x2=sigma_x2)


def _dense_basis(S):
    if isinstance(S, DecompositionMatrix):
        return S.matrix
    return np.asarray(S, dtype=np.complex128)


def optimal_reduced_filter(S, cov):
    """MSE-optimal reduced filter (S^H R S)^{-1} S^H P for a fixed basis."""
    S = _dense_basis(S)
    R_red = S.conj().T @ cov.R @ S
    P_red = S.conj().T @ cov.P
    cond = np.linalg.cond(R_red)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise np.linalg.LinAlgError(
            f"reduced correlation is numerically singular (cond={cond:.3e})"
        )
    return np.linalg.solve(R_red, P_red)


def mmse_value(S, cov):
    """Residual MSE sigma_x2 - tr[P^H S (S^H R S)^{-1} S^H P] of the
    optimal reduced filter on basis S.  Nonnegative up to rounding."""
    S = _dense_basis(S)
    R_red = S.conj().T @ cov.R @ S
    P_red = S.conj().T @ cov.P
    cond = np.linalg.cond(R_red)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise np.linalg.LinAlgError(
            f"reduced correlation is numerically singular (cond={cond:.3e})"
        )
    captured = np.trace(P_red.conj().T @ np.linalg.solve(R_red, P_red)).real
    return float(cov.sigma_x2 - captured)


def eigen_subspace(R, D):
    """Orthonormal basis of the D dominant eigenvectors of Hermitian R,
    eigenvalues in descending order."""
    R = np.asarray(R, dtype=np.complex128)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError(f"R must be square, got {R.shape}")
    hermitian_gap = np.linalg.norm(R - R.conj().T) / max(np.linalg.norm(R), 1e-300)
    if hermitian_gap > 1e-8:
        raise ValueError(f"R is not Hermitian (relative asymmetry {hermitian_gap:.2e})")
    if not 1 <= D <= R.shape[0]:
        raise ValueError(f"subspace dimension must be in 1..{R.shape[0]}, got {D}")
    _, vecs = np.linalg.eigh(0.5 * (R + R.conj().T))
    return vecs[:, ::-1][:, :D]


@dataclass
class FullRankRlsState:
    """Exponentially-weighted RLS on the full observation vector."""

    w: np.ndarray        # (M, K)
    P_inv: np.ndarray    # (M, M) inverse correlation
    forgetting: float
    init_scale: float
    flags: int = 0       # reset count


def init_full_rank_rls(ambient_dim, outputs, forgetting=0.999, init_scale=0.01):
    if not 0.0 < forgetting <= 1.0:
        raise ValueError(f"forgetting factor must be in (0, 1], got {forgetting}")
    if init_scale <= 0.0:
        raise ValueError("init_scale must be positive")
    return FullRankRlsState(
        w=np.zeros((ambient_dim, outputs), dtype=np.complex128),
        P_inv=init_scale * np.eye(ambient_dim, dtype=np.complex128),
        forgetting=forgetting,
        init_scale=init_scale,
    )


def full_rank_rls_step(state, r, x=None, decide=None):
    """One RLS update; returns the a-priori estimate w^H r.

    Training mode passes the desired vector ``x``; decision-directed mode
    passes ``decide`` to hard-decide the estimate instead.  Non-finite
    updates reset the inverse correlation to the initialization.
    """
    r = np.asarray(r, dtype=np.complex128).reshape(-1)
    lam = state.forgetting
    est = state.w.conj().T @ r
    target = np.asarray(x if x is not None else decide(est),
                        dtype=np.complex128).reshape(-1)
    e = target - est
    Pr = state.P_inv @ r
    denom = 1.0 + np.vdot(r, Pr).real / lam
    if not np.isfinite(denom) or not np.isfinite(Pr).all():
        state.flags += 1
        state.P_inv = state.init_scale * np.eye(r.shape[0], dtype=np.complex128)
        Pr = state.P_inv @ r
        denom = 1.0 + np.vdot(r, Pr).real / lam
    k = Pr / (lam * denom)
    rhP = r.conj() @ state.P_inv
    P_new = (state.P_inv - np.outer(k, rhP)) / lam
    state.P_inv = 0.5 * (P_new + P_new.conj().T)
    state.w = state.w + np.outer(k, e.conj())
    return est
