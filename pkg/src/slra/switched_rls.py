"""Switched banded low-rank RLS.

Per received vector the update runs a configurable number of alternating
passes.  Each pass re-solves the short basis filters of every placement
branch from running exponentially-weighted correlations (rank-one inverse
updates via the matrix inversion lemma, Gauss-Seidel over dimensions),
picks the branch with the smallest instantaneous squared error, and
refreshes the reduced-rank filter bank with the winning branch's reduced
vector.  Correlation accumulators advance once per sample; later passes
only re-solve and re-apply the filter update with the refreshed error.

State is single-writer: do not call ``step`` concurrently on one state.
Independent states may run in parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .decomposition import (
    assemble_decomposition,
    build_shaping_pattern,
    window_stack,
)

__all__ = [
    "BranchState",
    "SwitchedRlsState",
    "StepOutput",
    "init_state",
    "update_basis_filters",
    "select_branch",
    "update_filter_bank",
    "step",
    "branch_decomposition",
    "state_to_dict",
    "state_from_dict",
    "save_state",
    "load_state",
]

# inverse-correlation matrices with condition estimates beyond this are
# reset to the initialization; long decision-directed runs under a strong
# jammer can otherwise drift into garbage
COND_LIMIT = 1e12


@dataclass
class BranchState:
    """Recursion state for one placement branch.

    ``filters[d]`` is the short basis filter of dimension d and
    ``inv_corr[d]`` the running inverse of its weighted correlation
    matrix.  ``cross_corr[d, j]`` accumulates the coupling between target
    dimension d and source dimension j (diagonal unused, kept zero);
    ``cross_vec[d]`` accumulates the correlation with the desired signal.
    """

    offsets: np.ndarray      # (D,), int row offsets
    filters: np.ndarray      # (D, I) complex
    inv_corr: np.ndarray     # (D, I, I) complex
    cross_corr: np.ndarray   # (D, D, I, I) complex
    cross_vec: np.ndarray    # (D, I) complex


@dataclass
class SwitchedRlsState:
    ambient_dim: int
    rank: int
    outputs: int
    basis_len: int
    num_branches: int
    forgetting: float
    iterations: int
    init_scale: float
    W: np.ndarray                      # (D, K) filter bank
    P_D: np.ndarray                    # (D, D) inverse of reduced correlation
    branches: list
    selected_branch: int = 1           # 1-based, last winner
    sample_count: int = 0
    cond_check_interval: int = 25
    flags: dict = field(default_factory=lambda: {
        "skipped_dims": 0, "gain_resets": 0, "cond_resets": 0,
    })
    flops: dict = field(default_factory=lambda: {
        "w_update": 0, "basis_update": 0, "output": 0,
    })
    last_gain: np.ndarray = None       # filter-bank gain of the current sample


@dataclass
class StepOutput:
    estimate: np.ndarray           # (K,) final selected-branch estimate
    per_branch_errors: np.ndarray  # (B,) squared errors of the last pass
    selected_branch: int           # 1-based


def init_state(ambient_dim, rank, outputs, basis_len=3, num_branches=1,
               forgetting=0.999, iterations=1, init_scale=0.01):
    """Fresh state: unit first filter row, unit first basis tap per
    dimension, inverse-correlation matrices at init_scale * I."""
    if rank < 1 or rank > ambient_dim:
        raise ValueError(f"rank must be in 1..{ambient_dim}, got {rank}")
    if outputs < 1 or basis_len < 1 or num_branches < 1:
        raise ValueError("outputs, basis_len and num_branches must be positive")
    if not 0.0 < forgetting <= 1.0:
        raise ValueError(f"forgetting factor must be in (0, 1], got {forgetting}")
    if iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {iterations}")
    if init_scale <= 0.0:
        raise ValueError(f"init_scale must be positive, got {init_scale}")

    W = np.zeros((rank, outputs), dtype=np.complex128)
    W[0, :] = 1.0
    P_D = init_scale * np.eye(rank, dtype=np.complex128)

    branches = []
    for b in range(1, num_branches + 1):
        # raises if any pattern falls off the vector
        pats = [build_shaping_pattern(d, b, ambient_dim, rank, basis_len)
                for d in range(1, rank + 1)]
        filters = np.zeros((rank, basis_len), dtype=np.complex128)
        filters[:, 0] = 1.0
        branches.append(BranchState(
            offsets=np.array([p.gamma for p in pats], dtype=np.intp),
            filters=filters,
            inv_corr=np.broadcast_to(
                init_scale * np.eye(basis_len, dtype=np.complex128),
                (rank, basis_len, basis_len)).copy(),
            cross_corr=np.zeros((rank, rank, basis_len, basis_len), dtype=np.complex128),
            cross_vec=np.zeros((rank, basis_len), dtype=np.complex128),
        ))

    return SwitchedRlsState(
        ambient_dim=ambient_dim, rank=rank, outputs=outputs,
        basis_len=basis_len, num_branches=num_branches,
        forgetting=forgetting, iterations=iterations, init_scale=init_scale,
        W=W, P_D=P_D, branches=branches,
    )


def _hermitize(a):
    return 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))


def update_basis_filters(state, r, x, branch, t=1):
    """Advance one branch's basis filters for the current sample.

    On the first pass (t=1) the weighted correlation accumulators absorb
    the new sample: the inverse-correlation matrices get a rank-one
    inversion-lemma update whose gain denominator carries the reciprocal
    of omega_d = sum_k |W[d,k]|^2, the coupling grid gets the
    discounted outer-product terms scaled by the filter-bank Gram matrix,
    and the desired-signal accumulators the discounted projection terms.
    Later passes (t>1) skip accumulation.  Every pass finishes with a
    Gauss-Seidel sweep re-solving each filter from the freshest
    neighbours.

    Dimensions whose filter row is all zero (omega_d = 0) carry no error
    signal: their inverse correlation and filter are left untouched and a
    flag is counted.  Non-finite gains reset that dimension's inverse
    correlation to init_scale * I.
    """
    br = state.branches[branch - 1]
    lam = state.forgetting
    D, I = state.rank, state.basis_len
    U = window_stack(r, br.offsets, I)                    # (D, I)
    G = state.W @ state.W.conj().T                        # (D, D) Gram
    omega = G.diagonal().real.copy()
    live = omega > 0.0
    n_dead = int(D - live.sum())
    if n_dead:
        state.flags["skipped_dims"] += n_dead

    if t == 1:
        # rank-one inversion-lemma update of each dimension's inverse
        # correlation, observation weight omega_d; computed quietly, the
        # finiteness check below owns the failure handling
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            Pu = np.einsum("dij,dj->di", br.inv_corr, U)
            quad = np.einsum("di,di->d", U.conj(), Pu).real
            inv_omega = np.where(live, 1.0 / np.where(live, omega, 1.0), np.inf)
            gains = Pu / (lam * (inv_omega + quad / lam))[:, None]
            uhP = np.einsum("di,dij->dj", U.conj(), br.inv_corr)
            P_new = (br.inv_corr - gains[:, :, None] * uhP[:, None, :]) / lam
            P_new = _hermitize(P_new)

        bad = ~(np.isfinite(gains).all(axis=1) & np.isfinite(P_new).reshape(D, -1).all(axis=1))
        bad &= live
        if bad.any():
            state.flags["gain_resets"] += int(bad.sum())
            P_new[bad] = state.init_scale * np.eye(I)
        keep = ~live
        if keep.any():
            P_new[keep] = br.inv_corr[keep]
        br.inv_corr = P_new

        # coupling grid: target d, source j picks up G[j, d] * u_d u_j^H;
        # diagonal stays zero (the target's own term lives in inv_corr)
        outer = np.einsum("jd,di,je->djie", G, U, U.conj())
        outer[np.arange(D), np.arange(D)] = 0.0
        br.cross_corr *= lam
        br.cross_corr += outer

        # desired-signal accumulators, scalar conj(W[d,:] . x) per dimension
        c = np.conj(state.W @ x)
        br.cross_vec *= lam
        br.cross_vec += c[:, None] * U

        # complex-multiply tally: gain/lemma per live dimension, the
        # discount+scale+outer of the coupling grid, and the projections
        state.flops["basis_update"] += int(
            live.sum() * (4 * I * I + 3 * I) + 3 * D * D * I * I
            + 2 * D * I + D * state.outputs
        )

    # Gauss-Seidel sweep: each dimension re-solved with the freshest others
    with np.errstate(over="ignore", invalid="ignore"):
        for d in range(D):
            if not live[d]:
                continue
            rhs = br.cross_vec[d] - np.einsum("jie,je->i", br.cross_corr[d], br.filters)
            s_new = br.inv_corr[d] @ rhs
            if np.isfinite(s_new).all():
                br.filters[d] = s_new
            else:
                state.flags["gain_resets"] += 1
                br.inv_corr[d] = state.init_scale * np.eye(I)
    state.flops["basis_update"] += int(live.sum() * (D * I * I + I * I))
    return br


def select_branch(per_branch_errors):
    """1-based index of the smallest finite error; ties go to the lowest
    index.  Raises if every entry is non-finite."""
    e = np.asarray(per_branch_errors, dtype=float)
    finite = np.isfinite(e)
    if not finite.any():
        raise ValueError("all branch errors are non-finite")
    return int(np.argmin(np.where(finite, e, np.inf))) + 1


def update_filter_bank(state, r_D, e):
    """One weighted-RLS update of the filter bank and its inverse
    correlation: gain k from the current P_D and reduced vector, P_D
    advanced by the inversion lemma, W absorbing the error outer product.

    A non-finite gain denominator resets P_D to init_scale * I before the
    update and counts a flag.  The gain is kept on the state so later
    passes of the same sample can re-apply the W update with a refreshed
    error without advancing P_D again.
    """
    lam = state.forgetting
    r_D = np.asarray(r_D, dtype=np.complex128).reshape(-1)
    e = np.asarray(e, dtype=np.complex128).reshape(-1)
    with np.errstate(over="ignore", invalid="ignore"):
        Pr = state.P_D @ r_D
        denom = 1.0 + np.vdot(r_D, Pr).real / lam
        if not np.isfinite(denom) or not np.isfinite(Pr).all():
            state.flags["gain_resets"] += 1
            state.P_D = state.init_scale * np.eye(state.rank, dtype=np.complex128)
            Pr = state.P_D @ r_D
            denom = 1.0 + np.vdot(r_D, Pr).real / lam
        k = Pr / (lam * denom)
    if not np.isfinite(k).all():
        # the reduced vector itself overflowed; drop this sample's update
        state.flags["gain_resets"] += 1
        state.last_gain = np.zeros(state.rank, dtype=np.complex128)
        return state
    rhP = r_D.conj() @ state.P_D
    state.P_D = _hermitize((state.P_D - np.outer(k, rhP)) / lam)
    state.W = state.W + np.outer(k, e.conj())
    state.last_gain = k
    D = state.rank
    state.flops["w_update"] += int(4 * D * D + 2 * D + D * state.outputs)
    return state


def _apply_gain(state, e):
    """Re-apply the current sample's filter-bank gain with a new error."""
    state.W = state.W + np.outer(state.last_gain, np.asarray(e).conj())
    state.flops["w_update"] += int(state.rank * state.outputs)


def _branch_estimates(state, r):
    """Reduced vectors and filter-bank outputs of every branch."""
    B, D, I = state.num_branches, state.rank, state.basis_len
    V = np.empty((B, D), dtype=np.complex128)
    with np.errstate(over="ignore", invalid="ignore"):
        for b, br in enumerate(state.branches):
            U = window_stack(r, br.offsets, I)
            V[b] = np.einsum("di,di->d", br.filters.conj(), U)
        Xhat = V @ state.W.conj()              # (B, K)
    state.flops["output"] += int(B * D * I + B * D * state.outputs)
    return V, Xhat


def _condition_sweep(state):
    """Reset any inverse-correlation matrix whose condition estimate blew up."""
    eye_d = state.init_scale * np.eye(state.rank, dtype=np.complex128)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        if not np.isfinite(state.P_D).all() or np.linalg.cond(state.P_D) > COND_LIMIT:
            state.P_D = eye_d.copy()
            state.flags["cond_resets"] += 1
        eye_i = state.init_scale * np.eye(state.basis_len, dtype=np.complex128)
        for br in state.branches:
            finite = np.isfinite(br.inv_corr).reshape(state.rank, -1).all(axis=1)
            conds = np.full(state.rank, np.inf)
            if finite.any():
                conds[finite] = np.linalg.cond(br.inv_corr[finite])
            bad = conds > COND_LIMIT
            if bad.any():
                br.inv_corr[bad] = eye_i
                state.flags["cond_resets"] += int(bad.sum())


def step(state, r, x=None, decide=None):
    """Process one received vector.

    ``x`` is the desired output vector while training.  Pass ``x=None``
    with a ``decide`` callable for decision-directed operation: each pass
    re-derives the target by hard-deciding the current estimate of the
    previously selected branch.

    Each pass computes every branch's estimate and squared error against
    the target, advances the basis filters of every branch, selects the
    winner, and updates the filter bank with the winner's error.  The
    reduced vector feeding the filter bank is fixed on the first pass
    (winning branch, freshly updated basis); its inverse correlation
    advances once per sample, later passes re-use the gain.
    """
    r = np.asarray(r, dtype=np.complex128).reshape(-1)
    if r.shape[0] != state.ambient_dim:
        raise ValueError(f"expected length {state.ambient_dim}, got {r.shape[0]}")
    if x is None and decide is None:
        raise ValueError("decision-directed mode needs a decide callable")
    if x is not None:
        x = np.asarray(x, dtype=np.complex128).reshape(-1)
        if x.shape[0] != state.outputs:
            raise ValueError(f"desired vector must have length {state.outputs}")

    Xhat = err2 = None
    bs = state.selected_branch
    for t in range(1, state.iterations + 1):
        _, Xhat = _branch_estimates(state, r)
        target = x if x is not None else np.asarray(
            decide(Xhat[state.selected_branch - 1]), dtype=np.complex128).reshape(-1)
        with np.errstate(over="ignore", invalid="ignore"):
            E = target[None, :] - Xhat
            err2 = np.einsum("bk,bk->b", E, E.conj()).real

        for b in range(1, state.num_branches + 1):
            update_basis_filters(state, r, target, b, t)

        bs = select_branch(err2)
        state.selected_branch = bs
        e_sel = E[bs - 1]
        if t == 1:
            br = state.branches[bs - 1]
            U = window_stack(r, br.offsets, state.basis_len)
            with np.errstate(over="ignore", invalid="ignore"):
                r_D = np.einsum("di,di->d", br.filters.conj(), U)
            update_filter_bank(state, r_D, e_sel)
        else:
            _apply_gain(state, e_sel)

    state.sample_count += 1
    if state.cond_check_interval and state.sample_count % state.cond_check_interval == 0:
        _condition_sweep(state)
    return StepOutput(estimate=Xhat[bs - 1].copy(),
                      per_branch_errors=err2.copy(),
                      selected_branch=bs)


def branch_decomposition(state, branch):
    """DecompositionMatrix view of one branch's current basis filters."""
    br = state.branches[branch - 1]
    pats = [build_shaping_pattern(d, branch, state.ambient_dim, state.rank, state.basis_len)
            for d in range(1, state.rank + 1)]
    return assemble_decomposition(list(br.filters), pats, state.ambient_dim)


# --- snapshots ---------------------------------------------------------------

def _pack(a):
    a = np.asarray(a)
    return {"real": a.real.tolist(), "imag": a.imag.tolist()}


def _unpack(d):
    return np.asarray(d["real"], dtype=float) + 1j * np.asarray(d["imag"], dtype=float)


def state_to_dict(state):
    """JSON-ready snapshot of the full recursion state."""
    return {
        "format": "slra-state-v1",
        "ambient_dim": state.ambient_dim,
        "rank": state.rank,
        "outputs": state.outputs,
        "basis_len": state.basis_len,
        "num_branches": state.num_branches,
        "forgetting": state.forgetting,
        "iterations": state.iterations,
        "init_scale": state.init_scale,
        "selected_branch": state.selected_branch,
        "sample_count": state.sample_count,
        "W": _pack(state.W),
        "P_D": _pack(state.P_D),
        "branches": [
            {
                "offsets": br.offsets.tolist(),
                "filters": _pack(br.filters),
                "inv_corr": _pack(br.inv_corr),
                "cross_corr": _pack(br.cross_corr),
                "cross_vec": _pack(br.cross_vec),
            }
            for br in state.branches
        ],
        "flags": dict(state.flags),
    }


def state_from_dict(payload):
    if payload.get("format") != "slra-state-v1":
        raise ValueError(f"unrecognized snapshot format: {payload.get('format')!r}")
    state = init_state(
        payload["ambient_dim"], payload["rank"], payload["outputs"],
        basis_len=payload["basis_len"], num_branches=payload["num_branches"],
        forgetting=payload["forgetting"], iterations=payload["iterations"],
        init_scale=payload["init_scale"],
    )
    state.selected_branch = int(payload["selected_branch"])
    state.sample_count = int(payload["sample_count"])
    state.W = _unpack(payload["W"])
    state.P_D = _unpack(payload["P_D"])
    state.flags.update(payload.get("flags", {}))
    for br, src in zip(state.branches, payload["branches"]):
        br.offsets = np.asarray(src["offsets"], dtype=np.intp)
        br.filters = _unpack(src["filters"])
        br.inv_corr = _unpack(src["inv_corr"])
        br.cross_corr = _unpack(src["cross_corr"])
        br.cross_vec = _unpack(src["cross_vec"])
    return state


def save_state(state, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(state_to_dict(state), fh)


def load_state(path):
    with open(path, "r", encoding="utf-8") as fh:
        return state_from_dict(json.load(fh))
