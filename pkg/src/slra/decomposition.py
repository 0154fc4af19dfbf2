"""Banded low-rank decomposition building blocks.

The decomposition matrix used throughout this package is constrained:
column d is zero except for a short basis filter placed at a fixed row
offset.  Projecting an M-vector therefore reduces to a handful of short
windowed inner products, O(D*I) instead of O(M*D), and never requires
materializing the M x D matrix in the hot path.

Dimension index d and branch index b are 1-based in the public API;
row offsets (gamma) are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ShapingPattern",
    "DecompositionMatrix",
    "build_shaping_pattern",
    "default_patterns",
    "build_hankel",
    "hankel_window",
    "window_stack",
    "assemble_decomposition",
    "reduce_dimension",
    "filter_output",
]


@dataclass(frozen=True)
class ShapingPattern:
    """Placement of one basis filter inside the ambient vector.

    ``gamma`` is the 0-based row where the filter's first tap lands;
    ``basis_len`` taps follow (rows past the ambient end are dropped).
    """

    d: int          # dimension index, 1-based
    b: int          # branch index, 1-based
    gamma: int      # row offset, 0-based
    basis_len: int

    def __post_init__(self):
        if self.d < 1 or self.b < 1:
            raise ValueError(f"dimension/branch indices are 1-based, got d={self.d}, b={self.b}")
        if self.gamma < 0:
            raise ValueError(f"offset must be nonnegative, got {self.gamma}")
        if self.basis_len < 1:
            raise ValueError(f"basis_len must be positive, got {self.basis_len}")


def build_shaping_pattern(d, b, ambient_dim, rank, basis_len):
    """Default placement rule: gamma = (d-1)*floor(M/D) + (b-1).

    Raises ValueError if the indices are out of range or the offset falls
    past the end of the ambient vector.
    """
    if not 1 <= d <= rank:
        raise ValueError(f"dimension index {d} outside 1..{rank}")
    if b < 1:
        raise ValueError(f"branch index {b} must be >= 1")
    if rank > ambient_dim:
        raise ValueError(f"rank {rank} exceeds ambient dimension {ambient_dim}")
    gamma = (d - 1) * (ambient_dim // rank) + (b - 1)
    if gamma >= ambient_dim:
        raise ValueError(
            f"pattern (d={d}, b={b}) falls off the vector: gamma={gamma} >= M={ambient_dim}"
        )
    return ShapingPattern(d=d, b=b, gamma=gamma, basis_len=basis_len)


def default_patterns(ambient_dim, rank, basis_len, b=1):
    """Patterns for all D dimensions of branch b under the default rule."""
    return tuple(
        build_shaping_pattern(d, b, ambient_dim, rank, basis_len) for d in range(1, rank + 1)
    )


def build_hankel(x, width):
    """M x width matrix whose column k is x shifted up by k rows.

    entries[m, k] = x[m + k] where defined, zero in the lower-right corner.
    """
    if width < 1:
        raise ValueError(f"width must be positive, got {width}")
    x = np.asarray(x)
    if x.ndim != 1 or x.shape[0] < 1:
        raise ValueError("input must be a nonempty vector")
    m = x.shape[0]
    out = np.zeros((m, width), dtype=np.result_type(x.dtype, np.complex128))
    for k in range(width):
        out[: m - k, k] = x[k:]
    return out


def hankel_window(x, gamma, length):
    """Zero-padded slice x[gamma : gamma + length].

    Equals row gamma of ``build_hankel(x, length)``: the window a unit
    selector at position gamma extracts from the Hankel matrix.
    """
    x = np.asarray(x)
    out = np.zeros(length, dtype=np.result_type(x.dtype, np.complex128))
    hi = min(gamma + length, x.shape[0])
    if gamma < x.shape[0]:
        out[: hi - gamma] = x[gamma:hi]
    return out


def window_stack(x, offsets, length):
    """Stack zero-padded windows x[g : g+length] for each offset g.

    Offsets must lie in [0, len(x)).  Returns shape (len(offsets), length).
    """
    x = np.asarray(x)
    padded = np.concatenate([x, np.zeros(length, dtype=x.dtype)])
    idx = np.asarray(offsets, dtype=np.intp)[:, None] + np.arange(length)[None, :]
    return padded[idx]


@dataclass(frozen=True)
class DecompositionMatrix:
    """Banded M x D decomposition assembled from D short basis filters.

    Column d carries ``basis_filters[d]`` starting at row
    ``patterns[d].gamma``.  The projection convention is S^H r with the
    filter entries stored unconjugated in S, so coordinate d equals the
    conjugated inner product of the filter with the window of r at its
    offset.
    """

    ambient_dim: int
    patterns: tuple
    basis_filters: tuple

    @property
    def rank(self):
        return len(self.patterns)

    @property
    def matrix(self):
        """Dense M x D matrix (for oracles and inspection, not the hot path)."""
        out = np.zeros((self.ambient_dim, self.rank), dtype=np.complex128)
        for col, (pat, filt) in enumerate(zip(self.patterns, self.basis_filters)):
            hi = min(pat.gamma + pat.basis_len, self.ambient_dim)
            out[pat.gamma:hi, col] = filt[: hi - pat.gamma]
        return out

    def reduce(self, r):
        """S^H r via windowed inner products."""
        r = np.asarray(r)
        if r.shape != (self.ambient_dim,):
            raise ValueError(f"expected vector of length {self.ambient_dim}, got {r.shape}")
        out = np.empty(self.rank, dtype=np.complex128)
        for col, (pat, filt) in enumerate(zip(self.patterns, self.basis_filters)):
            out[col] = np.vdot(filt, hankel_window(r, pat.gamma, pat.basis_len))
        return out


def assemble_decomposition(basis_filters, patterns, ambient_dim):
    """Bundle basis filters and placements into a DecompositionMatrix."""
    if len(basis_filters) != len(patterns):
        raise ValueError(
            f"{len(basis_filters)} filters but {len(patterns)} patterns"
        )
    filters = []
    for pat, filt in zip(patterns, basis_filters):
        filt = np.asarray(filt, dtype=np.complex128).reshape(-1)
        if filt.shape[0] != pat.basis_len:
            raise ValueError(
                f"filter for d={pat.d} has length {filt.shape[0]}, pattern says {pat.basis_len}"
            )
        if pat.gamma >= ambient_dim:
            raise ValueError(f"pattern d={pat.d} offset {pat.gamma} >= M={ambient_dim}")
        filters.append(filt)
    return DecompositionMatrix(
        ambient_dim=ambient_dim, patterns=tuple(patterns), basis_filters=tuple(filters)
    )


def reduce_dimension(S, r):
    """Reduced-dimension data vector r_D = S^H r (windowed form)."""
    return S.reduce(r)


def filter_output(W, r_D):
    """K x 1 estimate W^H r_D of the reduced-rank filter bank."""
    W = np.asarray(W)
    r_D = np.asarray(r_D)
    if W.ndim != 2 or r_D.shape != (W.shape[0],):
        raise ValueError(f"shape mismatch: W {W.shape}, r_D {r_D.shape}")
    return W.conj().T @ r_D
