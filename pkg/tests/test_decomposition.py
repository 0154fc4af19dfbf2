"""Tests for the banded decomposition building blocks."""

import numpy as np
import pytest

from slra.decomposition import (
    DecompositionMatrix,
    ShapingPattern,
    assemble_decomposition,
    build_hankel,
    build_shaping_pattern,
    default_patterns,
    filter_output,
    hankel_window,
    reduce_dimension,
    window_stack,
)


def _crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


class TestShapingPattern:
    def test_first_dimension_first_branch(self):
        assert build_shaping_pattern(1, 1, 75, 4, 3).gamma == 0

    def test_default_rule_values(self):
        # floor(75/4) = 18
        assert build_shaping_pattern(2, 1, 75, 4, 3).gamma == 18
        assert build_shaping_pattern(3, 2, 75, 4, 3).gamma == 37

    def test_offset_bounds(self):
        pat = build_shaping_pattern(4, 4, 75, 4, 3)
        assert 0 <= pat.gamma <= 74

    def test_out_of_range_dimension(self):
        with pytest.raises(ValueError):
            build_shaping_pattern(5, 1, 75, 4, 3)
        with pytest.raises(ValueError):
            build_shaping_pattern(0, 1, 75, 4, 3)
        with pytest.raises(ValueError):
            build_shaping_pattern(1, 0, 75, 4, 3)

    def test_pattern_off_the_vector(self):
        # d=4, b=2, M=4, D=4: gamma = 3*1 + 1 = 4 >= M
        with pytest.raises(ValueError):
            build_shaping_pattern(4, 2, 4, 4, 1)

    def test_invalid_fields(self):
        with pytest.raises(ValueError):
            ShapingPattern(d=1, b=1, gamma=-1, basis_len=3)
        with pytest.raises(ValueError):
            ShapingPattern(d=1, b=1, gamma=0, basis_len=0)


class TestHankel:
    def test_documented_structure(self):
        a, b, c, d = 1.0, 2.0, 3.0, 4.0
        H = build_hankel(np.array([a, b, c, d]), 2)
        assert np.allclose(H, np.array([[a, b], [b, c], [c, d], [d, 0.0]]))

    def test_single_column_is_input(self):
        rng = np.random.default_rng(0)
        x = _crandn(rng, 6)
        H = build_hankel(x, 1)
        assert np.allclose(H[:, 0], x)

    def test_delta_input(self):
        H = build_hankel(np.array([1.0, 0.0, 0.0]), 3)
        expected = np.zeros((3, 3))
        expected[0, 0] = 1.0
        assert np.allclose(H, expected)

    def test_window_equals_hankel_row(self):
        rng = np.random.default_rng(1)
        x = _crandn(rng, 10)
        H = build_hankel(x, 4)
        for g in range(10):
            assert np.allclose(hankel_window(x, g, 4), H[g])

    def test_window_stack_matches_scalar_windows(self):
        rng = np.random.default_rng(2)
        x = _crandn(rng, 12)
        offs = [0, 3, 9, 11]
        U = window_stack(x, offs, 3)
        for row, g in zip(U, offs):
            assert np.allclose(row, hankel_window(x, g, 3))

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            build_hankel(np.ones(3), 0)
        with pytest.raises(ValueError):
            build_hankel(np.ones((2, 2)), 1)


class TestAssembly:
    def test_single_unit_filter(self):
        pat = ShapingPattern(d=1, b=1, gamma=0, basis_len=1)
        S = assemble_decomposition([np.array([1.0])], [pat], 3)
        assert np.allclose(S.matrix[:, 0], [1.0, 0.0, 0.0])

    def test_two_filter_placement(self):
        al, be, ga, de = 1.1, 2.2 - 1j, 3.3, 4.4 + 2j
        pats = [ShapingPattern(d=1, b=1, gamma=0, basis_len=2),
                ShapingPattern(d=2, b=1, gamma=2, basis_len=2)]
        S = assemble_decomposition([[al, be], [ga, de]], pats, 4)
        assert np.allclose(S.matrix[:, 0], [al, be, 0, 0])
        assert np.allclose(S.matrix[:, 1], [0, 0, ga, de])

    def test_placement_sparsity(self):
        rng = np.random.default_rng(3)
        M, D, I = 20, 4, 3
        pats = default_patterns(M, D, I)
        S = assemble_decomposition([_crandn(rng, I) for _ in range(D)], pats, M)
        nnz = (np.abs(S.matrix) > 0).sum(axis=0)
        assert np.all(nnz <= I)

    def test_truncation_past_ambient_end(self):
        pat = ShapingPattern(d=1, b=1, gamma=3, basis_len=3)
        S = assemble_decomposition([[1.0, 2.0, 3.0]], [pat], 4)
        assert np.allclose(S.matrix[:, 0], [0, 0, 0, 1.0])

    def test_length_mismatch(self):
        pat = ShapingPattern(d=1, b=1, gamma=0, basis_len=3)
        with pytest.raises(ValueError):
            assemble_decomposition([[1.0, 2.0]], [pat], 5)

    def test_mixed_basis_lengths(self):
        rng = np.random.default_rng(4)
        pats = [ShapingPattern(d=1, b=1, gamma=0, basis_len=2),
                ShapingPattern(d=2, b=1, gamma=4, basis_len=4)]
        filters = [_crandn(rng, 2), _crandn(rng, 4)]
        S = assemble_decomposition(filters, pats, 10)
        r = _crandn(rng, 10)
        assert np.allclose(S.reduce(r), S.matrix.conj().T @ r)


class TestHankelCommutation:
    def test_windowed_reduce_equals_dense(self):
        """Both routes to the reduced coordinate agree to machine precision:
        the window picked out of the observation Hankel matrix versus the
        dense assembled matrix product."""
        rng = np.random.default_rng(7)
        M, I = 75, 3
        for _ in range(200):
            r = _crandn(rng, M)
            s = _crandn(rng, I)
            d = int(rng.integers(1, 5))
            b = int(rng.integers(1, 5))
            pat = build_shaping_pattern(d, b, M, 4, I)
            selector = np.zeros(M)
            selector[pat.gamma] = 1.0
            lhs = np.vdot(s, selector @ build_hankel(r, I))
            S = assemble_decomposition([s], [pat], M)
            rhs = (S.matrix.conj().T @ r)[0]
            assert abs(lhs - rhs) <= 1e-12 * max(abs(rhs), 1e-30)


class TestReduce:
    def test_identity_top_returns_leading_coordinates(self):
        rng = np.random.default_rng(8)
        M, D = 9, 4
        pats = [ShapingPattern(d=d + 1, b=1, gamma=d, basis_len=1) for d in range(D)]
        S = assemble_decomposition([np.array([1.0])] * D, pats, M)
        for _ in range(5):
            r = _crandn(rng, M)
            assert np.allclose(reduce_dimension(S, r), r[:D])

    def test_zero_input(self):
        pats = default_patterns(12, 3, 2)
        rng = np.random.default_rng(9)
        S = assemble_decomposition([_crandn(rng, 2) for _ in range(3)], pats, 12)
        assert np.allclose(S.reduce(np.zeros(12)), 0.0)

    def test_windowed_equals_dense_matrix_product(self):
        rng = np.random.default_rng(10)
        M, D, I = 30, 5, 4
        pats = default_patterns(M, D, I)
        S = assemble_decomposition([_crandn(rng, I) for _ in range(D)], pats, M)
        for _ in range(20):
            r = _crandn(rng, M)
            assert np.allclose(S.reduce(r), S.matrix.conj().T @ r)

    def test_linearity(self):
        rng = np.random.default_rng(11)
        M, D, I = 20, 3, 3
        pats = default_patterns(M, D, I)
        S = assemble_decomposition([_crandn(rng, I) for _ in range(D)], pats, M)
        r1, r2 = _crandn(rng, M), _crandn(rng, M)
        a, b = _crandn(rng, 1)[0], _crandn(rng, 1)[0]
        assert np.allclose(S.reduce(a * r1 + b * r2),
                           a * S.reduce(r1) + b * S.reduce(r2))

    def test_dimension_mismatch(self):
        pats = default_patterns(10, 2, 2)
        rng = np.random.default_rng(12)
        S = assemble_decomposition([_crandn(rng, 2) for _ in range(2)], pats, 10)
        with pytest.raises(ValueError):
            S.reduce(np.zeros(11))


class TestFilterOutput:
    def test_unit_first_row_initialization(self):
        D, K = 4, 3
        W = np.zeros((D, K), dtype=complex)
        W[0, :] = 1.0
        r_D = np.array([2.0 + 1j, 5.0, 6.0, 7.0])
        assert np.allclose(filter_output(W, r_D), (2.0 + 1j) * np.ones(K))

    def test_zero_reduced_vector(self):
        rng = np.random.default_rng(13)
        W = _crandn(rng, 4, 2)
        assert np.allclose(filter_output(W, np.zeros(4)), 0.0)

    def test_against_elementwise_loop(self):
        rng = np.random.default_rng(14)
        D, K = 5, 3
        W = _crandn(rng, D, K)
        r_D = _crandn(rng, D)
        expected = np.zeros(K, dtype=complex)
        for k in range(K):
            for d in range(D):
                expected[k] += np.conj(W[d, k]) * r_D[d]
        assert np.allclose(filter_output(W, r_D), expected)

    def test_linearity_in_input(self):
        rng = np.random.default_rng(15)
        W = _crandn(rng, 4, 2)
        u, v = _crandn(rng, 4), _crandn(rng, 4)
        a = 0.7 - 0.2j
        assert np.allclose(filter_output(W, a * u + v),
                           a * filter_output(W, u) + filter_output(W, v))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            filter_output(np.ones((3, 2)), np.ones(4))
