"""Numeric primitives: softmax, linear maps, layer normalization, GELU."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from surgphase.errors import ShapeError
from surgphase.linalg import (
    LinearLayer,
    gelu,
    layer_norm,
    linear_apply,
    sigmoid,
    softmax_rows,
)

finite_rows = hnp.arrays(
    dtype=np.float64,
    shape=st.tuples(st.integers(1, 6), st.integers(1, 8)),
    elements=st.floats(min_value=-50.0, max_value=50.0),
)


class TestSoftmax:
    def test_uniform_row(self) -> None:
        out = softmax_rows([[0.0, 0.0, 0.0]])
        np.testing.assert_allclose(out, [[1 / 3, 1 / 3, 1 / 3]], rtol=0, atol=1e-15)

    def test_frozen_one_two_three(self) -> None:
        # Reference values computed once with 50-digit arithmetic.
        want = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219]
        np.testing.assert_allclose(softmax_rows([[1.0, 2.0, 3.0]])[0], want, rtol=0, atol=1e-12)

    def test_shift_invariance_hand_case(self) -> None:
        base = np.array([[5.0, 5.0], [5.0, 5.0]])
        np.testing.assert_allclose(
            softmax_rows(base + 100.0), softmax_rows(base), rtol=0, atol=1e-12
        )

    @given(finite_rows)
    def test_rows_sum_to_one(self, m: np.ndarray) -> None:
        out = softmax_rows(m)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, rtol=0, atol=1e-9)
        assert (out > 0).all() and (out <= 1).all()

    @given(finite_rows, st.floats(min_value=-30, max_value=30))
    def test_shift_invariance(self, m: np.ndarray, c: float) -> None:
        np.testing.assert_allclose(softmax_rows(m + c), softmax_rows(m), rtol=0, atol=1e-12)

    def test_empty_input_rejected(self) -> None:
        with pytest.raises(ShapeError, match="empty"):
            softmax_rows(np.empty((0, 3)))

    def test_non_finite_rejected(self) -> None:
        with pytest.raises(ValueError):
            softmax_rows([[1.0, float("nan")]])


class TestLinearApply:
    def test_identity(self) -> None:
        layer = LinearLayer(np.eye(2), np.zeros(2))
        np.testing.assert_array_equal(linear_apply(layer, [[1.0, 0.0]]), [[1.0, 0.0]])

    def test_zero_weight_constant_map(self) -> None:
        layer = LinearLayer(np.zeros((2, 3)), np.array([2.0, 3.0]))
        out = linear_apply(layer, np.ones((4, 3)))
        np.testing.assert_array_equal(out, np.tile([2.0, 3.0], (4, 1)))

    def test_hand_case(self) -> None:
        layer = LinearLayer(np.array([[1.0, 1.0]]), np.array([0.0]))
        np.testing.assert_array_equal(linear_apply(layer, [[2.0, 5.0]]), [[7.0]])

    @given(
        hnp.arrays(np.float64, (3, 4), elements=st.floats(-10, 10)),
        hnp.arrays(np.float64, (3, 4), elements=st.floats(-10, 10)),
    )
    def test_additivity(self, x1: np.ndarray, x2: np.ndarray) -> None:
        gen = np.random.default_rng(7)
        layer = LinearLayer(gen.normal(size=(2, 4)), gen.normal(size=2))
        lhs = linear_apply(layer, x1 + x2) + layer.bias
        rhs = linear_apply(layer, x1) + linear_apply(layer, x2)
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-9)

    def test_dim_mismatch_names_both_dims(self) -> None:
        layer = LinearLayer(np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(ShapeError) as err:
            linear_apply(layer, np.zeros((1, 5)))
        assert "3" in str(err.value) and "5" in str(err.value)

    def test_bad_layer_shapes_rejected(self) -> None:
        with pytest.raises(ShapeError):
            LinearLayer(np.zeros((2, 3)), np.zeros(4))


class TestLayerNorm:
    def test_constant_row_maps_to_shift(self) -> None:
        out = layer_norm([[4.0, 4.0, 4.0]], np.ones(3), np.zeros(3))
        np.testing.assert_array_equal(out, [[0.0, 0.0, 0.0]])

    def test_two_point_row_hand_value(self) -> None:
        # variance([1,-1]) = 1, so each entry is 1/sqrt(1 + 1e-5).
        want = 1.0 / math.sqrt(1.0 + 1e-5)
        out = layer_norm([[1.0, -1.0]], np.ones(2), np.zeros(2), eps=1e-5)
        np.testing.assert_allclose(out, [[want, -want]], rtol=0, atol=1e-15)
        assert abs(want - 0.9999950000374997) < 1e-15

    def test_zero_gain_collapses_to_shift(self) -> None:
        shift = np.array([5.0, 6.0])
        out = layer_norm(np.arange(6.0).reshape(3, 2), np.zeros(2), shift)
        np.testing.assert_array_equal(out, np.tile(shift, (3, 1)))

    def test_non_positive_eps_rejected(self) -> None:
        for eps in (0.0, -1e-3):
            with pytest.raises(ValueError):
                layer_norm([[1.0, 2.0]], np.ones(2), np.zeros(2), eps=eps)

    def test_gain_shift_shape_checked(self) -> None:
        with pytest.raises(ShapeError):
            layer_norm([[1.0, 2.0]], np.ones(3), np.zeros(2))

    @given(
        hnp.arrays(
            np.float64,
            st.tuples(st.integers(1, 5), st.integers(2, 8)),
            elements=st.floats(-100, 100),
        )
    )
    def test_unit_variance_property(self, m: np.ndarray) -> None:
        # The contract targets rows whose spread is not degenerate; a tiny
        # explicit eps keeps the normalizer from biasing the variance.
        variances = m.var(axis=1)
        out = layer_norm(m, np.ones(m.shape[1]), np.zeros(m.shape[1]), eps=1e-12)
        for row, var in zip(out, variances):
            if var >= 1e-3:
                assert abs(row.var() - 1.0) < 1e-4


class TestActivations:
    def test_gelu_fixed_points(self) -> None:
        assert gelu(np.array([[0.0]]))[0, 0] == 0.0
        np.testing.assert_allclose(gelu(np.array([[10.0]]))[0, 0], 10.0, atol=1e-6)
        np.testing.assert_allclose(gelu(np.array([[-10.0]]))[0, 0], 0.0, atol=1e-6)

    def test_gelu_matches_formula(self) -> None:
        x = 0.7
        inner = math.sqrt(2.0 / math.pi) * (x + 0.044715 * x**3)
        want = 0.5 * x * (1.0 + math.tanh(inner))
        np.testing.assert_allclose(gelu(np.array([[x]]))[0, 0], want, rtol=0, atol=1e-15)

    def test_sigmoid_range_and_midpoint(self) -> None:
        assert sigmoid(np.array([0.0]))[0] == 0.5
        big = sigmoid(np.array([-800.0, 800.0]))
        assert 0.0 <= big[0] < 1e-300 and big[1] == 1.0
        x = np.linspace(-5, 5, 41)
        assert (np.diff(sigmoid(x)) > 0).all()
