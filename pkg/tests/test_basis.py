"""Multi-index enumeration, basis evaluation, kernel and scaling."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from monoqr.basis import Kernel, basis_eval, kernel_eval, multi_indices, scale_matrix


class TestMultiIndices:
    def test_d1_r1(self):
        assert multi_indices(1, 1).indices == ((0,), (1,))

    def test_d1_r2(self):
        assert multi_indices(1, 2).indices == ((0,), (1,), (2,))

    def test_d2_r1(self):
        s = multi_indices(2, 1)
        assert s.indices == ((0, 0), (1, 0), (0, 1))
        assert len(s) == 3

    def test_rejects_zero_arguments(self):
        with pytest.raises(ValueError):
            multi_indices(0, 1)
        with pytest.raises(ValueError):
            multi_indices(1, 0)

    def test_size_matches_binomial(self):
        for d in range(1, 4):
            for r in range(1, 5):
                assert len(multi_indices(d, r)) == math.comb(d + r, r)

    def test_degrees_in_order(self):
        s = multi_indices(2, 2)
        assert list(s.degrees) == sorted(s.degrees)
        assert s.indices[0] == (0, 0)


class TestBasisEval:
    def test_d1_r1_at_zero(self):
        np.testing.assert_array_equal(basis_eval(multi_indices(1, 1), 0.0), [1.0, 0.0])

    def test_d1_r2_powers_of_two(self):
        np.testing.assert_array_equal(
            basis_eval(multi_indices(1, 2), 2.0), [1.0, 2.0, 4.0]
        )

    def test_d2_r1_projection(self):
        np.testing.assert_array_equal(
            basis_eval(multi_indices(2, 1), np.array([3.0, -1.0])), [1.0, 3.0, -1.0]
        )

    def test_zero_index_entry_is_one(self):
        rng = np.random.default_rng(0)
        s = multi_indices(2, 3)
        pts = rng.normal(size=(20, 2))
        out = basis_eval(s, pts)
        assert out.shape == (20, len(s))
        np.testing.assert_array_equal(out[:, 0], np.ones(20))

    def test_batch_matches_single(self):
        s = multi_indices(1, 2)
        pts = np.array([[0.3], [-1.7]])
        batch = basis_eval(s, pts)
        for i in range(2):
            np.testing.assert_array_equal(batch[i], basis_eval(s, pts[i]))


class TestKernelEval:
    def test_interior(self):
        assert kernel_eval(Kernel.UNIFORM, 0.0) == 1.0

    def test_boundary_included(self):
        assert kernel_eval(Kernel.UNIFORM, 0.5) == 1.0
        assert kernel_eval(Kernel.UNIFORM, -0.5) == 1.0

    def test_outside(self):
        assert kernel_eval(Kernel.UNIFORM, 0.51) == 0.0

    def test_batch(self):
        pts = np.array([[0.0], [0.49], [0.5], [0.500001]])
        np.testing.assert_array_equal(
            kernel_eval(Kernel.UNIFORM, pts), [1.0, 1.0, 1.0, 0.0]
        )

    def test_integrates_to_one(self):
        val, _ = quad(lambda t: kernel_eval(Kernel.UNIFORM, t), -0.5, 0.5)
        assert abs(val - 1.0) < 1e-10

    def test_d2_box(self):
        assert kernel_eval(Kernel.UNIFORM, np.array([0.5, 0.5])) == 1.0
        assert kernel_eval(Kernel.UNIFORM, np.array([0.5, 0.51])) == 0.0


class TestScaleMatrix:
    def test_d1_r1(self):
        np.testing.assert_allclose(
            scale_matrix(multi_indices(1, 1), 0.9).diagonal, [1.0, 0.9]
        )

    def test_d1_r2(self):
        np.testing.assert_allclose(
            scale_matrix(multi_indices(1, 2), 2.0).diagonal, [1.0, 2.0, 4.0]
        )

    def test_unit_bandwidth_is_identity(self):
        s = multi_indices(2, 2)
        np.testing.assert_array_equal(
            scale_matrix(s, 1.0).diagonal, np.ones(len(s))
        )

    def test_reciprocal_bandwidths_cancel(self):
        s = multi_indices(1, 3)
        prod = scale_matrix(s, 0.37).diagonal * scale_matrix(s, 1 / 0.37).diagonal
        np.testing.assert_allclose(prod, np.ones(len(s)), rtol=1e-14)

    def test_inverse_diagonal(self):
        m = scale_matrix(multi_indices(1, 2), 0.5)
        np.testing.assert_allclose(m.diagonal * m.inverse_diagonal, [1.0, 1.0, 1.0])

    def test_rejects_nonpositive_bandwidth(self):
        with pytest.raises(ValueError):
            scale_matrix(multi_indices(1, 1), 0.0)
        with pytest.raises(ValueError):
            scale_matrix(multi_indices(1, 1), -1.0)
