import numpy as np
import pytest
import scipy.linalg

from muvfdm.exceptions import DegenerateChannelError, SingularSystemError
from muvfdm.matrix_core import (
    cp_insertion_matrix,
    dft_matrix,
    null_space_basis,
    null_space_basis_batch,
    regularized_inverse,
    subcarrier_masks,
    subcarrier_owner,
    toeplitz_channel,
    toeplitz_channel_batch,
)

from conftest import cn


class TestToeplitz:
    def test_shape_and_rows(self):
        h = np.array([1.0, 2.0, 3.0])
        T = toeplitz_channel(h, 4)
        assert T.shape == (4, 6)
        for r in range(4):
            np.testing.assert_array_equal(T[r, r:r + 3], [3.0, 2.0, 1.0])
            assert np.count_nonzero(T[r]) == 3

    def test_acts_as_linear_convolution(self, rng):
        h = cn(rng, 5)
        x = cn(rng, 16 + 4)
        expected = np.convolve(h, x)[4:4 + 16]
        np.testing.assert_allclose(toeplitz_channel(h, 16) @ x, expected, atol=1e-13)

    def test_explicit_L_mismatch(self):
        with pytest.raises(ValueError):
            toeplitz_channel(np.ones(3), 8, L=4)

    def test_batch_matches_single(self, rng):
        taps = cn(rng, 3, 2, 4)
        out = toeplitz_channel_batch(taps, 8)
        assert out.shape == (3, 2, 8, 11)
        for i in range(3):
            for j in range(2):
                np.testing.assert_array_equal(out[i, j], toeplitz_channel(taps[i, j], 8))


class TestCyclicPrefix:
    def test_prepends_tail(self, rng):
        x = cn(rng, 8)
        A = cp_insertion_matrix(8, 3)
        assert A.shape == (11, 8)
        np.testing.assert_array_equal(A @ x, np.concatenate([x[-3:], x]))

    @pytest.mark.parametrize("N, L", [(8, 8), (8, 9), (8, 0)])
    def test_rejects_bad_length(self, N, L):
        with pytest.raises(ValueError):
            cp_insertion_matrix(N, L)

    def test_circulant_after_prefix(self, rng):
        # T(h) A is the circulant matrix of h
        h = cn(rng, 4)
        C = toeplitz_channel(h, 8) @ cp_insertion_matrix(8, 3)
        col = np.zeros(8, complex)
        col[:4] = h
        np.testing.assert_allclose(C, scipy.linalg.circulant(col), atol=1e-14)


class TestDFT:
    @pytest.mark.parametrize("N", [1, 4, 7, 64])
    def test_unitary_and_matches_fft(self, N):
        F = dft_matrix(N)
        np.testing.assert_allclose(F @ F.conj().T, np.eye(N), atol=1e-12)
        np.testing.assert_allclose(F, np.fft.fft(np.eye(N), norm="ortho"), atol=1e-12)

    def test_large_n_phase_accuracy(self):
        F = dft_matrix(1024)
        np.testing.assert_allclose(F[1023, 1023] * np.sqrt(1024),
                                   np.exp(-2j * np.pi * (1023 * 1023 % 1024) / 1024),
                                   atol=1e-13)


class TestMasks:
    def test_partition(self):
        masks = subcarrier_masks(12, 3)
        assert [m.user_index for m in masks] == [1, 2, 3]
        np.testing.assert_array_equal(sum(m.diag for m in masks), np.ones(12))
        np.testing.assert_array_equal(masks[1].support, [4, 5, 6, 7])
        np.testing.assert_array_equal(masks[2].matrix, np.diag(masks[2].diag))

    def test_owner(self):
        np.testing.assert_array_equal(subcarrier_owner(subcarrier_masks(6, 2)),
                                      [0, 0, 0, 1, 1, 1])

    def test_requires_divisibility(self):
        with pytest.raises(ValueError):
            subcarrier_masks(10, 3)


class TestNullSpace:
    def test_basis(self, rng):
        H = cn(rng, 16, 20)
        E = null_space_basis(H)
        assert E.shape == (20, 4)
        assert np.linalg.norm(H @ E) <= 1e-12 * np.linalg.norm(H)
        np.testing.assert_allclose(E.conj().T @ E, np.eye(4), atol=1e-13)

    def test_degenerate(self, rng):
        H = cn(rng, 4, 7)
        H[3] = 2 * H[1]
        with pytest.raises(DegenerateChannelError):
            null_space_basis(H)
        with pytest.raises(DegenerateChannelError):
            null_space_basis_batch(H[None])
        with pytest.raises(DegenerateChannelError):
            null_space_basis(np.zeros((2, 3)))

    def test_not_wide(self, rng):
        with pytest.raises(ValueError):
            null_space_basis(cn(rng, 4, 4))

    def test_batch_spans_same_space(self, rng):
        H = cn(rng, 3, 8, 11)
        B = null_space_basis_batch(H)
        for i in range(3):
            E = null_space_basis(H[i])
            np.testing.assert_allclose(B[i] @ B[i].conj().T, E @ E.conj().T, atol=1e-13)


class TestRegularizedInverse:
    def test_scalar_case(self):
        for alpha in (0.0, 0.5, 3.0):
            np.testing.assert_allclose(regularized_inverse(2 * np.eye(3), alpha),
                                       2 / (alpha + 4) * np.eye(3), atol=1e-15)

    def test_zero_alpha_is_pseudo_inverse(self, rng):
        H = cn(rng, 3, 7)
        np.testing.assert_allclose(regularized_inverse(H, 0.0), np.linalg.pinv(H), atol=1e-12)

    def test_formula(self, rng):
        H = cn(rng, 4, 6)
        ref = H.conj().T @ np.linalg.inv(0.7 * np.eye(4) + H @ H.conj().T)
        np.testing.assert_allclose(regularized_inverse(H, 0.7), ref, atol=1e-13)

    def test_singular(self, rng):
        H = cn(rng, 3, 5)
        H[2] = H[0]
        with pytest.raises(SingularSystemError):
            regularized_inverse(H, 0.0)
        regularized_inverse(H, 1e-3)  # regularized system stays solvable

    def test_negative_alpha(self):
        with pytest.raises(ValueError):
            regularized_inverse(np.eye(2), -1.0)
