import numpy as np
import pytest

from muvfdm.channel import (
    ChannelTaps,
    build_aggregate_channels,
    build_cross_channel_block,
    build_cross_channel_blocks,
    build_macro_channel,
    build_small_cell_channels,
    draw_taps,
    draw_trial_taps,
    estimate_csit,
    mmse_coefficients,
    mmse_error_variance,
    mmse_estimate,
    unit_cn,
)
from muvfdm.matrix_core import dft_matrix, subcarrier_masks, toeplitz_channel


def freq_response(h, N):
    # explicit DFT sum, independent of numpy.fft
    n = np.arange(N)[:, None]
    l = np.arange(len(h))[None, :]
    return (np.exp(-2j * np.pi * n * l / N) * h).sum(axis=1)


class TestDrawTaps:
    def test_shape_and_label(self, rng):
        h = draw_taps(rng, 6, link=("s", 0, "m", 1))
        assert h.taps.shape == (7,) and h.L == 6
        assert h.link == ("s", 0, "m", 1)

    def test_unit_power_on_average(self):
        rng = np.random.default_rng(0)
        power = np.mean([np.sum(np.abs(draw_taps(rng, 8).taps) ** 2) for _ in range(10_000)])
        assert 0.98 <= power <= 1.02

    def test_per_tap_variance(self):
        rng = np.random.default_rng(1)
        taps = np.array([draw_taps(rng, 3).taps for _ in range(20_000)])
        np.testing.assert_allclose(np.mean(np.abs(taps) ** 2, axis=0), 0.25, rtol=0.05)
        assert abs(np.mean(taps ** 2)) < 0.01  # circular symmetry

    def test_deterministic(self):
        a = draw_taps(np.random.default_rng(7), 4).taps
        b = draw_taps(np.random.default_rng(7), 4).taps
        np.testing.assert_array_equal(a, b)

    def test_l_zero(self, rng):
        assert draw_taps(rng, 0).taps.shape == (1,)


class TestMacroChannel:
    def test_identity_channel(self):
        h = np.zeros(5, complex)
        h[0] = 1
        H = build_macro_channel([h], subcarrier_masks(16, 1), 16, 4)
        np.testing.assert_allclose(H, np.eye(16), atol=1e-12)

    def test_diagonal_matches_owner_response(self, rng):
        N, L = 16, 3
        taps = [draw_taps(rng, L), draw_taps(rng, L)]
        H = build_macro_channel(taps, subcarrier_masks(N, 2), N, L)
        diag = np.diag(H)
        np.testing.assert_allclose(diag[:8], freq_response(taps[0].taps, N)[:8], atol=1e-12)
        np.testing.assert_allclose(diag[8:], freq_response(taps[1].taps, N)[8:], atol=1e-12)

    def test_off_diagonal_mass(self, rng):
        N, L = 32, 8
        H = build_macro_channel([draw_taps(rng, L) for _ in range(4)],
                                subcarrier_masks(N, 4), N, L)
        off = H - np.diag(np.diag(H))
        assert np.linalg.norm(off) <= 1e-10 * np.linalg.norm(H)

    def test_count_mismatch(self, rng):
        with pytest.raises(ValueError):
            build_macro_channel([draw_taps(rng, 2)], subcarrier_masks(8, 2), 8, 2)


class TestCrossChannel:
    def test_single_user_collapse(self, rng):
        h = draw_taps(rng, 4)
        B = build_cross_channel_block([h], subcarrier_masks(16, 1), 16, 4)
        np.testing.assert_allclose(B, dft_matrix(16) @ toeplitz_channel(h.taps, 16), atol=1e-12)

    def test_full_row_rank(self):
        rng = np.random.default_rng(3)
        N, L = 16, 4
        sm = draw_trial_taps(rng, 4, 1000, 1, L).sm  # 1000 independent chains
        blocks = build_cross_channel_blocks(sm, subcarrier_masks(N, 4), N, L)
        s = np.linalg.svd(blocks, compute_uv=False)
        assert np.all(s[:, -1] > 1e-8 * s[:, 0])

    def test_rows_depend_only_on_owner(self, rng):
        N, L = 16, 3
        masks = subcarrier_masks(N, 4)
        taps = [draw_taps(rng, L).taps for _ in range(4)]
        B1 = build_cross_channel_block(taps, masks, N, L)
        taps[2] = draw_taps(rng, L).taps
        B2 = build_cross_channel_block(taps, masks, N, L)
        changed = np.flatnonzero(np.any(B1 != B2, axis=1))
        np.testing.assert_array_equal(changed, masks[2].support)

    def test_batch_matches_single(self, rng):
        N, L = 16, 4
        masks = subcarrier_masks(N, 2)
        sm = draw_trial_taps(rng, 2, 2, 2, L).sm
        blocks = build_cross_channel_blocks(sm, masks, N, L)
        for c in range(sm.shape[0]):
            np.testing.assert_allclose(blocks[c], build_cross_channel_block(sm[c], masks, N, L),
                                       atol=1e-14)


class TestSmallCellChannels:
    def test_single_pair(self, rng):
        h = draw_taps(rng, 3)
        H_ss, H_ms = build_small_cell_channels([[h]], None, 8, 3, 1, 1)
        np.testing.assert_allclose(H_ss, dft_matrix(8) @ toeplitz_channel(h.taps, 8), atol=1e-12)
        assert H_ms is None

    def test_blocks(self, rng):
        N, L, K, g = 8, 2, 2, 3
        taps = draw_trial_taps(rng, 2, K, g, L)
        H_ss, H_ms = build_small_cell_channels(taps.ss, taps.ms, N, L, K, g)
        assert H_ss.shape == (K * N, K * g * (N + L))
        assert H_ms.shape == (K * N, N)
        F = dft_matrix(N)
        for c in range(K * g):
            for k in range(K):
                block = H_ss[k * N:(k + 1) * N, c * (N + L):(c + 1) * (N + L)]
                np.testing.assert_allclose(block, F @ toeplitz_channel(taps.ss[c, k], N),
                                           atol=1e-12)
        for k in range(K):
            block = H_ms[k * N:(k + 1) * N]
            off = block - np.diag(np.diag(block))
            assert np.linalg.norm(off) <= 1e-10 * np.linalg.norm(block)
            np.testing.assert_allclose(np.diag(block), freq_response(taps.ms[k], N), atol=1e-12)

    def test_incomplete_grid(self, rng):
        taps = draw_trial_taps(rng, 2, 2, 2, 2)
        with pytest.raises(ValueError):
            build_small_cell_channels(taps.ss[:3], None, 8, 2, 2, 2)


class TestAggregate:
    def test_dimensions_and_concatenation(self, rng):
        N, L, M, K, g = 16, 4, 4, 3, 2
        taps = draw_trial_taps(rng, M, K, g, L)
        ch = build_aggregate_channels(taps, subcarrier_masks(N, M), N, L, K, g)
        C = K * g
        assert ch.H_mm.shape == (N, N)
        assert ch.H_sm.shape == (N, C * (N + L))
        assert ch.H_ss.shape == (K * N, C * (N + L))
        assert ch.H_ms.shape == (K * N, N)
        for c in range(C):
            np.testing.assert_array_equal(ch.H_sm[:, c * (N + L):(c + 1) * (N + L)],
                                          ch.H_sm_blocks[c])

    def test_deterministic_in_taps(self, rng):
        taps = draw_trial_taps(rng, 2, 2, 2, 2)
        masks = subcarrier_masks(8, 2)
        a = build_aggregate_channels(taps, masks, 8, 2, 2, 2)
        b = build_aggregate_channels(taps, masks, 8, 2, 2, 2)
        np.testing.assert_array_equal(a.H_ss, b.H_ss)
        np.testing.assert_array_equal(a.H_sm, b.H_sm)

    def test_mismatched_grid(self, rng):
        taps = draw_trial_taps(rng, 2, 2, 2, 2)
        with pytest.raises(ValueError):
            build_aggregate_channels(taps, subcarrier_masks(8, 2), 8, 2, 2, 3)


class TestEstimation:
    def test_coefficients(self):
        # rho*tau = 10, sigma2 = 1, L = 4 -> prior 0.2
        a, b = mmse_coefficients(2.0, 5.0, 1.0, 4)
        c = np.sqrt(10) * 0.2 / (10 * 0.2 + 1)
        assert a == pytest.approx(c * np.sqrt(10))
        assert b == pytest.approx(c)
        assert mmse_error_variance(2.0, 5.0, 1.0, 4) == pytest.approx(0.2 / 3)

    def test_noiseless_and_prior_limits(self, rng):
        h = draw_taps(rng, 4)
        hi = estimate_csit(h, 1e12, 1.0, 1.0, rng)
        np.testing.assert_allclose(hi.h_hat.taps, h.taps, atol=1e-5)
        assert hi.error_variance < 1e-10
        lo = estimate_csit(h, 1e-12, 1.0, 1.0, rng)
        assert np.max(np.abs(lo.h_hat.taps)) < 1e-5
        assert lo.error_variance == pytest.approx(0.2, rel=1e-9)

    def test_variance_range_and_monotone(self):
        v = [mmse_error_variance(r, 1.0, 1.0, 7) for r in np.logspace(-3, 3, 25)]
        assert all(0 < x <= 1 / 8 for x in v)
        assert np.all(np.diff(v) < 0)

    @pytest.mark.parametrize("bad", [dict(rho=0.0), dict(tau=-1.0), dict(sigma2=0.0)])
    def test_rejects_non_positive(self, rng, bad):
        kw = {**dict(rho=1.0, tau=1.0, sigma2=1.0), **bad}
        with pytest.raises(ValueError):
            estimate_csit(draw_taps(rng, 2), kw["rho"], kw["tau"], kw["sigma2"], rng)

    def test_matches_vectorized(self):
        h = draw_taps(np.random.default_rng(0), 3)
        est = estimate_csit(h, 2.0, 3.0, 0.5, np.random.default_rng(9))
        noise = unit_cn(np.random.default_rng(9), (4,))
        np.testing.assert_allclose(est.h_hat.taps, mmse_estimate(h.taps, noise, 2.0, 3.0, 0.5))
        assert isinstance(est.h_hat, ChannelTaps)

    def test_mse_consistency(self):
        rng = np.random.default_rng(11)
        L = 7
        h = np.array([draw_taps(rng, L).taps for _ in range(10_000)])
        h_hat = mmse_estimate(h, unit_cn(rng, h.shape), 10.0, 1.0, 1.0)
        mse = np.mean(np.abs(h - h_hat) ** 2)
        assert mse == pytest.approx(mmse_error_variance(10.0, 1.0, 1.0, L), rel=0.05)

    def test_error_orthogonal_to_estimate(self):
        rng = np.random.default_rng(12)
        h = np.array([draw_taps(rng, 3).taps for _ in range(10_000)])
        h_hat = mmse_estimate(h, unit_cn(rng, h.shape), 4.0, 1.0, 1.0)
        err = h - h_hat
        for t in range(4):
            corr = np.vdot(h_hat[:, t], err[:, t]) / (
                np.linalg.norm(h_hat[:, t]) * np.linalg.norm(err[:, t]))
            assert abs(corr) <= 0.05
