import numpy as np
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from muvfdm.channel import build_aggregate_channels, draw_trial_taps
from muvfdm.experiments.engine import SweepPoint, SweepResult
from muvfdm.experiments.results import emit_results, load_results
from muvfdm.matrix_core import null_space_basis, subcarrier_masks, toeplitz_channel
from muvfdm.metrics import PowerProfile, ribf_sum_rate, sinr_from_gains, sue_effective_sinr
from muvfdm.precoder import build_inner_precoder, direct_sum, normalize_cascade

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
seeds = st.integers(0, 2**32 - 1)


def cmat(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@given(seed=seeds, n=st.integers(1, 8), extra=st.integers(1, 6))
def test_null_basis(seed, n, extra):
    A = cmat(np.random.default_rng(seed), n, n + extra)
    E = null_space_basis(A)
    assert E.shape == (n + extra, extra)
    assert np.linalg.norm(A @ E) <= 1e-10 * np.linalg.norm(A)
    assert np.linalg.norm(E.conj().T @ E - np.eye(extra)) <= 1e-12


@given(taps=arrays(complex, st.integers(1, 6), elements=finite),
       x=arrays(complex, 24, elements=finite), N=st.integers(6, 18))
def test_toeplitz_is_convolution(taps, x, N):
    L = taps.size - 1
    T = toeplitz_channel(taps, N, L)
    u = x[:N + L]
    # output sample n is sum_l h(l) u(n + L - l): the fully overlapped part
    expected = np.convolve(u, taps)[L:L + N]
    np.testing.assert_allclose(T @ u, expected, atol=1e-9 * (1 + np.abs(expected).max()))


@given(seed=seeds, shapes=st.lists(st.tuples(st.integers(1, 4), st.integers(1, 4)),
                                   min_size=1, max_size=5))
def test_direct_sum_structure(seed, shapes):
    rng = np.random.default_rng(seed)
    blocks = [cmat(rng, r, c) for r, c in shapes]
    D = direct_sum(blocks)
    assert D.shape == (sum(r for r, _ in shapes), sum(c for _, c in shapes))
    r0 = c0 = 0
    mask = np.zeros(D.shape, bool)
    for B in blocks:
        r, c = B.shape
        np.testing.assert_array_equal(D[r0:r0 + r, c0:c0 + c], B)
        mask[r0:r0 + r, c0:c0 + c] = True
        r0, c0 = r0 + r, c0 + c
    assert not np.any(D[~mask])


@given(seed=seeds, c=st.floats(1e-6, 1e6))
def test_cascade_scale_invariance(seed, c):
    rng = np.random.default_rng(seed)
    E, phi = cmat(rng, 9, 4), cmat(rng, 4, 3)
    W1 = normalize_cascade(E, phi).W
    W2 = normalize_cascade(E, c * phi).W
    np.testing.assert_allclose(W2, W1, atol=1e-12)
    assert abs(np.vdot(W1, W1).real - 1) <= 1e-10


@given(seed=seeds)
def test_cascade_null_on_channels(seed):
    rng = np.random.default_rng(seed)
    N, L, M, K, g = 8, 2, 2, 2, 4
    taps = draw_trial_taps(rng, M, K, g, L)
    ch = build_aggregate_channels(taps, subcarrier_masks(N, M), N, L, K, g)
    inner = build_inner_precoder(ch.H_sm_blocks)
    W = normalize_cascade(inner, cmat(rng, inner.n_chains * L, K * N)).W
    assert np.linalg.norm(ch.H_sm @ W) <= 1e-10 * np.linalg.norm(ch.H_sm)


@given(X=st.floats(1e-9, 1e9), tau=st.floats(1e-3, 1e9))
def test_effective_sinr_penalty(X, tau):
    eff = sue_effective_sinr(X, tau)
    assert 0 <= eff < X


@given(seed=seeds, noise=st.floats(1e-6, 1e3))
def test_sinr_decomposition(seed, noise):
    G = cmat(np.random.default_rng(seed), 5, 5)
    s = sinr_from_gains(G, noise)
    power = np.abs(G) ** 2
    interference = power.sum(axis=1) - np.diag(power)
    np.testing.assert_allclose(s * (interference + noise), np.diag(power), rtol=1e-10)


@given(a=st.lists(st.floats(0, 1e6), max_size=10), b=st.lists(st.floats(0, 1e6), max_size=10))
def test_rate_additivity(a, b):
    total = ribf_sum_rate(a + b, 1e6, 16, 4)
    parts = ribf_sum_rate(a, 1e6, 16, 4) + ribf_sum_rate(b, 1e6, 16, 4)
    assert abs(total - parts) <= 1e-9 * max(1.0, total)


@given(snr=st.floats(-50, 60))
def test_power_split(snr):
    p = PowerProfile.from_snr_db(snr, 3)
    assert abs(p.P_s * p.K - p.P_m) <= 1e-12 * p.P_m


point = st.builds(
    SweepPoint,
    snr_db=st.floats(-50, 50, allow_nan=False),
    scheme=st.sampled_from(["dpc", "ribf", "mf", "separation", "ribf_ratio"]),
    tier=st.sampled_from(["macro", "small", "total"]),
    tau_fraction=st.one_of(st.none(), st.floats(1e-3, 1.0)),
    beta=st.floats(0.1, 10),
    K=st.integers(1, 12),
    mean_rate_bps=st.floats(0, 1e9, allow_nan=False),
    stderr_bps=st.floats(0, 1e9, allow_nan=False),
    trials=st.integers(1, 10_000),
    resamples=st.integers(0, 100),
    seed=st.integers(0, 2**64 - 1),
)


@given(points=st.lists(point, max_size=8), fmt=st.sampled_from(["csv", "json"]))
def test_serialization_round_trip(points, fmt):
    res = SweepResult(points, {"seed": 0})
    assert load_results(emit_results(res, fmt), format=fmt).points == points
