"""Random link generation, aggregate channel assembly and MMSE training.

Every link (MBS->MUE, SBS chain->MUE, SBS chain->SUE, MBS->SUE) is an
i.i.d. Rayleigh impulse response of ``L+1`` taps with total expected power
one. An SBS with ``gamma_tx`` transmit dimensions is modeled as
``gamma_tx`` co-located, independently faded chains; chain ``c`` belongs to
SBS ``c // gamma_tx``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._validation import check_positive, check_positive_int
from .matrix_core import (
    cp_insertion_matrix,
    dft_matrix,
    subcarrier_owner,
    toeplitz_channel,
    toeplitz_channel_batch,
)

__all__ = [
    "ChannelTaps",
    "TrialTaps",
    "AggregateChannels",
    "CsitEstimate",
    "draw_taps",
    "draw_tap_array",
    "draw_trial_taps",
    "freq_toeplitz",
    "build_macro_channel",
    "build_cross_channel_block",
    "build_cross_channel_blocks",
    "build_small_cell_channels",
    "build_aggregate_channels",
    "estimate_csit",
    "mmse_estimate",
    "mmse_coefficients",
    "mmse_error_variance",
]


@dataclass(frozen=True, eq=False)
class ChannelTaps:
    """Impulse response of one link.

    ``link`` is ``(tier_from, index_from, tier_to, index_to)``, e.g.
    ``("s", 2, "m", 0)`` for SBS chain 2 to MUE 0. Informational only.
    """

    taps: np.ndarray
    link: tuple = ()

    @property
    def L(self):
        return self.taps.size - 1

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.taps, dtype=dtype)


def _taps(x):
    return np.asarray(x.taps if isinstance(x, ChannelTaps) else x, dtype=complex)


def draw_tap_array(rng, shape, L):
    """i.i.d. CN(0, 1/(L+1)) taps with shape ``shape + (L+1,)``."""
    L = check_positive_int(L, "L", minimum=0)
    size = tuple(shape) + (L + 1,)
    scale = np.sqrt(0.5 / (L + 1))
    return scale * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def draw_taps(rng, L, link=()):
    return ChannelTaps(draw_tap_array(rng, (), L), tuple(link))


@dataclass(frozen=True, eq=False)
class TrialTaps:
    """All impulse responses of one channel realization.

    Shapes: ``mm (M, L+1)``, ``sm (C, M, L+1)``, ``ss (C, K, L+1)``,
    ``ms (K, L+1)`` with ``C = K * gamma_tx`` transmit chains.
    """

    mm: np.ndarray
    sm: np.ndarray
    ss: np.ndarray
    ms: np.ndarray

    @property
    def L(self):
        return self.mm.shape[-1] - 1

    @property
    def n_chains(self):
        return self.sm.shape[0]

    @property
    def K(self):
        return self.ss.shape[1]


def draw_trial_taps(rng, M, K, gamma_tx, L):
    # fixed draw order keeps trials reproducible across versions of the engine
    C = K * gamma_tx
    return TrialTaps(
        mm=draw_tap_array(rng, (M,), L),
        sm=draw_tap_array(rng, (C, M), L),
        ss=draw_tap_array(rng, (C, K), L),
        ms=draw_tap_array(rng, (K,), L),
    )


def freq_toeplitz(taps, N):
    """``F T(h)`` for a stack of tap vectors, shape ``(..., N, N+L)``."""
    return np.fft.fft(toeplitz_channel_batch(taps, N), axis=-2, norm="ortho")


def _check_masks(taps_per_mue, masks, N):
    if len(taps_per_mue) != len(masks):
        raise ValueError(
            f"{len(taps_per_mue)} tap vectors for {len(masks)} masks")
    for m in masks:
        if m.diag.size != N:
            raise ValueError(f"mask of size {m.diag.size} for N={N}")
    return subcarrier_owner(masks)


def build_macro_channel(taps_per_mue, masks, N, L):
    """Frequency-domain MBS->MUEs channel, ``sum_j B_j F T(h_j) A F^-1``.

    Diagonal up to rounding: the cyclic prefix turns each linear
    convolution into a circulant one.
    """
    _check_masks(taps_per_mue, masks, N)
    F = dft_matrix(N)
    A = cp_insertion_matrix(N, L)
    H = np.zeros((N, N), dtype=complex)
    for h, mask in zip(taps_per_mue, masks):
        T = toeplitz_channel(_taps(h), N, L)
        H += mask.diag[:, None] * (F @ T @ A @ F.conj().T)
    return H


def build_cross_channel_block(taps_per_mue, masks, N, L):
    """Masked interference channel ``sum_j B_j F T(h_j)`` of one SBS chain."""
    owner = _check_masks(taps_per_mue, masks, N)
    taps = np.array([_taps(h) for h in taps_per_mue])
    if taps.shape[-1] != L + 1:
        raise ValueError(f"taps of length {taps.shape[-1]}, expected {L + 1}")
    FT = freq_toeplitz(taps, N)
    return FT[owner, np.arange(N), :]


def build_cross_channel_blocks(sm_taps, masks, N, L):
    """:func:`build_cross_channel_block` for every chain, ``(C, N, N+L)``."""
    sm_taps = np.asarray(sm_taps)
    owner = _check_masks(sm_taps[0], masks, N)
    if sm_taps.shape[-1] != L + 1:
        raise ValueError(f"taps of length {sm_taps.shape[-1]}, expected {L + 1}")
    FT = freq_toeplitz(sm_taps, N)  # (C, M, N, N+L)
    return FT[:, owner, np.arange(N), :]


def build_small_cell_channels(ss_taps, ms_taps, N, L, K, gamma_tx):
    """Second-tier aggregate channels.

    ``ss_taps`` is the ``(K*gamma_tx, K)`` grid of chain->SUE taps and
    ``ms_taps`` the ``K`` MBS->SUE taps (or ``None``). Returns
    ``(H_ss, H_ms)`` with ``H_ss`` of shape ``KN x K*gamma_tx*(N+L)``:
    row block ``k`` (SUE) and column block ``c`` (chain) hold
    ``F T(h_ss[c, k])``. ``H_ms`` is ``KN x N`` with diagonal blocks
    ``F T(h_ms[k]) A F^-1``.
    """
    blocks = small_cell_blocks(ss_taps, N, L, K, gamma_tx)
    H_ss = assemble_small_cell(blocks)
    H_ms = None
    if ms_taps is not None:
        ms = np.array([_taps(h) for h in ms_taps])
        if ms.shape != (K, L + 1):
            raise ValueError(f"expected {K} MBS->SUE tap vectors of length {L + 1}")
        H_ms = _macro_to_sue(ms, N, L)
    return H_ss, H_ms


def small_cell_blocks(ss_taps, N, L, K, gamma_tx):
    if isinstance(ss_taps, (list, tuple)):
        ss_taps = [[_taps(h) for h in row] for row in ss_taps]
    ss = np.asarray(ss_taps, dtype=complex)
    C = K * gamma_tx
    if ss.shape != (C, K, L + 1):
        raise ValueError(
            f"incomplete tap grid: got {ss.shape}, expected {(C, K, L + 1)}")
    # (C, K, N, N+L) -> (K, C, N, N+L): SUE-major for row assembly
    return np.swapaxes(freq_toeplitz(ss, N), 0, 1)


def assemble_small_cell(blocks):
    K, C, N, P = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(K * N, C * P)


@dataclass(eq=False)
class AggregateChannels:
    """System matrices of one realization.

    ``H_sm_blocks`` is ``(C, N, N+L)``. The chain->SUE blocks
    ``H_ss_blocks`` ``(K, C, N, N+L)`` and the dense ``H_sm`` / ``H_ss``
    are assembled from ``taps`` on first access.
    """

    H_mm: np.ndarray
    H_sm_blocks: np.ndarray
    H_ms: np.ndarray
    taps: TrialTaps = field(repr=False)
    N: int
    L: int
    K: int
    gamma_tx: int

    @cached_property
    def H_ss_blocks(self):
        return small_cell_blocks(self.taps.ss, self.N, self.L, self.K, self.gamma_tx)

    @cached_property
    def H_sm(self):
        return np.concatenate(list(self.H_sm_blocks), axis=1)

    @cached_property
    def H_ss(self):
        return assemble_small_cell(self.H_ss_blocks)

    @property
    def n_chains(self):
        return self.K * self.gamma_tx


def build_aggregate_channels(taps, masks, N, L, K, gamma_tx):
    """Every aggregate matrix for one :class:`TrialTaps` draw."""
    if taps.n_chains != K * gamma_tx or taps.K != K:
        raise ValueError("tap grid does not match K and gamma_tx")
    if taps.L != L:
        raise ValueError(f"taps have L={taps.L}, expected {L}")
    H_mm = build_macro_channel(list(taps.mm), masks, N, L)
    H_sm_blocks = build_cross_channel_blocks(taps.sm, masks, N, L)
    H_ms = _macro_to_sue(taps.ms, N, L)
    return AggregateChannels(H_mm, H_sm_blocks, H_ms, taps, N, L, K, gamma_tx)


def _macro_to_sue(ms_taps, N, L):
    F = dft_matrix(N)
    A = cp_insertion_matrix(N, L)
    Fi = F.conj().T
    return np.vstack([F @ toeplitz_channel(h, N, L) @ A @ Fi for h in ms_taps])


# -- training -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CsitEstimate:
    h_hat: ChannelTaps
    error_variance: float


def mmse_error_variance(rho, tau, sigma2, L):
    """Per-tap variance of ``h - h_hat`` for the linear MMSE estimate."""
    prior = 1.0 / (L + 1)
    snr = rho * tau
    return prior * sigma2 / (snr * prior + sigma2)


def mmse_coefficients(rho, tau, sigma2, L):
    """``(a, b)`` with ``h_hat = a h + b n`` for unit-variance pilot noise ``n``."""
    prior = 1.0 / (L + 1)
    gain = np.sqrt(rho * tau)
    c = gain * prior / (rho * tau * prior + sigma2)
    return c * gain, c * np.sqrt(sigma2)


def mmse_estimate(taps, unit_noise, rho, tau, sigma2):
    """MMSE tap estimates from ``r = sqrt(rho tau) h + n``.

    ``unit_noise`` is standard CN(0, 1) with the shape of ``taps``; it is
    scaled by ``sqrt(sigma2)`` so the same draw can be reused across
    operating points.
    """
    taps = np.asarray(taps)
    a, b = mmse_coefficients(rho, tau, sigma2, taps.shape[-1] - 1)
    return a * taps + b * unit_noise


def unit_cn(rng, shape):
    return np.sqrt(0.5) * (rng.standard_normal(shape)
                           + 1j * rng.standard_normal(shape))


def estimate_csit(h, rho, tau, sigma2, rng):
    """Noisy pilot observation of one link followed by per-tap MMSE."""
    rho = check_positive(rho, "rho")
    tau = check_positive(tau, "tau")
    sigma2 = check_positive(sigma2, "sigma2")
    taps = _taps(h)
    h_hat = mmse_estimate(taps, unit_cn(rng, taps.shape), rho, tau, sigma2)
    link = h.link if isinstance(h, ChannelTaps) else ()
    return CsitEstimate(ChannelTaps(h_hat, link),
                        mmse_error_variance(rho, tau, sigma2, taps.size - 1))
