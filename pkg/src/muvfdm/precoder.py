"""Cascaded small-cell precoder: per-chain kernel (inner) stage, joint
outer stage over the effective channel, and trace normalization.

The inner stage keeps every SBS chain silent on the MUE receive
subspace; the outer stage handles co-tier interference among SUEs.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_matrix, check_positive, check_positive_int
from .exceptions import DegeneratePrecoderError, InsufficientDimensionsError
from .matrix_core import null_space_basis, null_space_basis_batch, regularized_inverse

__all__ = [
    "InnerPrecoder",
    "CascadedPrecoder",
    "LoadRate",
    "vfdm_inner",
    "build_inner_precoder",
    "direct_sum",
    "effective_channel",
    "effective_channel_blocks",
    "effective_channel_taps",
    "ribf_outer",
    "mf_outer",
    "normalize_cascade",
    "OUTER_PRECODERS",
    "register_outer",
    "MUVFDMPrecoder",
]


@dataclass(frozen=True, eq=False)
class InnerPrecoder:
    """Kernel bases of all transmit chains, ``blocks`` of shape ``(C, N+L, L)``."""

    blocks: np.ndarray

    @property
    def n_chains(self):
        return self.blocks.shape[0]

    @property
    def E(self):
        return direct_sum(list(self.blocks))

    def apply(self, X):
        """``E @ X`` without forming ``E``; ``X`` has ``C*L`` rows."""
        C, P, L = self.blocks.shape
        X = np.asarray(X)
        if X.shape[0] != C * L:
            raise ValueError(f"expected {C * L} rows, got {X.shape[0]}")
        Xb = X.reshape(C, L, -1)
        out = np.matmul(self.blocks, Xb).reshape(C * P, -1)
        return out if X.ndim > 1 else out[:, 0]


@dataclass(frozen=True, eq=False)
class CascadedPrecoder:
    """``phi`` is the outer stage as built; ``W = E phi / norm_factor``."""

    phi: np.ndarray
    W: np.ndarray
    norm_factor: float

    @property
    def phi_normalized(self):
        # outer stage of the unit-trace cascade: E @ phi_normalized == W
        return self.phi / self.norm_factor


@dataclass(frozen=True)
class LoadRate:
    """Ratio of transmit to receive dimensions, ``gamma_tx L / (gamma_rx N)``."""

    gamma_tx: int
    L: int
    N: int
    gamma_rx: int = 1

    def __post_init__(self):
        for name in ("gamma_tx", "L", "N", "gamma_rx"):
            check_positive_int(getattr(self, name), name)

    @property
    def beta(self):
        return Fraction(self.gamma_tx * self.L, self.gamma_rx * self.N)

    @property
    def ribf_feasible(self):
        return self.gamma_tx * self.L >= self.gamma_rx * self.N

    @classmethod
    def from_beta(cls, beta, L, N, gamma_rx=1):
        """Smallest integer ``gamma_tx`` that realizes ``beta`` exactly."""
        g = Fraction(beta).limit_denominator(10**6) * gamma_rx * N / L
        if g.denominator != 1 or g <= 0:
            raise ValueError(f"beta={beta} is not reachable with L={L}, N={N}")
        return cls(int(g), L, N, gamma_rx)


def vfdm_inner(H_sm_block):
    """Orthonormal ``(N+L) x L`` kernel basis of one chain's cross block."""
    return null_space_basis(H_sm_block)


def build_inner_precoder(H_sm_blocks):
    """Inner stage for a stack ``(C, N, N+L)`` of cross-tier blocks."""
    return InnerPrecoder(null_space_basis_batch(H_sm_blocks))


def direct_sum(blocks):
    if len(blocks) == 0:
        raise ValueError("direct_sum of an empty list")
    return scipy.linalg.block_diag(*[np.atleast_2d(b) for b in blocks])


def effective_channel(H_ss, E):
    """``H_ss @ E``; ``E`` may be a dense matrix or an :class:`InnerPrecoder`."""
    H_ss = check_matrix(H_ss, "H_ss")
    if isinstance(E, InnerPrecoder):
        C, P, L = E.blocks.shape
        if H_ss.shape[1] != C * P:
            raise ValueError(
                f"H_ss has {H_ss.shape[1]} columns, inner precoder {C * P} rows")
        Hb = H_ss.reshape(H_ss.shape[0], C, P).transpose(1, 0, 2)
        return np.matmul(Hb, E.blocks).transpose(1, 0, 2).reshape(-1, C * L)
    E = check_matrix(E, "E")
    if H_ss.shape[1] != E.shape[0]:
        raise ValueError(f"H_ss {H_ss.shape} and E {E.shape} not conformable")
    return H_ss @ E


def effective_channel_blocks(H_ss_blocks, inner):
    """Effective channel from ``(K, C, N, N+L)`` blocks, shape ``(KN, C*L)``."""
    blocks = inner.blocks if isinstance(inner, InnerPrecoder) else inner
    K, C, N, _ = H_ss_blocks.shape
    L = blocks.shape[-1]
    out = np.matmul(H_ss_blocks, blocks[None])  # (K, C, N, L)
    return out.transpose(0, 2, 1, 3).reshape(K * N, C * L)


def effective_channel_taps(ss_taps, inner, N):
    """Effective channel straight from chain->SUE taps ``(C, K, L+1)``.

    Uses ``T(h) E_c = sum_l h(l) E_c[L-l : L-l+N]`` followed by a DFT
    along the subcarrier axis, avoiding the dense ``N x (N+L)`` blocks.
    Equal to :func:`effective_channel_blocks` up to rounding.
    """
    blocks = inner.blocks if isinstance(inner, InnerPrecoder) else inner
    ss = np.asarray(ss_taps, dtype=complex)
    C, K, n_taps = ss.shape
    L = n_taps - 1
    Lc = blocks.shape[-1]
    if blocks.shape[:2] != (C, N + L):
        raise ValueError(f"inner blocks {blocks.shape} do not match taps {ss.shape}")
    windows = np.stack([blocks[:, L - l:L - l + N, :] for l in range(n_taps)], axis=1)
    time = np.matmul(ss, windows.reshape(C, n_taps, N * Lc)).reshape(C, K, N, Lc)
    freq = np.fft.fft(time, axis=2, norm="ortho")
    return freq.transpose(1, 2, 0, 3).reshape(K * N, C * Lc)


def ribf_outer(H_bar, noise_over_power):
    """Regularized inverse ``H^H (a I + H H^H)^{-1}`` with ``a = sigma2/P_s``."""
    H_bar = check_matrix(H_bar, "H_bar")
    noise_over_power = check_positive(noise_over_power, "noise_over_power")
    rows, cols = H_bar.shape
    if cols < rows:
        raise InsufficientDimensionsError(
            f"insufficient transmit dimensions: {cols} < {rows} receive symbols")
    return regularized_inverse(H_bar, noise_over_power)


def mf_outer(H_bar, noise_over_power=None):
    return check_matrix(H_bar, "H_bar").conj().T


OUTER_PRECODERS = {"ribf": ribf_outer, "mf": mf_outer}


def register_outer(name, func):
    """Add an outer precoder ``func(H_bar, noise_over_power) -> phi``."""
    OUTER_PRECODERS[name] = func


def normalize_cascade(E, phi):
    """Unit-trace cascade ``W = E phi / sqrt(tr(E phi phi^H E^H))``."""
    phi = np.asarray(phi, dtype=complex)
    if isinstance(E, InnerPrecoder):
        Ephi = E.apply(phi)
    else:
        E = check_matrix(E, "E")
        if E.shape[1] != phi.shape[0]:
            raise ValueError(f"E {E.shape} and phi {phi.shape} not conformable")
        Ephi = E @ phi
    power = np.vdot(Ephi, Ephi).real
    if not power > 0:
        raise DegeneratePrecoderError("degenerate precoder: zero cascade")
    norm = float(np.sqrt(power))
    return CascadedPrecoder(phi, Ephi / norm, norm)


class MUVFDMPrecoder(TransformerMixin, BaseEstimator):
    """Estimator wrapper around the cascade.

    ``fit`` takes an :class:`~muvfdm.channel.AggregateChannels` (the
    training-side channel knowledge); ``transform`` maps rows of SUE
    symbols ``u_s`` (length ``KN``) to SBS transmit vectors ``W u_s``.

    Parameters
    ----------
    outer : str
        Key of :data:`OUTER_PRECODERS`.
    noise_over_power : float
        RIBF regularization ``sigma2 / P_s``.
    """

    def __init__(self, outer="ribf", noise_over_power=1.0):
        self.outer = outer
        self.noise_over_power = noise_over_power

    def fit(self, X, y=None):
        if self.outer not in OUTER_PRECODERS:
            raise ValueError(f"unknown outer precoder {self.outer!r}")
        self.inner_ = build_inner_precoder(X.H_sm_blocks)
        self.H_bar_ = effective_channel_blocks(X.H_ss_blocks, self.inner_)
        phi = OUTER_PRECODERS[self.outer](self.H_bar_, self.noise_over_power)
        self.cascade_ = normalize_cascade(self.inner_, phi)
        self.phi_ = self.cascade_.phi
        self.W_ = self.cascade_.W
        self.norm_factor_ = self.cascade_.norm_factor
        self.n_features_in_ = self.W_.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "W_")
        U = np.atleast_2d(np.asarray(X, dtype=complex))
        if U.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} symbols per row, got {U.shape[1]}")
        return U @ self.W_.T
