"""SINR and sum-rate evaluation for both tiers.

Units: rates in bit/s, powers per transmitted symbol, ``sigma2`` per
receive dimension. One OFDM block of ``N+L`` symbols carries ``N``
subcarrier symbols per receiver, hence the ``B/(N+L)`` pre-factor.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_matrix, check_positive, check_positive_int
from .exceptions import SingularSystemError
from .matrix_core import regularized_inverse, subcarrier_masks, subcarrier_owner

__all__ = [
    "PowerProfile",
    "TrainingBudget",
    "RatePair",
    "SignalPathReport",
    "dpc_sum_rate",
    "dpc_sum_rate_from_eigs",
    "sinr_from_gains",
    "sue_sinr_perfect",
    "ribf_sum_rate",
    "mue_sinr_imperfect",
    "mue_interference_free_sinr",
    "sue_effective_sinr",
    "sum_rates_imperfect",
    "separation_bandwidths",
    "complete_separation_rates",
    "signal_path_check",
]


@dataclass(frozen=True)
class PowerProfile:
    """Per-symbol powers of both tiers; the SBSs split the MBS budget."""

    P_m: float
    K: int
    sigma2: float = 1.0

    def __post_init__(self):
        check_positive(self.P_m, "P_m", strict=False)
        check_positive_int(self.K, "K")
        check_positive(self.sigma2, "sigma2")

    @classmethod
    def from_snr_db(cls, snr_db, K, sigma2=1.0):
        return cls(sigma2 * 10.0 ** (snr_db / 10.0), K, sigma2)

    @property
    def P_s(self):
        return self.P_m / self.K

    @property
    def snr_db(self):
        return 10.0 * math.log10(self.P_m / self.sigma2) if self.P_m > 0 else -math.inf

    def block_energy(self, N, L):
        """Energy of one SBS-tier block, ``P_s K (N+L)``."""
        return self.P_s * self.K * (N + L)


@dataclass(frozen=True)
class TrainingBudget:
    T: float
    tau: float

    def __post_init__(self):
        check_positive(self.T, "T")
        check_positive(self.tau, "tau")
        if self.tau > self.T:
            raise ValueError(f"training length tau={self.tau} exceeds T={self.T}")

    @classmethod
    def from_fraction(cls, T, fraction):
        return cls(T, fraction * T)

    @property
    def tau_fraction(self):
        return self.tau / self.T

    @property
    def prelog(self):
        return (self.T - self.tau) / self.T


@dataclass(frozen=True)
class RatePair:
    macro_rate: float
    small_rate: float

    def __post_init__(self):
        if self.macro_rate < 0 or self.small_rate < 0:
            raise ValueError("rates must be non-negative")

    @property
    def total(self):
        return self.macro_rate + self.small_rate


def _per_symbol(bandwidth, N, L):
    return check_positive(bandwidth, "bandwidth", strict=False) / (N + L)


# -- perfect CSIT ---------------------------------------------------------------

def dpc_sum_rate_from_eigs(eigs, profile, bandwidth, N, L, gamma_tx, streams="usable"):
    """DPC bound from the eigenvalues of ``H_bar H_bar^H``.

    ``streams="usable"`` spreads the block energy over
    ``min(gamma_tx K L, K N)`` streams (the rank of the effective channel);
    ``streams="transmit"`` spreads it over all ``gamma_tx K L`` transmit
    dimensions. Both agree when ``gamma_tx L <= N``.
    """
    K = profile.K
    n_tx = gamma_tx * K * L
    if streams == "usable":
        n = min(n_tx, K * N)
    elif streams == "transmit":
        n = n_tx
    else:
        raise ValueError(f"unknown stream convention {streams!r}")
    scale = profile.block_energy(N, L) / (profile.sigma2 * n)
    eigs = np.clip(np.asarray(eigs, dtype=float), 0.0, None)
    return _per_symbol(bandwidth, N, L) * float(np.sum(np.log2(1.0 + scale * eigs)))


def dpc_sum_rate(H_bar, profile, bandwidth, N, L, gamma_tx, streams="usable"):
    """Uniform-power dirty-paper sum rate of one effective-channel draw."""
    H_bar = check_matrix(H_bar, "H_bar")
    if H_bar.shape[0] != profile.K * N:
        raise ValueError(f"H_bar has {H_bar.shape[0]} rows, expected K*N={profile.K * N}")
    if H_bar.shape[1] != gamma_tx * profile.K * L:
        raise ValueError(
            f"H_bar has {H_bar.shape[1]} columns, expected {gamma_tx * profile.K * L}")
    gram = H_bar @ H_bar.conj().T
    return dpc_sum_rate_from_eigs(np.linalg.eigvalsh(gram), profile, bandwidth,
                                  N, L, gamma_tx, streams)


def sinr_from_gains(G, noise):
    """Per-row SINR of a gain matrix: diagonal over off-diagonal plus noise.

    ``noise`` is a scalar or one value per row, in the units of ``|G|^2``.
    """
    G = np.asarray(G)
    power = np.abs(G) ** 2
    signal = np.diagonal(power).copy()
    interference = power.sum(axis=1) - signal
    interference = np.clip(interference, 0.0, None)
    denom = interference + noise
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(signal > 0, signal / denom, 0.0)
    return out


def sue_sinr_perfect(H_bar, phi, W, profile, N, L, K, external=None):
    """SINR of each of the ``KN`` SUE symbols.

    ``phi`` must be the outer stage of ``W`` (``W = E phi``). ``external``
    optionally adds per-symbol interference power received from outside
    the SBS tier (e.g. the MBS), in the same units as ``sigma2``.
    """
    H_bar = check_matrix(H_bar, "H_bar")
    phi = check_matrix(phi, "phi")
    if H_bar.shape != (K * N, phi.shape[0]) or phi.shape[1] != K * N:
        raise ValueError(f"H_bar {H_bar.shape} and phi {phi.shape} not conformable")
    trace = np.vdot(W, W).real
    ext = 0.0 if external is None else np.asarray(external, dtype=float)
    noise = trace * (profile.sigma2 + ext) / (profile.P_s * K * (N + L))
    return sinr_from_gains(H_bar @ phi, noise)


def ribf_sum_rate(sinrs, bandwidth, N, L):
    sinrs = np.asarray(sinrs, dtype=float)
    if np.any(sinrs < 0):
        raise ValueError("negative SINR")
    return _per_symbol(bandwidth, N, L) * float(np.sum(np.log2(1.0 + sinrs)))


# -- imperfect CSIT ---------------------------------------------------------------

def mue_interference_free_sinr(H_mm, profile):
    """``P_m K |h_mm^(j)|^2 / sigma2`` per subcarrier."""
    H_mm = check_matrix(H_mm, "H_mm")
    gains = np.sum(np.abs(H_mm) ** 2, axis=1)
    return profile.P_m * profile.K * gains / profile.sigma2


def mue_sinr_imperfect(H_mm, H_sm, phi, profile, tx_energy=1.0):
    """MUE SINR with residual SBS leakage.

    ``H_sm @ phi`` maps SUE symbols to MUE receive samples; pass the true
    cross channel with the deployed (estimated) precoder. ``tx_energy``
    scales the leakage power, e.g. the SBS block energy when ``phi`` is
    the unit-trace cascade.
    """
    H_mm = check_matrix(H_mm, "H_mm")
    H_sm = check_matrix(H_sm, "H_sm")
    phi = check_matrix(phi, "phi")
    leak = tx_energy * np.sum(np.abs(H_sm @ phi) ** 2, axis=1)
    signal = profile.P_m * profile.K * np.sum(np.abs(H_mm) ** 2, axis=1)
    return signal / (leak + profile.sigma2)


def sue_effective_sinr(inner_sinr, tau):
    """Training-penalized SINR ``X^2 tau / (1 + (1 + tau) X)``."""
    X = np.asarray(inner_sinr, dtype=float)
    tau = check_positive(tau, "tau")
    if np.any(X < 0):
        raise ValueError("negative SINR")
    return X * X * tau / (1.0 + (1.0 + tau) * X)


def sum_rates_imperfect(mue_sinrs, sue_eff_sinrs, budget, N, L, K, bandwidth):
    mue = np.asarray(mue_sinrs, dtype=float)
    sue = np.asarray(sue_eff_sinrs, dtype=float)
    if mue.size != N or sue.size != K * N:
        raise ValueError(f"expected {N} MUE and {K * N} SUE SINRs")
    factor = budget.prelog * _per_symbol(bandwidth, N, L)
    return RatePair(factor * float(np.sum(np.log2(1.0 + mue))),
                    factor * float(np.sum(np.log2(1.0 + sue))))


# -- complete separation ------------------------------------------------------

def separation_bandwidths(bandwidth, N, L):
    """``(B_m, B_s)`` with ``B_s = B L / N``."""
    B_s = bandwidth * L / N
    return bandwidth - B_s, B_s


def complete_separation_rates(taps, profile, N, L, bandwidth, masks=None,
                              estimated_ss=None, budget=None):
    """Disjoint-band baseline.

    The MBS keeps the first ``N - L`` subcarriers (interference-free
    OFDMA); the SBSs share the last ``L`` and run per-subcarrier
    zero-forcing over all ``K * gamma_tx`` chains to the ``K`` SUEs, with
    the small-tier block energy scaled by ``L/N`` (same power density as
    full-band sharing) and one joint trace normalization across
    subcarriers.

    ``taps`` is a :class:`~muvfdm.channel.TrialTaps`. With
    ``estimated_ss`` (tap estimates shaped like ``taps.ss``) and a
    ``budget``, ZF is designed and scored on the estimates, the SINRs go
    through the training penalty of :func:`sue_effective_sinr` and the
    training pre-log is applied to the small tier.

    Raises
    ------
    SingularSystemError
        If a subcarrier's ZF system is singular.
    """
    K = profile.K
    M = taps.mm.shape[0]
    if masks is None:
        masks = subcarrier_masks(N, M)
    owner = subcarrier_owner(masks)
    per_symbol = _per_symbol(bandwidth, N, L)

    resp_mm = np.fft.fft(taps.mm, N, axis=-1)  # (M, N)
    g_mm = resp_mm[owner, np.arange(N)]
    macro_band = np.arange(N - L)
    mue_snr = profile.P_m * K * np.abs(g_mm[macro_band]) ** 2 / profile.sigma2
    macro = per_symbol * float(np.sum(np.log2(1.0 + mue_snr)))

    small_band = np.arange(N - L, N)
    ss = taps.ss if estimated_ss is None else estimated_ss
    G = _subcarrier_channels(ss, N, small_band)  # (L, K, C)
    zf = np.stack([regularized_inverse(g, 0.0) for g in G])  # (L, C, K)
    trace = float(np.sum(np.abs(zf) ** 2))
    if not trace > 0:
        raise SingularSystemError("singular system: zero ZF precoder")
    energy = profile.block_energy(N, L) * L / N
    if energy > 0:
        sinr = np.concatenate([sinr_from_gains(g, trace * profile.sigma2 / energy)
                               for g in np.matmul(G, zf)])
    else:
        sinr = np.zeros(L * K)
    if estimated_ss is None:
        small = per_symbol * float(np.sum(np.log2(1.0 + sinr)))
    else:
        if budget is None:
            raise ValueError("estimated channels need a training budget")
        eff = sue_effective_sinr(sinr, budget.tau)
        small = budget.prelog * per_symbol * float(np.sum(np.log2(1.0 + eff)))
    return RatePair(macro, small)


def _subcarrier_channels(ss, N, band):
    """``(len(band), K, C)`` frequency responses of the chain->SUE grid."""
    resp = np.fft.fft(np.asarray(ss), N, axis=-1)  # (C, K, N)
    return np.transpose(resp[:, :, band], (2, 1, 0))


# -- signal path ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SignalPathReport:
    """Noise-free received signals of one block and the MUE residual.

    ``residual`` is ``||y_m - H_mm s_m|| / ||H_mm s_m||``: the share of
    the MUE observation that is SBS interference.
    """

    residual: float
    s_m: np.ndarray
    u_s: np.ndarray
    x_s: np.ndarray
    y_m: np.ndarray
    y_s: np.ndarray
    extra: dict = field(default_factory=dict)

    def passed(self, tol=1e-9):
        return self.residual <= tol


def _unit_symbols(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


def signal_path_check(channels, W, rng, s_m=None, u_s=None):
    """Push random unit-norm symbols through both tiers with noise off.

    The SBS transmit vector ``W u_s`` is rescaled to the norm of ``s_m``
    so both tiers radiate comparable energy and the residual is
    meaningful for an arbitrary ``W``.
    """
    N = channels.N
    KN = channels.K * N
    W = np.asarray(W, dtype=complex)
    if W.shape != (channels.H_sm.shape[1], KN):
        raise ValueError(f"W has shape {W.shape}, expected {(channels.H_sm.shape[1], KN)}")
    s_m = _unit_symbols(rng, N) if s_m is None else np.asarray(s_m, dtype=complex)
    u_s = _unit_symbols(rng, KN) if u_s is None else np.asarray(u_s, dtype=complex)
    x_s = W @ u_s
    nx = np.linalg.norm(x_s)
    if nx > 0:
        x_s = x_s * (np.linalg.norm(s_m) / nx)
    wanted = channels.H_mm @ s_m
    y_m = wanted + channels.H_sm @ x_s
    y_s = channels.H_ss @ x_s + channels.H_ms @ s_m
    num = np.linalg.norm(y_m - wanted)
    den = np.linalg.norm(wanted)
    residual = 0.0 if num == 0 else float(num / den) if den > 0 else math.inf
    return SignalPathReport(residual, s_m, u_s, x_s, y_m, y_s)
