"""Deterministic Monte Carlo trials and sweeps.

Trial ``t`` draws everything from ``SeedSequence(master_seed,
spawn_key=(t, attempt, purpose, ...))``, so any trial can be replayed in
isolation and results do not depend on execution order or thread count.
BLAS is pinned to one thread while trials run so floating-point
reductions are identical however the trials are scheduled.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.linalg import blas
from threadpoolctl import threadpool_limits

from ..channel import (
    build_aggregate_channels,
    build_cross_channel_blocks,
    draw_trial_taps,
    mmse_coefficients,
    unit_cn,
)
from ..exceptions import DegenerateChannelError, NumericalHardError, SingularSystemError
from ..matrix_core import subcarrier_masks
from ..metrics import (
    PowerProfile,
    TrainingBudget,
    complete_separation_rates,
    dpc_sum_rate_from_eigs,
    sinr_from_gains,
    sue_effective_sinr,
)
from ..precoder import build_inner_precoder, effective_channel_taps

__all__ = ["TrialResult", "SweepPoint", "SweepResult", "run_trial", "run_sweep",
           "trial_rng"]

TIERS = ("macro", "small", "total")
_TAPS, _TRAINING, _PROBE = 0, 1, 2


def trial_rng(master_seed, trial_index, attempt=0, purpose=_TAPS, *extra):
    ss = np.random.SeedSequence(master_seed,
                                spawn_key=(trial_index, attempt, purpose) + tuple(extra))
    return np.random.default_rng(ss)


@dataclass
class TrialResult:
    """Rates of one trial keyed by ``(snr_db, scheme, tier, tau_fraction)``.

    ``tau_fraction`` is ``None`` for perfect-CSIT entries.
    """

    trial_index: int
    rates: dict
    resamples: int = 0


# -- per-trial computations ---------------------------------------------------

def _log2_sum(sinr):
    return float(np.sum(np.log2(1.0 + sinr)))


class _SpectralRibf:
    """Outer stage on the eigenbasis of ``H H^H`` so a whole SNR grid
    costs one eigendecomposition:
    ``A Phi(a) = (A H^H U) diag(1 / (lam + a)) U^H``."""

    def __init__(self, H_bar):
        lam, U = np.linalg.eigh(H_bar @ H_bar.conj().T)
        self.lam = np.clip(lam, 0.0, None)
        self.U = U
        self.UH = U.conj().T

    def gains(self, alpha):
        """``H_bar Phi(alpha)`` and ``||Phi(alpha)||_F^2``."""
        d = self.lam / (self.lam + alpha)
        return (self.U * d) @ self.UH, float(np.sum(self.lam / (self.lam + alpha) ** 2))

    def mf_gains(self):
        return (self.U * self.lam) @ self.UH, float(np.sum(self.lam))

    def project(self, A_HH):
        """Precompute ``A H^H U`` for a left factor given as ``A H^H``."""
        return A_HH @ self.U

    def apply(self, AU, alpha):
        return (AU / (self.lam + alpha)) @ self.UH


def _perfect_rates(cfg, ch, taps, masks, profiles, ext_unit, mue_gain):
    """Perfect-CSIT rates for every SNR and scheme."""
    N, L, K = cfg.N, cfg.L, cfg.K
    per_symbol = cfg.bandwidth / (N + L)
    inner = build_inner_precoder(ch.H_sm_blocks)
    H_bar = effective_channel_taps(taps.ss, inner, N)
    spec = _SpectralRibf(H_bar)
    # cross channel seen through the inner stage, numerically ~0
    cross = np.matmul(ch.H_sm_blocks, inner.blocks).transpose(1, 0, 2).reshape(N, -1)
    cross_U = spec.project(cross @ H_bar.conj().T)

    out = {}
    for snr, prof in zip(cfg.snr_grid, profiles):
        energy = prof.block_energy(N, L)
        ext = prof.P_m * ext_unit
        for scheme in cfg.schemes:
            if scheme == "dpc":
                rate = dpc_sum_rate_from_eigs(spec.lam, prof, cfg.bandwidth, N, L,
                                              cfg.gamma_tx, cfg.dpc_streams)
                out[(snr, "dpc", "small", None)] = rate
            elif scheme in ("ribf", "mf"):
                alpha = prof.sigma2 / prof.P_s
                if scheme == "ribf":
                    G, phi_pow = spec.gains(alpha)
                    leak_G = spec.apply(cross_U, alpha)
                else:
                    G, phi_pow = spec.mf_gains()
                    leak_G = cross @ H_bar.conj().T
                noise = phi_pow * (prof.sigma2 + ext) / energy
                small = per_symbol * _log2_sum(sinr_from_gains(G, noise))
                leak = energy * np.sum(np.abs(leak_G) ** 2, axis=1) / phi_pow
                mue = prof.P_m * K * mue_gain / (leak + prof.sigma2)
                macro = per_symbol * _log2_sum(mue)
                _put(out, snr, scheme, None, macro, small)
            elif scheme == "separation":
                pair = complete_separation_rates(taps, prof, N, L, cfg.bandwidth, masks)
                _put(out, snr, scheme, None, pair.macro_rate, pair.small_rate)
    return out


def _put(out, snr, scheme, tau, macro, small):
    out[(snr, scheme, "macro", tau)] = macro
    out[(snr, scheme, "small", tau)] = small
    out[(snr, scheme, "total", tau)] = macro + small


def _ribf_gains(H_est, cross, alpha):
    """Gains of ``Phi = H_est^H S^-1``, ``S = alpha I + H_est H_est^H``.

    Returns ``H_est Phi = Gram S^-1``, ``cross Phi`` and
    ``||Phi||_F^2 = tr(S^-1 Gram S^-1)``. The forms ``I - alpha S^-1``
    and ``tr(S^-1) - alpha ||S^-1||^2`` are cheaper but cancel
    catastrophically at low SNR.
    """
    # zherk fills the upper triangle of H H^H; cho_factor reads only that
    upper = blas.zherk(1.0, H_est)
    S = upper.copy()
    S[np.diag_indices_from(S)] += alpha
    try:
        cf = scipy.linalg.cho_factor(S, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularSystemError("singular system in RIBF") from None
    S_inv = scipy.linalg.cho_solve(cf, np.eye(S.shape[0]), check_finite=False)
    gram = np.triu(upper) + np.triu(upper, 1).conj().T
    G = gram @ S_inv
    phi_pow = float(np.vdot(S_inv, G).real)
    return G, (cross @ H_est.conj().T) @ S_inv, phi_pow


def _imperfect_rates(cfg, ch, taps, masks, profiles, ext_unit, mue_gain, rng_for_tau):
    """Rates with precoders designed on MMSE estimates of the SBS links.

    MUEs see the true cross channel through the estimated kernel basis.
    SUE symbols are scored with the SINR of the estimated cascade and the
    training penalty of :func:`sue_effective_sinr`, which prices the
    estimation error. Estimates are linear in the taps,
    ``h_hat = a h + b n``, so the pilot-noise cross blocks are built once
    per training length.
    """
    N, L, K = cfg.N, cfg.L, cfg.K
    per_symbol = cfg.bandwidth / (N + L)
    schemes = [s for s in cfg.schemes if s != "dpc"]
    vfdm = any(s in ("ribf", "mf") for s in schemes)
    out = {}
    for t_idx, frac in enumerate(cfg.tau_fractions):
        budget = TrainingBudget.from_fraction(cfg.coherence_T, frac)
        rng = rng_for_tau(t_idx)
        # one pilot-noise draw per link, reused across operating points
        noise_sm = unit_cn(rng, taps.sm.shape)
        noise_ss = unit_cn(rng, taps.ss.shape)
        if vfdm:
            noise_sm_blocks = build_cross_channel_blocks(noise_sm, masks, N, L)
        for snr, prof in zip(cfg.snr_grid, profiles):
            rho = prof.P_s  # training symbols use the data power
            a, b = mmse_coefficients(rho, budget.tau, prof.sigma2, L)
            ss_hat = a * taps.ss + b * noise_ss
            energy = prof.block_energy(N, L)
            ext = prof.P_m * ext_unit
            if vfdm:
                inner = build_inner_precoder(a * ch.H_sm_blocks + b * noise_sm_blocks)
                H_est = effective_channel_taps(ss_hat, inner, N)
                cross = np.matmul(ch.H_sm_blocks, inner.blocks) \
                    .transpose(1, 0, 2).reshape(N, -1)
            for scheme in schemes:
                if scheme == "separation":
                    pair = complete_separation_rates(taps, prof, N, L, cfg.bandwidth,
                                                     masks, estimated_ss=ss_hat,
                                                     budget=budget)
                    _put(out, snr, scheme, frac, pair.macro_rate, pair.small_rate)
                    continue
                if scheme == "ribf":
                    G, leak_G, phi_pow = _ribf_gains(H_est, cross,
                                                     prof.sigma2 / prof.P_s)
                else:
                    G = H_est @ H_est.conj().T
                    leak_G = cross @ H_est.conj().T
                    phi_pow = float(np.vdot(H_est, H_est).real)
                X = sinr_from_gains(G, phi_pow * (prof.sigma2 + ext) / energy)
                eff = sue_effective_sinr(X, budget.tau)
                leak = energy * np.sum(np.abs(leak_G) ** 2, axis=1) / phi_pow
                mue = prof.P_m * K * mue_gain / (leak + prof.sigma2)
                _put(out, snr, scheme, frac,
                     budget.prelog * per_symbol * _log2_sum(mue),
                     budget.prelog * per_symbol * _log2_sum(eff))
    return out


def _simulate(cfg, trial_index, attempt, masks):
    rng = trial_rng(cfg.master_seed, trial_index, attempt, _TAPS)
    taps = draw_trial_taps(rng, cfg.M, cfg.K, cfg.gamma_tx, cfg.L)
    ch = build_aggregate_channels(taps, masks, cfg.N, cfg.L, cfg.K, cfg.gamma_tx)
    profiles = [PowerProfile.from_snr_db(s, cfg.K, cfg.sigma2) for s in cfg.snr_grid]
    mue_gain = np.sum(np.abs(ch.H_mm) ** 2, axis=1)
    if cfg.mbs_interference_on_sues:
        ext_unit = np.sum(np.abs(ch.H_ms) ** 2, axis=1)
    else:
        ext_unit = np.zeros(cfg.K * cfg.N)

    rates = _perfect_rates(cfg, ch, taps, masks, profiles, ext_unit, mue_gain)
    if cfg.csit != "perfect":
        def rng_for_tau(t_idx):
            return trial_rng(cfg.master_seed, trial_index, attempt, _TRAINING, t_idx)
        rates.update(_imperfect_rates(cfg, ch, taps, masks, profiles, ext_unit,
                                      mue_gain, rng_for_tau))
    return rates


_masks_cache = {}


def _masks(cfg):
    key = (cfg.N, cfg.M)
    if key not in _masks_cache:
        _masks_cache[key] = subcarrier_masks(cfg.N, cfg.M)
    return _masks_cache[key]


def run_trial(config, trial_index):
    """All rates of one trial, resampling degenerate draws.

    Raises
    ------
    NumericalHardError
        After ``config.resample_cap`` consecutive degenerate draws.
    """
    masks = _masks(config)
    for attempt in range(config.resample_cap + 1):
        try:
            rates = _simulate(config, trial_index, attempt, masks)
        except (DegenerateChannelError, SingularSystemError):
            continue
        return TrialResult(trial_index, rates, attempt)
    raise NumericalHardError(
        f"trial {trial_index}: {config.resample_cap + 1} degenerate draws in a row")


# -- sweeps ---------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    snr_db: float
    scheme: str
    tier: str
    tau_fraction: float
    beta: float
    K: int
    mean_rate_bps: float
    stderr_bps: float
    trials: int
    resamples: int
    seed: int


@dataclass
class SweepResult:
    points: list
    provenance: dict
    config: dict = None
    trial_records: list = field(default=None, repr=False)

    def select(self, **where):
        """Points whose attributes equal every keyword given."""
        return [p for p in self.points
                if all(getattr(p, k) == v for k, v in where.items())]

    def value(self, **where):
        hits = self.select(**where)
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} points match {where}")
        return hits[0].mean_rate_bps


def _mean_stderr(x):
    x = np.asarray(x, dtype=float)
    n = x.size
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def _ratio_stderr(num, den):
    # delta method on paired samples
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    mn, md = num.mean(), den.mean()
    if md == 0:
        return math.nan, math.nan
    r = mn / md
    if n < 2:
        return float(r), 0.0
    cov = np.cov(num, den, ddof=1)
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (md * md * n)
    return float(r), float(math.sqrt(max(var, 0.0)))


def _sort_key(key):
    snr, scheme, tier, tau = key
    return (snr, scheme, -1.0 if tau is None else tau, TIERS.index(tier))


def _aggregate(cfg, results):
    n = len(results)
    resamples = sum(r.resamples for r in results)
    keys = sorted(results[0].rates, key=_sort_key) if results else []
    beta = float(cfg.beta)
    emit_perfect = cfg.csit in ("perfect", "both")
    points = []
    for key in keys:
        snr, scheme, tier, tau = key
        if tau is None and not emit_perfect:
            continue
        samples = [r.rates[key] for r in results]
        mean, se = _mean_stderr(samples)
        points.append(SweepPoint(snr, scheme, tier, tau, beta, cfg.K, mean, se,
                                 n, resamples, cfg.master_seed))
    if cfg.csit != "perfect":
        for key in keys:
            snr, scheme, tier, tau = key
            if tau is None:
                continue
            num = [r.rates[key] for r in results]
            den = [r.rates[(snr, scheme, tier, None)] for r in results]
            ratio, se = _ratio_stderr(num, den)
            points.append(SweepPoint(snr, f"{scheme}_ratio", tier, tau, beta, cfg.K,
                                     ratio, se, n, resamples, cfg.master_seed))
    return points


def run_trials(config, threads=1):
    indices = range(config.trials)
    with threadpool_limits(limits=1):
        if threads <= 1:
            return [run_trial(config, t) for t in indices]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda t: run_trial(config, t), indices))


def run_sweep(config, threads=1, keep_trials=False):
    """Ergodic means and standard errors over ``config.trials`` trials.

    With ``beta_grid``/``k_grid`` set, every variant is swept and the
    points are concatenated (told apart by the ``beta`` and ``K`` fields).
    """
    points, records = [], []
    for cfg in config.variants():
        results = run_trials(cfg, threads)
        points.extend(_aggregate(cfg, results))
        if keep_trials:
            records.append({"beta": float(cfg.beta), "K": cfg.K, "trials": results})
    provenance = {"config_hash": config.config_hash(), "seed": config.master_seed}
    return SweepResult(points, provenance, config.to_dict(),
                       records if keep_trials else None)
