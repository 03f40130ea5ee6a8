"""Structural self-test run by ``muvfdm check``.

Draws seeded channels, builds the perfect-CSIT cascade and records the
worst residual of every exactness property.
"""

from dataclasses import dataclass, field

import numpy as np

from ..channel import build_aggregate_channels, draw_trial_taps
from ..exceptions import DegenerateChannelError
from ..metrics import PowerProfile, signal_path_check
from ..precoder import (
    build_inner_precoder,
    effective_channel_blocks,
    normalize_cascade,
    ribf_outer,
)
from .engine import _PROBE, _TAPS, _masks, trial_rng

__all__ = ["CheckReport", "TOLERANCES", "run_checks"]

TOLERANCES = {
    "null_residual": 1e-10,      # ||H_sm W|| / ||H_sm||
    "inner_gram": 1e-12,         # max_i ||E_i^H E_i - I||
    "trace": 1e-10,              # |tr(W^H W) - 1|
    "signal_path": 1e-9,         # MUE residual
    "macro_offdiag": 1e-10,      # off-diagonal mass of H_mm, relative
}
NEGATIVE_CONTROL_MIN = 0.1


@dataclass
class CheckReport:
    trials: int
    worst: dict = field(default_factory=dict)
    negative_control: float = np.inf
    resamples: int = 0

    @property
    def failures(self):
        bad = [k for k, v in self.worst.items() if not v <= TOLERANCES[k]]
        if not self.negative_control > NEGATIVE_CONTROL_MIN:
            bad.append("negative_control")
        return bad

    @property
    def ok(self):
        return not self.failures

    def lines(self):
        out = [f"{k:<16} max={v:.3e}  tol={TOLERANCES[k]:.0e}  "
               f"{'ok' if v <= TOLERANCES[k] else 'FAIL'}"
               for k, v in self.worst.items()]
        nc = self.negative_control
        out.append(f"{'negative_control':<16} min={nc:.3e}  need>{NEGATIVE_CONTROL_MIN:g}  "
                   f"{'ok' if nc > NEGATIVE_CONTROL_MIN else 'FAIL'}")
        out.append(f"trials={self.trials} resamples={self.resamples}")
        return out


def check_trial(cfg, trial_index, attempt=0):
    """Residuals of one draw; raises on degenerate channels."""
    masks = _masks(cfg)
    rng = trial_rng(cfg.master_seed, trial_index, attempt, _TAPS)
    taps = draw_trial_taps(rng, cfg.M, cfg.K, cfg.gamma_tx, cfg.L)
    ch = build_aggregate_channels(taps, masks, cfg.N, cfg.L, cfg.K, cfg.gamma_tx)
    inner = build_inner_precoder(ch.H_sm_blocks)
    H_bar = effective_channel_blocks(ch.H_ss_blocks, inner)
    snr = max(cfg.snr_grid)
    prof = PowerProfile.from_snr_db(snr, cfg.K, cfg.sigma2)
    phi = ribf_outer(H_bar, prof.sigma2 / prof.P_s)
    casc = normalize_cascade(inner, phi)

    L = cfg.L
    gram = np.matmul(np.swapaxes(inner.blocks, -1, -2).conj(), inner.blocks) - np.eye(L)
    H_mm = ch.H_mm
    off = H_mm - np.diag(np.diag(H_mm))
    probe = trial_rng(cfg.master_seed, trial_index, attempt, _PROBE)
    sp = signal_path_check(ch, casc.W, probe)
    W_rand = probe.standard_normal(casc.W.shape) + 1j * probe.standard_normal(casc.W.shape)
    neg = signal_path_check(ch, W_rand, probe)
    res = {
        "null_residual": np.linalg.norm(ch.H_sm @ casc.W) / np.linalg.norm(ch.H_sm),
        "inner_gram": float(np.max(np.linalg.norm(gram, axis=(-2, -1)))),
        "trace": abs(np.vdot(casc.W, casc.W).real - 1.0),
        "signal_path": sp.residual,
        "macro_offdiag": np.linalg.norm(off) / np.linalg.norm(H_mm),
    }
    return {k: float(v) for k, v in res.items()}, float(neg.residual)


def run_checks(cfg, trials=None):
    trials = cfg.trials if trials is None else trials
    report = CheckReport(trials)
    for t in range(trials):
        for attempt in range(cfg.resample_cap + 1):
            try:
                res, neg = check_trial(cfg, t, attempt)
                break
            except DegenerateChannelError:
                report.resamples += 1
        else:
            raise DegenerateChannelError(f"trial {t}: repeated degenerate draws")
        for k, v in res.items():
            report.worst[k] = max(report.worst.get(k, 0.0), v)
        report.negative_control = min(report.negative_control, neg)
    return report
