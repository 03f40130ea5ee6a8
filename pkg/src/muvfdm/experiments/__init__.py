"""Scenario configs, the Monte Carlo engine, result files and the CLI."""

from .config import PRESETS, ScenarioConfig, load_config, parse_config_text, preset
from .engine import SweepPoint, SweepResult, TrialResult, run_sweep, run_trial
from .results import CSV_COLUMNS, emit_results, load_results

__all__ = [
    "PRESETS",
    "ScenarioConfig",
    "load_config",
    "parse_config_text",
    "preset",
    "SweepPoint",
    "SweepResult",
    "TrialResult",
    "run_sweep",
    "run_trial",
    "CSV_COLUMNS",
    "emit_results",
    "load_results",
]
