"""Scenario description and its flat ``key = value`` file format.

Config files use one ``[scenario]`` section; lists are comma separated.
Example::

    [scenario]
    preset = paper-small
    beta = 3
    K = 6
    snr_grid = 0, 10, 20, 30
    schemes = ribf, separation
"""

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from ..exceptions import ConfigError
from ..precoder import LoadRate

__all__ = [
    "ScenarioConfig",
    "PRESETS",
    "SCHEMES",
    "CSIT_MODES",
    "preset",
    "load_config",
    "parse_config_text",
]

SCHEMES = ("dpc", "ribf", "mf", "separation")
CSIT_MODES = ("perfect", "imperfect", "both")
# schemes whose perfect-CSIT counterpart exists under imperfect CSIT
IMPERFECT_SCHEMES = ("ribf", "mf", "separation")
SUBCARRIER_SPACING = 15e3


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulated deployment and the operating points to sweep.

    ``bandwidth`` defaults to 15 kHz per subcarrier. ``beta_grid`` and
    ``k_grid`` optionally turn one config into a family of variants (see
    :meth:`variants`).
    """

    N: int = 32
    L: int = 8
    M: int = 4
    K: int = 3
    gamma_tx: int = 4
    gamma_rx: int = 1
    bandwidth: float = None
    sigma2: float = 1.0
    snr_grid: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    csit: str = "perfect"
    coherence_T: float = 1000.0
    tau_fractions: tuple = (0.05, 0.10, 0.15, 0.20, 0.25, 0.30)
    mbs_interference_on_sues: bool = False
    schemes: tuple = ("dpc", "ribf", "mf")
    trials: int = 200
    master_seed: int = 0
    dpc_streams: str = "usable"
    beta_grid: tuple = ()
    k_grid: tuple = ()
    resample_cap: int = 10

    def __post_init__(self):
        if self.bandwidth is None:
            object.__setattr__(self, "bandwidth", SUBCARRIER_SPACING * self.N)
        for name in ("snr_grid", "tau_fractions", "beta_grid"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        for name in ("schemes", "k_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        self.validate()

    def validate(self):
        for name in ("N", "L", "M", "K", "gamma_tx", "gamma_rx", "trials"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.N % self.M:
            raise ConfigError(f"M={self.M} must divide N={self.N}")
        if self.L >= self.N:
            raise ConfigError(f"L={self.L} must be smaller than N={self.N}")
        if self.gamma_rx != 1:
            raise ConfigError("only gamma_rx = 1 is supported")
        if not self.bandwidth > 0 or not self.sigma2 > 0:
            raise ConfigError("bandwidth and sigma2 must be positive")
        if self.csit not in CSIT_MODES:
            raise ConfigError(f"csit must be one of {CSIT_MODES}, got {self.csit!r}")
        unknown = set(self.schemes) - set(SCHEMES)
        if unknown or not self.schemes:
            raise ConfigError(f"unknown schemes {sorted(unknown)}; choose from {SCHEMES}")
        if len(set(self.schemes)) != len(self.schemes):
            raise ConfigError("duplicate schemes")
        if not self.snr_grid:
            raise ConfigError("empty snr_grid")
        if self.csit != "perfect":
            if not self.coherence_T > 0:
                raise ConfigError("coherence_T must be positive")
            if not self.tau_fractions or any(not 0 < f <= 1 for f in self.tau_fractions):
                raise ConfigError("tau_fractions must lie in (0, 1]")
        if self.dpc_streams not in ("usable", "transmit"):
            raise ConfigError("dpc_streams must be 'usable' or 'transmit'")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must fit in 64 bits")
        if self.resample_cap < 0:
            raise ConfigError("resample_cap must be >= 0")
        if "ribf" in self.schemes and not self.load_rate.ribf_feasible:
            raise ConfigError(
                f"RIBF needs gamma_tx*L >= N (beta >= 1), got beta={self.beta}")
        for b in self.beta_grid:
            self._gamma_for(b)
        for k in self.k_grid:
            if isinstance(k, bool) or not isinstance(k, int) or k < 1:
                raise ConfigError(f"k_grid entries must be positive integers, got {k!r}")

    @property
    def load_rate(self):
        return LoadRate(self.gamma_tx, self.L, self.N, self.gamma_rx)

    @property
    def beta(self):
        return self.load_rate.beta

    @property
    def n_chains(self):
        return self.K * self.gamma_tx

    def _gamma_for(self, beta):
        try:
            return LoadRate.from_beta(beta, self.L, self.N, self.gamma_rx).gamma_tx
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def with_beta(self, beta):
        return self.replace(gamma_tx=self._gamma_for(beta))

    def replace(self, **changes):
        try:
            return dataclasses.replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def variants(self):
        """Configs for every (beta, K) combination of the grids."""
        betas = self.beta_grid or (None,)
        ks = self.k_grid or (None,)
        out = []
        for b in betas:
            for k in ks:
                cfg = self.replace(beta_grid=(), k_grid=())
                if k is not None:
                    cfg = cfg.replace(K=k)
                if b is not None:
                    cfg = cfg.with_beta(b)
                out.append(cfg)
        return out

    def to_dict(self):
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    def config_hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


PRESETS = {
    "default": {},
    "paper-small": {"N": 64, "L": 16, "M": 4, "K": 3, "gamma_tx": 4},
    "paper-full": {"N": 128, "L": 32, "M": 4, "K": 3, "gamma_tx": 4},
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ScenarioConfig(**{**PRESETS[name], **overrides})


# -- file parsing ---------------------------------------------------------------

_FIELDS = {f.name: f for f in dataclasses.fields(ScenarioConfig)}
_INT = {"N", "L", "M", "K", "gamma_tx", "gamma_rx", "trials", "master_seed",
        "resample_cap"}
_FLOAT = {"bandwidth", "sigma2", "coherence_T"}
_FLOAT_LIST = {"snr_grid", "tau_fractions"}
_STR = {"csit", "dpc_streams"}
_ALIASES = {"seed": "master_seed", "outer": "schemes", "T": "coherence_T"}


def _parse_int(key, text):
    try:
        return int(text, 0)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _parse_float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _split(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _parse_value(key, text):
    if key in _INT:
        return _parse_int(key, text)
    if key in _FLOAT:
        return _parse_float(key, text)
    if key in _FLOAT_LIST:
        return tuple(_parse_float(key, t) for t in _split(text))
    if key == "schemes":
        return tuple(t.lower() for t in _split(text))
    if key == "beta_grid":
        return tuple(_parse_float(key, t) for t in _split(text))
    if key == "k_grid":
        return tuple(_parse_int(key, t) for t in _split(text))
    if key == "mbs_interference_on_sues":
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    if key in _STR:
        return text.strip().lower()
    raise ConfigError(f"unknown config key {key!r}")


def parse_config_text(text, base=None, source="<string>"):
    """Parse config text on top of ``base`` (a dict of field overrides)."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str  # keys are case sensitive (N vs n)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    extra = [s for s in parser.sections() if s != "scenario"]
    if extra:
        raise ConfigError(f"{source}: unknown sections {extra}")
    items = dict(parser.items("scenario")) if parser.has_section("scenario") else {}

    values = dict(base or {})
    preset_name = items.pop("preset", None)
    if preset_name is not None:
        if preset_name.strip() not in PRESETS:
            raise ConfigError(f"{source}: unknown preset {preset_name!r}")
        values.update(PRESETS[preset_name.strip()])
    beta = items.pop("beta", None)
    for raw_key, text in items.items():
        key = _ALIASES.get(raw_key, raw_key)
        if key not in _FIELDS:
            raise ConfigError(f"{source}: unknown config key {raw_key!r}")
        values[key] = _parse_value(key, text)
    try:
        if beta is not None:
            N = values.get("N", _FIELDS["N"].default)
            L = values.get("L", _FIELDS["L"].default)
            values["gamma_tx"] = LoadRate.from_beta(Fraction(beta.strip()), L, N).gamma_tx
        cfg = ScenarioConfig(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path, base=None):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_config_text(text, base=base, source=str(path))
