"""Experiment configuration: flat ``key = value`` files with ``#`` comments."""

from dataclasses import dataclass, fields, replace
import math

from .dynamics import ModelParams
from .errors import ConfigError
from .records import TimeGrid

DEFAULT_SEED = 1
QUICK_SIZES = (2000, 3000)

_INT_KEYS = ("m_smooth", "n_eval", "seed")


@dataclass(frozen=True)
class ExperimentConfig:
    omega: float = 3.0
    gamma: float = 1.0
    eta: float = 0.5
    dt: float = 1e-3
    t_final: float = 6.0
    m_smooth: int = 20000
    n_eval: int = 30000
    mu_ost: float = None
    seed: int = DEFAULT_SEED
    output_dir: str = "qsmooth-out"

    def __post_init__(self):
        if self.m_smooth < 1 or self.n_eval < 1:
            raise ConfigError("m_smooth and n_eval must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        # model and grid invariants
        self.params
        self.grid

    @property
    def params(self):
        return ModelParams(gamma=self.gamma, omega=self.omega, eta=self.eta,
                           dt=self.dt, mu_ost=self.mu_ost)

    @property
    def grid(self):
        return TimeGrid(self.t_final, self.dt)

    def resolved(self):
        """Copy with every derived default filled in."""
        return replace(self, mu_ost=self.params.mu_ost)

    def quick(self):
        return replace(self, m_smooth=QUICK_SIZES[0], n_eval=QUICK_SIZES[1])

    def to_text(self):
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


def _parse_value(key, raw):
    if key == "output_dir":
        return raw
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{key}: not a number: {raw!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite, got {raw!r}")
    if key in _INT_KEYS:
        # integers may be written as 2e4; parse exactly when possible
        try:
            ivalue = int(raw)
        except ValueError:
            if value != int(value):
                raise ConfigError(f"{key}: must be an integer, got {raw!r}") from None
            ivalue = int(value)
        return ivalue
    return value


def parse_config(text, source="<config>"):
    """Parse ``key = value`` lines into a dict of typed values."""
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        if not raw:
            raise ConfigError(f"{source}:{lineno}: missing value for {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def load_config(path=None, **overrides):
    """Config from an optional file, then non-None keyword overrides."""
    values = {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values = parse_config(text, str(path))
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
