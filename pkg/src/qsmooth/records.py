"""Time grid, measurement records and their CSV serialisation."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ConfigError

CSV_FLOAT = "%.17g"


@dataclass(frozen=True)
class TimeGrid:
    t_final: float
    dt: float

    def __post_init__(self):
        if not (self.dt > 0 and self.t_final > 0):
            raise ConfigError("t_final and dt must be positive")
        n = round(self.t_final / self.dt)
        if n < 1 or abs(n * self.dt - self.t_final) > 1e-9:
            raise ConfigError(f"t_final={self.t_final} is not an integer multiple of dt={self.dt}")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    @property
    def times(self):
        """Grid points t_k = k dt, k = 0..n_steps (inclusive)."""
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class ObservedRecord:
    """Homodyne increments dJ[k] driving the step k -> k+1."""

    dJ: np.ndarray
    dt: float

    def __post_init__(self):
        dJ = np.array(self.dJ, dtype=float)
        if dJ.ndim != 1 or dJ.size < 1:
            raise ConfigError("observed record must be a non-empty 1-D array")
        if not np.all(np.isfinite(dJ)):
            raise ConfigError("observed record has non-finite increments")
        dJ.setflags(write=False)
        object.__setattr__(self, "dJ", dJ)

    @property
    def n_steps(self):
        return self.dJ.size

    def check_grid(self, grid):
        if grid.n_steps != self.n_steps or not math.isclose(grid.dt, self.dt, rel_tol=1e-12):
            raise ConfigError(
                f"record ({self.n_steps} steps, dt={self.dt}) does not match grid "
                f"({grid.n_steps} steps, dt={grid.dt})"
            )


@dataclass(frozen=True)
class UnobservedRecord:
    """Photon-count flags dN[k] in {0, 1}."""

    dN: np.ndarray

    def __post_init__(self):
        dN = np.array(self.dN, dtype=np.uint8)
        if dN.ndim != 1:
            raise ConfigError("unobserved record must be 1-D")
        if np.any(dN > 1):
            raise ConfigError("unobserved record entries must be 0 or 1")
        dN.setflags(write=False)
        object.__setattr__(self, "dN", dN)

    @property
    def n_steps(self):
        return self.dN.size

    @property
    def count(self):
        return int(self.dN.sum())


def _write_columns(path, header, step, values, fmt):
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for k, v in zip(step, values):
            fh.write(f"{k},{fmt % v}\n")


def write_observed_csv(record, path):
    """Write ``step,dJ`` rows; the dt is carried in a leading comment line."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# dt = {CSV_FLOAT % record.dt}\n")
        fh.write("step,dJ\n")
        for k, v in enumerate(record.dJ):
            fh.write(f"{k},{CSV_FLOAT % v}\n")


def read_observed_csv(path, dt=None):
    file_dt = None
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                if key.strip() == "dt":
                    file_dt = float(val)
                continue
            if line.startswith("step"):
                continue
            k, v = line.split(",")
            if int(k) != len(values):
                raise ConfigError(f"record file {path}: non-consecutive step index {k}")
            values.append(float(v))
    dt = dt if dt is not None else file_dt
    if dt is None:
        raise ConfigError(f"record file {path} does not state dt")
    if file_dt is not None and not math.isclose(dt, file_dt, rel_tol=1e-12):
        raise ConfigError(f"record file dt={file_dt} conflicts with dt={dt}")
    return ObservedRecord(np.array(values), dt)


def write_unobserved_csv(record, path):
    _write_columns(path, "step,dN", range(record.n_steps), record.dN, "%d")


def read_unobserved_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64, ndmin=2)
    if data.size and not np.array_equal(data[:, 0], np.arange(len(data))):
        raise ConfigError(f"record file {path}: non-consecutive step indices")
    return UnobservedRecord(data[:, 1] if data.size else np.zeros(0, dtype=np.uint8))
