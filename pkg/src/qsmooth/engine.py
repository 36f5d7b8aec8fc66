"""Records, filtered/retrofiltered series and weighted true-state ensembles.

Two routes produce ensemble statistics:

* the reference route (:func:`propagate_true`, :class:`WeightedEnsemble`)
  keeps every trajectory in memory and is meant for small ensembles, tests
  and exact enumeration;
* the streaming route (:class:`PropagationPlan`, :func:`run_ensemble`) feeds
  chunks of trajectories through the kernel and keeps only per-step moments.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import os

import numpy as np

from . import algebra as qa
from . import dynamics as dyn
from . import rng
from .errors import ConfigError, EstimationError, PropagationError
from .kernel import get_kernel
from .records import ObservedRecord, UnobservedRecord
from .stats import ACC_WIDTH, EnsembleStats, mode_index, reference_shift, stats_from_samples

CHUNK_SIZE = 1024


@dataclass(frozen=True)
class FilteredSeries:
    """Normalised filtered states rho_F[k] and log Tr of the unnormalised ones."""

    states: np.ndarray
    log_trace: np.ndarray


@dataclass(frozen=True)
class RetrofilteredSeries:
    """Retrofiltered effects stored as trace-normalised matrices plus log scale."""

    normalized: np.ndarray
    log_scale: np.ndarray

    @property
    def effects(self):
        return self.normalized * np.exp(self.log_scale)[:, None, None]


@dataclass(frozen=True)
class TrajectoryResult:
    """Normalised true states and accumulated log Tr of the unnormalised ones.

    ``dead_step`` is the first grid index whose state could not be formed
    (impossible jump), or ``None``.  From that index on the stored state is
    frozen at its last valid value and the trajectory carries zero weight.
    """

    states: np.ndarray
    log_trace: np.ndarray
    dead_step: int = None

    @property
    def alive(self):
        alive = np.ones(self.log_trace.shape, dtype=bool)
        if self.dead_step is not None:
            alive[self.dead_step:] = False
        return alive


def _steps(record):
    return record.n_steps


def propagate_filtered(record, p):
    """Filtered series for a given observed record, starting in the ground state."""
    ops = dyn.build_step_operators(p)
    n = _steps(record)
    states = np.empty((n + 1, 2, 2), dtype=complex)
    log_trace = np.zeros(n + 1)
    states[0] = qa.GROUND
    for k in range(n):
        try:
            a = dyn.filtered_step_unnormalized(states[k], record.dJ[k], ops)
        except PropagationError as exc:
            raise PropagationError(str(exc), step=k) from exc
        tr = qa.trace(a).real
        if not tr > dyn.TRACE_FLOOR:
            raise PropagationError(f"filtered trace {tr:.3e} vanished", step=k)
        states[k + 1] = a / tr
        log_trace[k + 1] = log_trace[k] + math.log(tr)
    return FilteredSeries(states, log_trace)


def generate_observed_record(p, grid, seed):
    """Simulate the homodyne record together with its filtered series.

    ``dJ[k] = Tr[c rho_F[k] + rho_F[k] c^dag] dt + dW[k]`` with dW drawn from
    the record stream of ``seed``.
    """
    if not math.isclose(grid.dt, p.dt, rel_tol=1e-12):
        raise ConfigError(f"grid dt {grid.dt} differs from model dt {p.dt}")
    ops = dyn.build_step_operators(p)
    n = grid.n_steps
    dW = rng.innovations(seed, n, p.dt)
    dJ = np.empty(n)
    states = np.empty((n + 1, 2, 2), dtype=complex)
    log_trace = np.zeros(n + 1)
    states[0] = qa.GROUND
    for k in range(n):
        dJ[k] = dyn.homodyne_signal(states[k], p) * p.dt + dW[k]
        try:
            a = dyn.filtered_step_unnormalized(states[k], dJ[k], ops)
        except PropagationError as exc:
            raise PropagationError(str(exc), step=k) from exc
        tr = qa.trace(a).real
        if not tr > dyn.TRACE_FLOOR:
            raise PropagationError(f"filtered trace {tr:.3e} vanished", step=k)
        states[k + 1] = a / tr
        log_trace[k + 1] = log_trace[k] + math.log(tr)
    return ObservedRecord(dJ, p.dt), FilteredSeries(states, log_trace)


def propagate_retrofiltered(record, p):
    """Retrofiltered effects E_R[k], k = 0..n, from E_R[n] = I backwards."""
    ops = dyn.build_step_operators(p)
    n = _steps(record)
    normalized = np.empty((n + 1, 2, 2), dtype=complex)
    log_scale = np.zeros(n + 1)
    normalized[n] = qa.IDENTITY / 2
    log_scale[n] = math.log(2.0)
    for k in range(n - 1, -1, -1):
        e = dyn.retro_step(normalized[k + 1], record.dJ[k], ops)
        tr = qa.trace(e).real
        if not tr > dyn.TRACE_FLOOR:
            raise PropagationError(f"retrofiltered effect vanished ({tr:.3e})", step=k)
        normalized[k] = e / tr
        log_scale[k] = log_scale[k + 1] + math.log(tr)
    return RetrofilteredSeries(normalized, log_scale)


def sample_unobserved_record(p, grid, seed, index):
    """Ostensible jump record: i.i.d. Bernoulli(mu_ost dt) from stream (seed, index)."""
    flags = rng.jump_flags(seed, [index], grid.n_steps, p.jump_probability)
    return UnobservedRecord(flags[0])


def propagate_true(record, u, p, ops=None):
    """Reference propagation of one true-state trajectory from the ground state."""
    if u.n_steps != record.n_steps:
        raise ConfigError("observed and unobserved records differ in length")
    ops = ops or dyn.build_step_operators(p)
    n = record.n_steps
    states = np.empty((n + 1, 2, 2), dtype=complex)
    log_trace = np.zeros(n + 1)
    states[0] = qa.GROUND
    for k in range(n):
        try:
            a = dyn.true_step(states[k], record.dJ[k], u.dN[k], ops)
        except PropagationError:
            states[k + 1:] = states[k]
            log_trace[k + 1:] = log_trace[k]
            return TrajectoryResult(states, log_trace, dead_step=k + 1)
        tr = qa.trace(a).real
        if not tr > dyn.TRACE_FLOOR:
            states[k + 1:] = states[k]
            log_trace[k + 1:] = log_trace[k]
            return TrajectoryResult(states, log_trace, dead_step=k + 1)
        states[k + 1] = a / tr
        log_trace[k + 1] = log_trace[k] + math.log(tr)
    return TrajectoryResult(states, log_trace)


def smoothing_denominators(filtered, retro):
    """Tr[rho_F[k] E[k]] for the normalised series."""
    return qa.linear_fidelity(filtered.states, retro.normalized)


class WeightedEnsemble:
    """In-memory ensemble of true-state trajectories with both weight families.

    ``prior`` optionally multiplies each trajectory's weights; exhaustive
    enumeration uses it to carry the ostensible probability of each record
    (scaled by the ensemble size) in place of sampling frequency.
    """

    def __init__(self, trajectories, filtered, retro, prior=None, index_start=0):
        if not trajectories:
            raise EstimationError("ensemble is empty")
        self.trajectories = list(trajectories)
        self.filtered = filtered
        self.retro = retro
        self.index_start = index_start
        states = np.stack([t.states for t in self.trajectories])
        log_trace = np.stack([t.log_trace for t in self.trajectories])
        alive = np.stack([t.alive for t in self.trajectories])
        w_f = np.where(alive, np.exp(log_trace - filtered.log_trace[None, :]), 0.0)
        den = smoothing_denominators(filtered, retro)
        tre = qa.linear_fidelity(states, retro.normalized[None])
        w_s = w_f * tre / den[None, :]
        if prior is not None:
            prior = np.asarray(prior, dtype=float)[:, None]
            w_f = w_f * prior
            w_s = w_s * prior
        self.states = states
        self.alive = alive
        self.weights = np.stack([w_f, w_s])

    def __len__(self):
        return len(self.trajectories)

    @property
    def n_steps(self):
        return self.states.shape[1] - 1

    def weight(self, mode):
        return self.weights[mode_index(mode)]

    def stats(self, shift=None):
        return stats_from_samples(self.weights, self.states, alive=self.alive,
                                  index_start=self.index_start, shift=shift)


def build_ensemble(record, p, seed, indices, filtered=None, retro=None):
    """Reference-route ensemble for the given stream indices."""
    grid_n = record.n_steps
    filtered = filtered or propagate_filtered(record, p)
    retro = retro or propagate_retrofiltered(record, p)
    ops = dyn.build_step_operators(p)
    flags = rng.jump_flags(seed, list(indices), grid_n, p.jump_probability)
    trajs = [propagate_true(record, UnobservedRecord(f), p, ops) for f in flags]
    start = int(indices[0]) if len(indices) else 0
    return WeightedEnsemble(trajs, filtered, retro, index_start=start)


def assemble_conditioned(ensemble, mode):
    """Conditioned state per step: weighted average of true states, renormalised.

    Accepts a :class:`WeightedEnsemble` (direct average) or an
    :class:`~qsmooth.stats.EnsembleStats` (from first moments).
    """
    if isinstance(ensemble, EnsembleStats):
        return ensemble.mean_state(mode)
    w = ensemble.weight(mode)
    total = w.sum(axis=0)
    bad = np.flatnonzero(~(total > 0))
    if bad.size:
        raise EstimationError("all ensemble weights vanish", step=int(bad[0]))
    avg = np.einsum("nk,nkij->kij", w, ensemble.states) / len(ensemble)
    avg = qa.hermitize(avg)
    return qa.normalize(avg)


def ensemble_expectation(ensemble, f, mode, normalize=False):
    """Per-step ``(1/N) sum_n w[n,k] f(rho_T[n,k], k)``.

    With ``normalize=True`` the sum is divided by the weight total instead of
    the ensemble size.
    """
    w = ensemble.weight(mode)
    n, kk = w.shape
    vals = np.zeros((n, kk))
    for i in range(n):
        for k in range(kk):
            if w[i, k] != 0.0:
                vals[i, k] = f(ensemble.states[i, k], k)
    num = np.sum(w * vals, axis=0)
    if normalize:
        total = w.sum(axis=0)
        bad = np.flatnonzero(~(total > 0))
        if bad.size:
            raise EstimationError("all ensemble weights vanish", step=int(bad[0]))
        return num / total
    return num / n


class PropagationPlan:
    """Everything the kernel needs for one observed record."""

    def __init__(self, record, p, filtered=None, retro=None):
        self.record = record
        self.params = p
        self.filtered = filtered or propagate_filtered(record, p)
        self.retro = retro or propagate_retrofiltered(record, p)
        ops = dyn.build_step_operators(p)
        dJ = record.dJ[:, None, None]
        c = ops.c_phi
        meas = (
            qa.IDENTITY
            + c * dJ
            - 0.5 * (qa.dagger(c) @ c) * p.dt
            + 0.5 * (c @ c) * (dJ * dJ - p.dt)
        )
        kraus = np.empty((record.n_steps, 2, 2, 2), dtype=complex)
        for j, m in enumerate((ops.m0, ops.m1)):
            kraus[:, j] = ops.u_h @ meas @ m
        self.kraus = np.ascontiguousarray(kraus)
        e = self.retro.normalized
        self.effect = np.ascontiguousarray(
            np.stack([e[:, 0, 0].real, e[:, 1, 1].real, e[:, 0, 1].real, e[:, 0, 1].imag], axis=1)
        )
        self.den = np.ascontiguousarray(smoothing_denominators(self.filtered, self.retro))
        self.logtr_f = np.ascontiguousarray(self.filtered.log_trace)
        # true states scatter around the filtered state; centre the moments there
        self.shift = np.ascontiguousarray(reference_shift(self.filtered.states))

    @property
    def n_steps(self):
        return self.record.n_steps

    def run_chunk(self, seed, indices, backend=None):
        n = self.n_steps
        dn = rng.jump_flags(seed, indices, n, self.params.jump_probability)
        acc = np.zeros((n + 1, 2, ACC_WIDTH))
        dead = np.zeros(n + 1, dtype=np.int64)
        diag = np.array([np.inf, np.inf])
        get_kernel(backend)(self.kraus, dn, self.logtr_f, self.effect, self.den, self.shift,
                            acc, dead, diag)
        return acc, dead, diag


def resolve_threads(threads):
    """Worker count; 0 or None means one per available CPU."""
    if not threads:
        return os.cpu_count() or 1
    return int(threads)


def run_ensemble(plan, seed, start, count, threads=1, backend=None, chunk_size=CHUNK_SIZE):
    """Streaming ensemble statistics for stream indices ``start .. start+count-1``.

    Chunks are fixed by ``chunk_size`` and reduced in index order, so the
    result is bitwise independent of ``threads``.
    """
    if count < 1:
        raise ConfigError("ensemble size must be at least 1")
    bounds = [(s, min(s + chunk_size, start + count)) for s in range(start, start + count, chunk_size)]
    n = plan.n_steps
    acc = np.zeros((n + 1, 2, ACC_WIDTH))
    dead = np.zeros(n + 1, dtype=np.int64)
    diag = np.array([np.inf, np.inf])

    def work(b):
        return plan.run_chunk(seed, np.arange(b[0], b[1], dtype=np.uint64), backend)

    workers = resolve_threads(threads)
    if workers == 1:
        results = map(work, bounds)
        for c_acc, c_dead, c_diag in results:
            acc += c_acc
            dead += c_dead
            diag = np.minimum(diag, c_diag)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for c_acc, c_dead, c_diag in pool.map(work, bounds):
                acc += c_acc
                dead += c_dead
                diag = np.minimum(diag, c_diag)
    return EnsembleStats(
        acc=acc,
        n_total=count,
        dead=dead,
        min_purity=float(diag[0]),
        min_eigenvalue=float(diag[1]),
        index_start=start,
        shift=plan.shift,
    )
