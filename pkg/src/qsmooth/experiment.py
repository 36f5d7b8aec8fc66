"""End-to-end runs: record, filtered/retrofiltered series, both ensembles, CSV tables."""

from dataclasses import dataclass, field
from functools import cached_property
import hashlib
import logging
import os
import time

import numpy as np

from . import __version__
from . import algebra as qa
from . import estimation as est
from . import rng
from .engine import PropagationPlan, generate_observed_record, propagate_filtered, run_ensemble
from .kernel import BACKEND
from .records import CSV_FLOAT, ObservedRecord, write_observed_csv
from .stats import MODES, EnsembleStats

log = logging.getLogger(__name__)

FIGURES = (1, 2, 3, 4)
CACHE_FILE = "ensemble_stats.npz"
MANIFEST_FILE = "manifest.txt"


@dataclass
class RunResult:
    config: object
    record: object
    filtered: object
    plan: PropagationPlan
    assembly: EnsembleStats
    evaluation: EnsembleStats
    backend: str
    timings: dict = field(default_factory=dict)

    @property
    def params(self):
        return self.config.params

    @property
    def times(self):
        return self.config.grid.times

    @property
    def retro(self):
        return self.plan.retro

    @property
    def sizes(self):
        return (self.assembly.n_total, self.evaluation.n_total)

    @cached_property
    def _conditioned(self):
        return {m: self.assembly.mean_state(m) for m in MODES}

    def conditioned(self, mode):
        """Assembled conditioned state series (filtered or smoothed)."""
        return self._conditioned[mode]

    def lustrated(self, mode):
        return est.optimal_estimator("LI", self.conditioned(mode))

    def equality_checks(self, mode):
        return est.equality_checks(self.assembly, self.evaluation, mode)

    def bounds(self, mode):
        rho = self.conditioned(mode)
        return est.check_bounds(rho, qa.lustrate(rho), self.evaluation, mode, assembly=self.assembly)


def run_experiment(config, threads=1, backend=None, record=None):
    """Full pipeline for ``config``; ``record`` replays a given observed record."""
    p = config.params
    grid = config.grid
    timings = {}
    t0 = time.perf_counter()
    if record is None:
        record, filtered = generate_observed_record(p, grid, config.seed)
    else:
        record.check_grid(grid)
        filtered = propagate_filtered(record, p)
    plan = PropagationPlan(record, p, filtered=filtered)
    timings["series"] = time.perf_counter() - t0
    log.info("record and series ready (%d steps)", grid.n_steps)

    t0 = time.perf_counter()
    assembly = run_ensemble(plan, config.seed, 0, config.m_smooth, threads=threads, backend=backend)
    timings["assembly"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    evaluation = run_ensemble(plan, config.seed, rng.EVAL_INDEX_BASE, config.n_eval,
                              threads=threads, backend=backend)
    timings["evaluation"] = time.perf_counter() - t0
    log.info("ensembles done: M=%d in %.1fs, N=%d in %.1fs", config.m_smooth,
             timings["assembly"], config.n_eval, timings["evaluation"])
    return RunResult(config, record, filtered, plan, assembly, evaluation,
                     backend or BACKEND, timings)


# -- tables -------------------------------------------------------------------

def figure_table(result, which):
    """``(header, columns)`` for figure ``which`` in 1..4."""
    if which not in FIGURES:
        raise ValueError(f"unknown figure {which!r}; expected one of {FIGURES}")
    t = result.times
    sn, sm = result.evaluation, result.assembly
    cols = {"t": t}
    sigmas = {}
    if which == 1:
        for mode in MODES:
            c = est.purity_equality(sm, sn, mode)
            cols[f"E_L_{mode}"] = c.lhs
            cols[f"purity_{mode}"] = c.rhs
            sigmas[f"sigma_{mode}"] = c.sigma
    elif which == 2:
        for mode in MODES:
            c = est.entropy_equality(sm, sn, mode)
            cols[f"RE_risk_{mode}"] = c.lhs
            cols[f"vn_entropy_{mode}"] = c.rhs
            sigmas[f"sigma_{mode}"] = c.sigma
    elif which == 3:
        for mode in MODES:
            c = est.lustrated_equality(sm, sn, mode)
            cols[f"E_L_lustrated_{mode}"] = c.lhs
            cols[f"lambda_max_{mode}"] = c.rhs
            sigmas[f"sigma_{mode}"] = c.sigma
    else:
        for mode in MODES:
            rho = result.conditioned(mode)
            for name, estimate in ((mode, rho), (f"lustrated_{mode}", qa.lustrate(rho))):
                trsd = est.risk("TrSD", estimate, sn, mode)
                li = est.risk("LI", estimate, sn, mode)
                cols[f"TrSD_{name}"] = trsd.values
                cols[f"LI_{name}"] = li.values
                sigmas[f"sigma_TrSD_{name}"] = trsd.sigma
                sigmas[f"sigma_LI_{name}"] = li.sigma
        for mode in MODES:
            trsd_c = est.closed_form_risk("TrSD", result.conditioned(mode)).values
            # LI risk of the conditioned state itself, 1 - P
            li_c = 1.0 - qa.linear_fidelity(result.conditioned(mode), result.conditioned(mode))
            cols[f"TrSD_lower_{mode}"] = trsd_c
            cols[f"TrSD_upper_{mode}"] = 2.0 * trsd_c
            cols[f"LI_lower_{mode}"] = 0.5 * li_c
            cols[f"LI_upper_{mode}"] = li_c
    cols.update(sigmas)
    return list(cols), np.column_stack(list(cols.values()))


def state_table(result):
    """Bloch components of the direct filtered series and both assembled series."""
    cols = {"t": result.times}
    for label, states in (("direct_filtered", result.filtered.states),
                          ("filtered", result.conditioned("filtered")),
                          ("smoothed", result.conditioned("smoothed"))):
        r = qa.bloch_vector(states)
        for i, axis in enumerate("xyz"):
            cols[f"{axis}_{label}"] = r[:, i]
    return list(cols), np.column_stack(list(cols.values()))


def write_table(path, header, data):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        np.savetxt(fh, data, fmt=CSV_FLOAT, delimiter=",", newline="\n")


# -- outputs ------------------------------------------------------------------

def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def manifest_text(result, hashes, replayed=False):
    """Config echo (parseable as a config file) plus version, backend and hashes."""
    lines = [
        "# qsmooth run manifest",
        f"# version = {__version__}",
        f"# backend = {result.backend}",
        f"# record = {'replayed from record.csv' if replayed else 'generated from seed'}",
    ]
    text = "\n".join(lines) + "\n" + result.config.resolved().to_text()
    for name, digest in sorted(hashes.items()):
        text += f"# sha256 {name} = {digest}\n"
    return text


def write_outputs(result, out_dir, figures=FIGURES, replayed=False):
    """Write record, states, figure tables, ensemble cache and manifest.

    Returns the manifest path.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []
    path = os.path.join(out_dir, "record.csv")
    write_observed_csv(result.record, path)
    written.append(path)
    path = os.path.join(out_dir, "states.csv")
    write_table(path, *state_table(result))
    written.append(path)
    for which in figures:
        path = os.path.join(out_dir, f"fig{which}.csv")
        write_table(path, *figure_table(result, which))
        written.append(path)
    save_cache(result, os.path.join(out_dir, CACHE_FILE))
    hashes = {os.path.basename(p): _sha256(p) for p in written}
    manifest = os.path.join(out_dir, MANIFEST_FILE)
    with open(manifest, "w", newline="\n") as fh:
        fh.write(manifest_text(result, hashes, replayed))
    return manifest


def save_cache(result, path):
    """Ensemble moments keyed by the resolved config, for ``figures`` reuse."""
    arrays = {"config": np.array(result.config.resolved().to_text()),
              "backend": np.array(result.backend),
              "dJ": np.asarray(result.record.dJ)}
    for label, s in (("assembly", result.assembly), ("evaluation", result.evaluation)):
        arrays[f"{label}_acc"] = s.acc
        arrays[f"{label}_dead"] = s.dead
        arrays[f"{label}_shift"] = s.shift
        arrays[f"{label}_meta"] = np.array([s.n_total, s.index_start])
        arrays[f"{label}_diag"] = np.array([s.min_purity, s.min_eigenvalue])
    np.savez(path, **arrays)


def load_cached_result(config, out_dir):
    """Rebuild a :class:`RunResult` from a cache matching ``config``, else None."""
    path = os.path.join(out_dir, CACHE_FILE)
    if not os.path.exists(path):
        return None
    with np.load(path) as data:
        if str(data["config"]) != config.resolved().to_text():
            return None
        stats = {}
        for label in ("assembly", "evaluation"):
            n_total, start = (int(x) for x in data[f"{label}_meta"])
            min_p, min_e = (float(x) for x in data[f"{label}_diag"])
            stats[label] = EnsembleStats(data[f"{label}_acc"], n_total, data[f"{label}_dead"],
                                         min_p, min_e, start, data[f"{label}_shift"])
        backend = str(data["backend"])
        record = ObservedRecord(data["dJ"], config.dt)
    filtered = propagate_filtered(record, config.params)
    plan = PropagationPlan(record, config.params, filtered=filtered)
    return RunResult(config, record, filtered, plan, stats["assembly"], stats["evaluation"], backend)
