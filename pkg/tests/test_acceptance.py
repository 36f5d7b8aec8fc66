"""Acceptance criteria on the default configuration (seed 1, M = 2e4, N = 3e4).

Every criterion is checked at its stated tolerance; the terminal summary
lists one PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest

from qsmooth import algebra as qa
from qsmooth import estimation as est
from qsmooth.config import ExperimentConfig
from qsmooth.engine import assemble_conditioned, generate_observed_record
from qsmooth.experiment import run_experiment
from qsmooth.stats import MODES
from qsmooth.verify import exhaustive_ensemble, sme_order_check, toy_config

from . import oracle
from .conftest import record_criterion

K_SIGMA = 3.0
MEAN_TOL = 0.01


@pytest.fixture(scope="module")
def full():
    cfg = ExperimentConfig()
    assert (cfg.m_smooth, cfg.n_eval, cfg.seed) == (20000, 30000, 1)
    t0 = time.perf_counter()
    result = run_experiment(cfg, threads=1)
    result.timings["total"] = time.perf_counter() - t0
    return result


def _equality(full, number, index):
    checks = {mode: full.equality_checks(mode)[index] for mode in MODES}
    passed = all(c.passed for c in checks.values())
    for c in checks.values():
        assert c.k_sigma == K_SIGMA and c.mean_tol == MEAN_TOL
    detail = "; ".join(c.summary() for c in checks.values())
    record_criterion(number, passed, detail)
    assert passed, detail


def test_criterion_1_fidelity_equals_purity(full):
    _equality(full, 1, 0)


def test_criterion_2_relative_entropy_risk_equals_entropy(full):
    _equality(full, 2, 1)


def test_criterion_3_lustrated_fidelity_equals_largest_eigenvalue(full):
    _equality(full, 3, 2)


def test_criterion_4_bound_chains(full):
    parts, passed = [], True
    for mode in MODES:
        report = full.bounds(mode)
        assert report.k_sigma == K_SIGMA
        viol = report.violations()
        never_trivial = bool(np.all(report.trsd_conditioned <= 1.0))
        passed &= report.passed and never_trivial
        parts.append(f"{mode}: violations {sorted(viol) or 'none'}, "
                     f"max TrSD(conditioned) {np.max(report.trsd_conditioned):.4f}")
    record_criterion(4, passed, "; ".join(parts))
    assert passed, parts


def test_criterion_5_small_ensemble_gap_exceeds_large(full):
    small = run_experiment(full.config.quick(), threads=1, record=full.record)
    assert small.sizes == (2000, 3000)
    parts, passed = [], True
    for mode in MODES:
        g_small = est.purity_equality(small.assembly, small.evaluation, mode).mean_abs_gap
        g_large = est.purity_equality(full.assembly, full.evaluation, mode).mean_abs_gap
        passed &= g_small > g_large
        parts.append(f"{mode}: mean|gap| small {g_small:.3e} vs large {g_large:.3e}")
    record_criterion(5, passed, "; ".join(parts))
    assert passed, parts


def test_criterion_6_enumeration_oracle():
    cfg = toy_config(seed=1)
    assert cfg.grid.n_steps == 8
    record, filtered = generate_observed_record(cfg.params, cfg.grid, cfg.seed)
    ens = exhaustive_ensemble(record, cfg.params, filtered=filtered)
    exact_f, exact_s = oracle.conditioned_by_enumeration(record.dJ, cfg.omega, cfg.gamma, cfg.eta, cfg.dt)
    d_s = oracle.trace_distance(assemble_conditioned(ens, "smoothed"), exact_s)
    d_f = oracle.trace_distance(assemble_conditioned(ens, "filtered"), exact_f)
    passed = bool(np.all(d_s <= 1e-10) and np.all(d_f <= 1e-10))
    record_criterion(6, passed, f"max trace distance smoothed {np.max(d_s):.2e}, filtered {np.max(d_f):.2e}")
    assert passed


def test_criterion_7_integrator_and_state_invariants(full):
    order = sme_order_check(full.params, seed=0)
    purity = min(full.assembly.min_purity, full.evaluation.min_purity)
    lam = min(full.assembly.min_eigenvalue, full.evaluation.min_eigenvalue)
    states = np.concatenate([full.conditioned(m) for m in MODES] + [full.filtered.states])
    herm = float(np.max(qa.hermitian_deviation(states)))
    tr = float(np.max(np.abs(qa.trace(states) - 1)))
    lam_c = float(np.min(qa.min_eigenvalue(states)))
    passed = (order.passed and purity >= 1 - 1e-6 and lam >= qa.PSD_TOL
              and herm <= qa.HERMITIAN_TOL and tr <= qa.TRACE_TOL and lam_c >= qa.PSD_TOL)
    record_criterion(7, passed, f"{order.detail}; min true purity {purity:.15f}; "
                     f"min true eigenvalue {lam:.2e}; conditioned states: hermiticity {herm:.1e}, "
                     f"trace {tr:.1e}, min eigenvalue {lam_c:.2e}")
    assert passed


def test_criterion_8_structural_identities(full):
    n_eval = full.evaluation.n_total
    tol = 5 / math.sqrt(n_eval)
    terminal = float(oracle.trace_distance(full.conditioned("smoothed")[-1], full.conditioned("filtered")[-1]))
    direct = float(np.max(oracle.trace_distance(full.conditioned("filtered"), full.filtered.states)))
    weight_dev = max(float(np.max(np.abs(s.weight_mean(m) - 1)))
                     for s in (full.assembly, full.evaluation) for m in MODES)
    again = run_experiment(full.config, threads=3)
    bitwise = all(np.array_equal(getattr(full, a).acc, getattr(again, a).acc)
                  and np.array_equal(getattr(full, a).dead, getattr(again, a).dead)
                  for a in ("assembly", "evaluation"))
    passed = terminal <= 1e-10 and direct <= tol and weight_dev <= tol and bitwise
    record_criterion(8, passed, f"terminal {terminal:.1e}; filtered assembly vs direct {direct:.4f} "
                     f"(tol {tol:.4f}); max |weight mean - 1| {weight_dev:.4f}; "
                     f"threads 1 vs 3 bitwise equal: {bitwise}")
    assert passed


def test_criterion_9_suboptimality_probe(full):
    parts, passed = [], True
    for mode in MODES:
        probe = est.suboptimality_probe(full.assembly, mode, n_probes=100, seed=0)
        passed &= probe.passed
        parts.append(f"{mode}: violations {probe.violations}")
    record_criterion(9, passed, "; ".join(parts))
    assert passed, parts


def test_runtime_report(full):
    # informational: the default run is expected to take about two minutes on a laptop
    t = full.timings
    print(f"default run: {t['total']:.1f}s (assembly {t['assembly']:.1f}s, evaluation {t['evaluation']:.1f}s)")
    assert t["total"] > 0
