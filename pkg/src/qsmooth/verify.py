"""Invariant suite behind ``qsmooth verify``.

Each check returns a :class:`CheckResult`; a failing check names the
offending step index where one applies.
"""

from dataclasses import dataclass
from itertools import product
import math

import numpy as np

from . import algebra as qa
from . import dynamics as dyn
from . import estimation as est
from .config import ExperimentConfig
from .engine import (
    WeightedEnsemble,
    assemble_conditioned,
    generate_observed_record,
    propagate_filtered,
    propagate_retrofiltered,
    propagate_true,
)
from .records import UnobservedRecord
from .stats import MODES

TOY_STEPS = 8
TOY_DT = 0.05
ENUM_TOL = 1e-10
TERMINAL_TOL = 1e-10
TRUE_PURITY_MIN = 1.0 - 1e-6


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    step: int = None

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        at = f" (step {self.step})" if self.step is not None and not self.passed else ""
        return f"[{status}] {self.name}{at}: {self.detail}"


def _first(bad):
    idx = np.flatnonzero(bad)
    return int(idx[0]) if idx.size else None


def random_state(rng, pure=False):
    v = rng.normal(size=3)
    v /= np.linalg.norm(v)
    r = 1.0 if pure else rng.uniform() ** (1 / 3)
    return qa.from_bloch(r * v)


def random_matrix(rng):
    return rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))


# -- algebra and maps ---------------------------------------------------------

def algebra_checks(seed=0, n=200):
    rng = np.random.default_rng(seed)
    rho = np.array([random_state(rng) for _ in range(n)])
    sigma = np.array([random_state(rng) for _ in range(n)])
    out = []
    ident = qa.trsd(rho, sigma) - (qa.purity(rho) + qa.purity(sigma) - 2 * qa.linear_fidelity(rho, sigma))
    out.append(CheckResult("trsd identity", bool(np.max(np.abs(ident)) <= 1e-12),
                           f"max deviation {np.max(np.abs(ident)):.2e}"))
    s = qa.relative_entropy(rho, sigma)
    out.append(CheckResult("relative entropy non-negative", bool(np.all(s >= 0)), f"min {np.min(s):.3e}"))
    excess = qa.linear_fidelity(sigma, rho) - qa.largest_eigenvalue(rho)
    out.append(CheckResult("fidelity below largest eigenvalue", bool(np.all(excess <= 1e-12)),
                           f"max excess {np.max(excess):.2e}"))
    lus = qa.lustrate(rho)
    idem = np.max(np.abs(qa.lustrate(lus) - lus))
    pure = np.max(np.abs(qa.purity(lus) - 1))
    out.append(CheckResult("lustration idempotent and pure", bool(idem <= 1e-12 and pure <= 1e-12),
                           f"idempotence {idem:.2e}, purity {pure:.2e}"))
    pair = qa.eig2(rho)
    recon = np.einsum("ni,nai,nbi->nab", pair.values, pair.vectors, np.conj(pair.vectors))
    err = np.max(np.abs(recon - rho))
    out.append(CheckResult("eigendecomposition reconstructs", bool(err <= 1e-10), f"max error {err:.2e}"))
    dual = []
    for _ in range(50):
        m = random_matrix(rng)
        a = random_state(rng)
        e = random_state(rng) * rng.uniform(0.1, 2)
        dual.append(qa.linear_fidelity(e, dyn.apply_kraus(m, a)) - qa.linear_fidelity(dyn.apply_adjoint_kraus(m, e), a))
    dual = float(np.max(np.abs(dual)))
    out.append(CheckResult("adjoint duality", dual <= 1e-12, f"max deviation {dual:.2e}"))
    return out


def dynamics_checks(p, seed=0, n=50):
    rng = np.random.default_rng(seed)
    ops = dyn.build_step_operators(p)
    out = []
    m0, m1 = ops.unconditioned_pair
    comp = qa.dagger(m0) @ m0 + qa.dagger(m1) @ m1 - qa.IDENTITY
    comp = float(np.max(np.abs(comp)))
    out.append(CheckResult("unobserved-channel completeness", comp <= 10 * p.dt ** 2, f"deviation {comp:.2e}"))
    q = p.jump_probability
    worst_tr = worst_state = 0.0
    for _ in range(n):
        rho = random_state(rng, pure=True)
        dJ = rng.normal(0, math.sqrt(p.dt))
        parts = []
        for dN, prob in ((0, 1 - q), (1, q)):
            try:
                parts.append(prob * dyn.true_step(rho, dJ, dN, ops))
            except dyn.PropagationError:
                parts.append(np.zeros((2, 2), dtype=complex))
        avg = parts[0] + parts[1]
        direct = dyn.filtered_step_unnormalized(rho, dJ, ops)
        worst_tr = max(worst_tr, abs(qa.trace(avg).real - qa.trace(direct).real))
        worst_state = max(worst_state, float(np.max(np.abs(qa.normalize(avg) - dyn.filtered_step(rho, dJ, ops)))))
    out.append(CheckResult("ostensible trace consistency", worst_tr <= 1e-12, f"max deviation {worst_tr:.2e}"))
    out.append(CheckResult("filtered step = ostensible average", worst_state <= 1e-12,
                           f"max deviation {worst_state:.2e}"))
    return out


def sme_local_errors(p, rho, n_halvings=3, dN=0, sign=1.0):
    """Map step vs explicit SME step from ``rho`` for dt, dt/2, ...

    Innovations are fixed at ``sign * sqrt(dt)`` so the local error has a
    deterministic scaling.  Returns ``(dts, errors)``.
    """
    dts, errs = [], []
    for h in range(n_halvings + 1):
        ph = dyn.ModelParams(gamma=p.gamma, omega=p.omega, eta=p.eta, dt=p.dt / 2 ** h, mu_ost=p.mu_ost)
        ops = dyn.build_step_operators(ph)
        dW = sign * math.sqrt(ph.dt)
        dJ = dyn.homodyne_signal(rho, ph) * ph.dt + dW
        mapped = dyn.true_step(rho, dJ, dN, ops)
        mapped = mapped / qa.trace(mapped).real
        euler = dyn.sme_true_step_reference(rho, dW, dN, ph)
        dts.append(ph.dt)
        errs.append(float(np.max(np.abs(mapped - euler))))
    return np.array(dts), np.array(errs)


def sme_order_check(p, seed=0, n=20, n_halvings=6, min_order=1.4):
    """Local error of no-jump steps shrinks at least like dt^(3/2).

    The order is read off the two finest step sizes; states whose leading
    coefficient is small approach 3/2 from above.
    """
    rng = np.random.default_rng(seed)
    orders = []
    for _ in range(n):
        rho = random_state(rng, pure=True)
        _, errs = sme_local_errors(p, rho, n_halvings, sign=rng.choice([-1.0, 1.0]))
        orders.append(math.log2(errs[-2] / errs[-1]))
    lo = float(np.min(orders))
    return CheckResult("map vs SME local order", lo >= min_order,
                       f"finest-pair orders {lo:.3f}..{np.max(orders):.3f} (need >= {min_order})")


# -- exhaustive enumeration -----------------------------------------------------

def toy_config(seed=0):
    return ExperimentConfig(dt=TOY_DT, t_final=TOY_STEPS * TOY_DT, m_smooth=1, n_eval=1, seed=seed)


def all_records(n):
    return [UnobservedRecord(np.array(bits, dtype=np.uint8)) for bits in product((0, 1), repeat=n)]


def exhaustive_ensemble(record, p, filtered=None, retro=None):
    """Weighted ensemble over every unobserved record, weighted by its ostensible probability."""
    n = record.n_steps
    filtered = filtered or propagate_filtered(record, p)
    retro = retro or propagate_retrofiltered(record, p)
    ops = dyn.build_step_operators(p)
    q = p.jump_probability
    recs = all_records(n)
    trajs = [propagate_true(record, u, p, ops) for u in recs]
    counts = np.array([u.count for u in recs])
    prior = (q ** counts) * ((1 - q) ** (n - counts)) * 2 ** n
    return WeightedEnsemble(trajs, filtered, retro, prior=prior)


def enumerate_smoothed(record, p):
    """Conditioned states from joint record probabilities, without retrofiltering.

    Every full unobserved record is propagated with the unscaled operators;
    its weight is the trace of the final unnormalised state.  The smoothed
    state at step k averages the normalised state at k over all records;
    the filtered state uses the trace at k instead.
    """
    ops = dyn.build_step_operators(p)
    n = record.n_steps
    recs = all_records(n)
    states = np.empty((len(recs), n + 1, 2, 2), dtype=complex)
    traces = np.empty((len(recs), n + 1))
    for i, u in enumerate(recs):
        a = qa.GROUND.copy()
        states[i, 0], traces[i, 0] = a, 1.0
        for k in range(n):
            m = ops.m1_u if u.dN[k] else ops.m0_u
            k_op = ops.u_h @ ops.measurement(record.dJ[k]) @ m
            a = k_op @ a @ qa.dagger(k_op)
            tr = qa.trace(a).real
            traces[i, k + 1] = tr
            states[i, k + 1] = a / tr if tr > 0 else states[i, k]
    smoothed = np.einsum("r,rkab->kab", traces[:, -1], states) / traces[:, -1].sum()
    filtered = np.einsum("rk,rkab->kab", traces, states) / traces.sum(axis=0)[:, None, None]
    return filtered, smoothed


def trace_distance(a, b):
    d = np.asarray(a) - np.asarray(b)
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(d)), axis=-1)


def enumeration_check(seed=0):
    cfg = toy_config(seed)
    p = cfg.params
    record, _ = generate_observed_record(p, cfg.grid, seed)
    ens = exhaustive_ensemble(record, p)
    exact_f, exact_s = enumerate_smoothed(record, p)
    out = []
    for mode, exact in (("filtered", exact_f), ("smoothed", exact_s)):
        d = trace_distance(assemble_conditioned(ens, mode), exact)
        out.append(CheckResult(f"exhaustive enumeration ({mode})", bool(np.all(d <= ENUM_TOL)),
                               f"max trace distance {np.max(d):.2e}", _first(d > ENUM_TOL)))
    return out


# -- run-level checks -----------------------------------------------------------

def run_checks(result, probe_seed=0):
    out = []
    sm, sn = result.assembly, result.evaluation
    for label, s in (("assembly", sm), ("evaluation", sn)):
        out.append(CheckResult(f"true-state purity ({label})", s.min_purity >= TRUE_PURITY_MIN,
                               f"min purity {s.min_purity:.15f}"))
        out.append(CheckResult(f"true-state PSD ({label})", s.min_eigenvalue >= qa.PSD_TOL,
                               f"min eigenvalue {s.min_eigenvalue:.2e}"))
        tol = 5.0 / math.sqrt(s.n_total)
        for mode in MODES:
            dev = np.abs(s.weight_mean(mode) - 1.0)
            out.append(CheckResult(f"weight mean = 1 ({label}, {mode})", bool(np.all(dev <= tol)),
                                   f"max |mean - 1| {np.max(dev):.3e} vs {tol:.3e}", _first(dev > tol)))

    # Tr[rho_F E_R] is constant in time up to the normalisations
    f, r = result.filtered, result.retro
    logs = np.log(qa.linear_fidelity(f.states, r.normalized)) + f.log_trace + r.log_scale
    drift = np.abs(logs - logs[0])
    out.append(CheckResult("likelihood constancy", bool(np.all(drift <= 1e-9)),
                           f"max log drift {np.max(drift):.2e}", _first(drift > 1e-9)))

    final = trace_distance(result.conditioned("smoothed")[-1], result.conditioned("filtered")[-1])
    out.append(CheckResult("terminal smoothing identity", final <= TERMINAL_TOL, f"trace distance {final:.2e}"))
    d = trace_distance(result.conditioned("filtered"), result.filtered.states)
    tol = 5.0 / math.sqrt(sm.n_total)
    out.append(CheckResult("filtered assembly = direct filter", bool(np.all(d <= tol)),
                           f"max trace distance {np.max(d):.3e} vs {tol:.3e}", _first(d > tol)))
    for mode in MODES:
        for c in result.equality_checks(mode):
            bad = c.violations
            out.append(CheckResult(f"{c.name} ({mode})", c.passed, c.summary(),
                                   int(bad[0]) if bad.size else None))
        b = result.bounds(mode)
        viol = b.violations()
        first = min((int(v[0]) for v in viol.values()), default=None)
        out.append(CheckResult(f"risk bounds ({mode})", b.passed,
                               ", ".join(sorted(viol)) or b.summary(), first))
        probe = est.suboptimality_probe(sm, mode, seed=probe_seed)
        out.append(CheckResult(f"suboptimality probe ({mode})", probe.passed,
                               f"violations {probe.violations}, min excess {probe.min_excess}"))
    return out


def full_suite(result, seed=0):
    checks = algebra_checks(seed) + dynamics_checks(result.params, seed)
    checks.append(sme_order_check(result.params, seed))
    checks += enumeration_check(seed)
    checks += run_checks(result, seed)
    return checks
