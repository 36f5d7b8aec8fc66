"""Risk functionals, optimal estimators, closed-form risks and bound checks.

Risks are conditional expectations of a cost over the true-state ensemble.
Here they are evaluated from :class:`~qsmooth.stats.EnsembleStats` moments,
because every cost is affine in the true-state features once the estimate
is fixed (see :mod:`qsmooth.stats`).

Statistical comparisons combine the noise of two independent ensembles:
the assembly ensemble (size M) that produced the conditioned state and the
evaluation ensemble (size N) used for expectations.  For a comparison
``lhs_N - rhs(rho_M)`` the standard error is

    sigma^2 = SE_N(a_N . v)^2 + SE_M(a_M . v)^2,

where ``a_N`` is the functional averaged over the evaluation ensemble and
``a_M`` the first-order sensitivity of the whole comparison to the
assembly ensemble's mean state.
"""

from dataclasses import dataclass, field

import numpy as np

from . import algebra as qa
from .stats import ONE, PURITY, XLOGX, EnsembleStats, linear_coeffs

COSTS = ("TrSD", "RE", "LI")
ESTIMATORS = ("filtered", "smoothed", "lustrated-filtered", "lustrated-smoothed")
# numerical floor added to statistical tolerances (round-off when sigma -> 0)
NUMERIC_ATOL = 1e-10


def _stats(ensemble):
    return ensemble if isinstance(ensemble, EnsembleStats) else ensemble.stats()


def _check_cost(cost):
    if cost not in COSTS:
        raise ValueError(f"cost must be one of {COSTS}, got {cost!r}")


@dataclass
class RiskSeries:
    """Per-step risk values with their Monte Carlo standard errors."""

    values: np.ndarray
    sigma: np.ndarray
    cost: str
    estimator: str
    sizes: tuple = (None, None)
    seed: int = None

    def __post_init__(self):
        _check_cost(self.cost)


def fidelity_coeffs(estimate):
    """Coefficients of L(estimate, rho_T)."""
    return linear_coeffs(estimate)


def trsd_coeffs(estimate):
    """Coefficients of Tr[(estimate - rho_T)^2] = P(est) + P(rho_T) - 2 L."""
    p = qa.purity(estimate)
    return p[..., None] * ONE + PURITY - 2.0 * linear_coeffs(estimate)


def re_coeffs(estimate, mean_state):
    """Coefficients of S(rho_T || estimate), plus a per-step infinite flag.

    The flag marks steps where the ensemble's mean state has weight on the
    kernel of ``estimate`` (support mismatch), making the risk infinite.
    """
    _, vecs, logs = qa.log2_matrix(estimate)
    null = np.isinf(logs)
    finite_logs = np.where(null, 0.0, logs)
    log_op = np.einsum("...ai,...i,...bi->...ab", vecs, finite_logs, np.conj(vecs))
    weights = np.einsum("...ai,...ab,...bi->...i", np.conj(vecs), mean_state, vecs).real
    infinite = np.any(null & (weights > qa.EPS_SUPPORT), axis=-1)
    return XLOGX - linear_coeffs(log_op), infinite, log_op


def expected_value(stats, coeffs, mode, normalize=True):
    """(mean, standard error) of ``coeffs . v`` over the ensemble."""
    return stats.mean(coeffs, mode, normalize), stats.stderr(coeffs, mode, normalize)


def risk(cost, estimates, ensemble, mode, conditioned=None, estimator="custom",
         sizes=(None, None), seed=None):
    """Risk of an estimate series under ``ensemble`` in conditioning ``mode``.

    TrSD and RE are ensemble averages of the cost.  LI uses linearity:
    ``1 - Tr[estimate rho_Xi]`` with ``conditioned`` (default: the
    ensemble's own mean state).
    """
    _check_cost(cost)
    stats = _stats(ensemble)
    estimates = np.asarray(estimates, dtype=complex)
    if cost == "TrSD":
        coeffs = trsd_coeffs(estimates)
        values, sigma = expected_value(stats, coeffs, mode)
    elif cost == "RE":
        coeffs, infinite, _ = re_coeffs(estimates, stats.mean_state(mode))
        values, sigma = expected_value(stats, coeffs, mode)
        values = np.where(infinite, np.inf, values)
    else:
        rho_xi = stats.mean_state(mode) if conditioned is None else np.asarray(conditioned)
        values = 1.0 - qa.linear_fidelity(estimates, rho_xi)
        sigma = stats.stderr(linear_coeffs(estimates), mode)
    return RiskSeries(values, sigma, cost, estimator, sizes, seed)


def optimal_estimator(cost, conditioned):
    """Risk-minimising estimate: the conditioned state, or its lustration for LI."""
    _check_cost(cost)
    conditioned = np.asarray(conditioned, dtype=complex)
    if cost == "LI":
        return qa.lustrate(conditioned)
    return conditioned


def closed_form_risk(cost, conditioned, estimator="conditioned", sizes=(None, None), seed=None):
    """Risk of the optimal estimator expressed through the conditioned state alone.

    TrSD -> 1 - P, RE -> von Neumann entropy (bits), LI -> 1 - lambda_max.
    """
    _check_cost(cost)
    conditioned = np.asarray(conditioned, dtype=complex)
    if cost == "TrSD":
        values = 1.0 - qa.purity(conditioned)
    elif cost == "RE":
        values = qa.von_neumann_entropy(conditioned)
    else:
        values = 1.0 - qa.largest_eigenvalue(conditioned)
    values = np.asarray(values, dtype=float)
    return RiskSeries(values, np.zeros_like(values), cost, estimator, sizes, seed)


def combined_sigma(stats_eval, a_eval, stats_assembly, a_assembly, mode):
    s2 = stats_eval.stderr(a_eval, mode) ** 2
    if stats_assembly is not None and a_assembly is not None:
        s2 = s2 + stats_assembly.stderr(a_assembly, mode) ** 2
    return np.sqrt(s2)


@dataclass
class EqualityCheck:
    """Monte Carlo side vs closed-form side of an exact equality, per step."""

    name: str
    mode: str
    lhs: np.ndarray
    rhs: np.ndarray
    sigma: np.ndarray
    k_sigma: float = 3.0
    mean_tol: float = 0.01

    @property
    def gap(self):
        return self.lhs - self.rhs

    @property
    def max_abs_gap(self):
        return float(np.max(np.abs(self.gap)))

    @property
    def mean_abs_gap(self):
        return float(np.mean(np.abs(self.gap)))

    @property
    def excess(self):
        """|gap| minus its tolerance; positive entries are violations."""
        return np.abs(self.gap) - (self.k_sigma * self.sigma + NUMERIC_ATOL)

    @property
    def violations(self):
        bad = ~(self.excess <= 0)
        return np.flatnonzero(bad)

    @property
    def worst_z(self):
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.gap) / self.sigma
        z = np.where(np.abs(self.gap) <= NUMERIC_ATOL, 0.0, z)
        return float(np.nanmax(z))

    @property
    def passed(self):
        return self.violations.size == 0 and self.mean_abs_gap <= self.mean_tol

    def summary(self):
        v = self.violations
        first = f", first violation at step {v[0]}" if v.size else ""
        return (f"{self.name}[{self.mode}]: max|gap|={self.max_abs_gap:.3e}, "
                f"mean|gap|={self.mean_abs_gap:.3e}, worst z={self.worst_z:.2f}, "
                f"{v.size} steps beyond {self.k_sigma:g} sigma{first}")


def purity_equality(stats_assembly, stats_eval, mode):
    """E{L(rho_Xi, rho_T)} = P(rho_Xi)."""
    rho = stats_assembly.mean_state(mode)
    a = fidelity_coeffs(rho)
    lhs = stats_eval.mean(a, mode)
    rhs = qa.purity(rho)
    sigma = combined_sigma(stats_eval, a, stats_assembly, a, mode)
    return EqualityCheck("fidelity=purity", mode, lhs, rhs, sigma)


def entropy_equality(stats_assembly, stats_eval, mode):
    """E{S(rho_T || rho_Xi)} = S(rho_Xi)."""
    rho = stats_assembly.mean_state(mode)
    a_n, infinite, log_op = re_coeffs(rho, stats_eval.mean_state(mode))
    lhs = np.where(infinite, np.inf, stats_eval.mean(a_n, mode))
    rhs = qa.von_neumann_entropy(rho)
    sigma = combined_sigma(stats_eval, a_n, stats_assembly, linear_coeffs(log_op), mode)
    return EqualityCheck("relative-entropy=entropy", mode, lhs, rhs, sigma)


def lustrated_equality(stats_assembly, stats_eval, mode):
    """E{L(lustrate(rho_Xi), rho_T)} = lambda_max(rho_Xi)."""
    rho = stats_assembly.mean_state(mode)
    a = fidelity_coeffs(qa.lustrate(rho))
    lhs = stats_eval.mean(a, mode)
    rhs = qa.largest_eigenvalue(rho)
    sigma = combined_sigma(stats_eval, a, stats_assembly, a, mode)
    return EqualityCheck("lustrated-fidelity=lambda_max", mode, lhs, rhs, sigma)


def equality_checks(stats_assembly, stats_eval, mode):
    return [
        purity_equality(stats_assembly, stats_eval, mode),
        entropy_equality(stats_assembly, stats_eval, mode),
        lustrated_equality(stats_assembly, stats_eval, mode),
    ]


@dataclass
class BoundReport:
    """Per-step quantities of the lustrated-risk bound chains.

    Conditioned-state risks are closed forms of the conditioned state;
    lustrated risks are Monte Carlo averages over the evaluation ensemble.
    ``margins`` maps each inequality to ``larger - smaller`` per step and
    ``sigmas`` to its standard error.
    """

    mode: str
    trsd_conditioned: np.ndarray
    trsd_lustrated: np.ndarray
    li_conditioned: np.ndarray
    li_lustrated: np.ndarray
    margins: dict = field(default_factory=dict)
    sigmas: dict = field(default_factory=dict)
    k_sigma: float = 3.0

    @property
    def trsd_upper(self):
        return 2.0 * self.trsd_conditioned

    @property
    def li_lower(self):
        return 0.5 * self.li_conditioned

    def violations(self):
        """``{inequality: step indices}`` where the margin falls below -k sigma."""
        out = {}
        for name, margin in self.margins.items():
            tol = self.k_sigma * self.sigmas[name] + NUMERIC_ATOL
            bad = np.flatnonzero(~(margin >= -tol))
            if bad.size:
                out[name] = bad
        return out

    @property
    def passed(self):
        return not self.violations()

    def summary(self):
        parts = []
        for name, margin in self.margins.items():
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(self.sigmas[name] > 0, margin / self.sigmas[name], np.inf)
            z = np.where(np.abs(margin) <= NUMERIC_ATOL, np.inf, z)
            parts.append(f"{name}: min margin {np.min(margin):.3e} (min z {np.min(z):.2f})")
        return f"bounds[{self.mode}]: " + "; ".join(parts)


def check_bounds(conditioned, lustrated, ensemble, mode, assembly=None):
    """Evaluate both bound chains for the lustrated estimator at every step.

    ``ensemble`` is the evaluation ensemble; ``assembly`` (optional) the
    ensemble that produced ``conditioned``, whose noise enters the sigmas.
    """
    stats = _stats(ensemble)
    asm = _stats(assembly) if assembly is not None else None
    conditioned = np.asarray(conditioned, dtype=complex)
    lustrated = np.asarray(lustrated, dtype=complex)

    p_cond = qa.purity(conditioned)
    trsd_c = 1.0 - p_cond
    li_c = 1.0 - p_cond
    a_trsd_l = trsd_coeffs(lustrated)
    a_li_l = fidelity_coeffs(lustrated)
    trsd_l = stats.mean(a_trsd_l, mode)
    li_l = 1.0 - stats.mean(a_li_l, mode)
    a_trsd_c_mc = trsd_coeffs(conditioned)
    trsd_c_mc = stats.mean(a_trsd_c_mc, mode)

    a_cond = fidelity_coeffs(conditioned)
    margins = {
        "TrSD lower": trsd_l - trsd_c,
        "TrSD upper": 2.0 * trsd_c - trsd_l,
        "LI lower": li_l - 0.5 * li_c,
        "LI upper": li_c - li_l,
        "TrSD conditioned <= 1": 1.0 - trsd_c,
        "TrSD conditioned (MC) <= 1": 1.0 - trsd_c_mc,
    }
    sigmas = {
        "TrSD lower": combined_sigma(stats, a_trsd_l, asm, 2.0 * a_cond, mode),
        "TrSD upper": combined_sigma(stats, a_trsd_l, asm, 4.0 * a_cond, mode),
        "LI lower": combined_sigma(stats, a_li_l, asm, a_cond, mode),
        "LI upper": combined_sigma(stats, a_li_l, asm, 2.0 * a_cond, mode),
        "TrSD conditioned <= 1": np.zeros_like(trsd_c),
        "TrSD conditioned (MC) <= 1": stats.stderr(a_trsd_c_mc, mode),
    }
    return BoundReport(mode, trsd_c, trsd_l, li_c, li_l, margins, sigmas)


@dataclass
class ProbeResult:
    n_probes: int
    violations: dict
    min_excess: dict

    @property
    def passed(self):
        return all(v == 0 for v in self.violations.values())


def random_perturbation(rho, rng, min_size=1e-3):
    """A valid state ``rho + O`` with traceless Hermitian ``O != 0``.

    The Bloch vector is displaced in a random direction by a random fraction
    of the distance to the Bloch-sphere surface along that direction.
    """
    r = qa.bloch_vector(rho)
    while True:
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        # largest t with |r + t u| <= 1
        ru = r @ u
        t_max = -ru + np.sqrt(max(ru * ru - (r @ r - 1.0), 0.0))
        t = rng.uniform(0.0, 1.0) * t_max
        if t >= min_size:
            return qa.from_bloch(r + t * u)


def suboptimality_probe(stats_assembly, mode, n_probes=100, seed=0):
    """Random valid perturbations never beat the optimal estimators.

    Risks are evaluated on the assembly ensemble, whose mean state is the
    conditioned state itself, so the TrSD/RE comparisons reduce exactly to
    the conditioned-state forms.  LI uses ``1 - Tr[rho' rho_Xi]``.
    """
    rng = np.random.default_rng(seed)
    conditioned = stats_assembly.mean_state(mode)
    n = conditioned.shape[0]
    steps = rng.integers(1, n, size=n_probes)
    perturbed = np.array([random_perturbation(conditioned[k], rng) for k in steps])
    base = conditioned[steps]

    def at_steps(cost, est):
        full = conditioned.copy()
        full[steps] = est
        return risk(cost, full, stats_assembly, mode, conditioned=conditioned).values[steps]

    excess = {
        "TrSD": at_steps("TrSD", perturbed) - at_steps("TrSD", base),
        "RE": at_steps("RE", perturbed) - at_steps("RE", base),
        "LI": at_steps("LI", perturbed) - at_steps("LI", qa.lustrate(base)),
    }
    violations = {
        "TrSD": int(np.sum(~(excess["TrSD"] > 0))),
        "RE": int(np.sum(~(excess["RE"] > 0))),
        "LI": int(np.sum(~(excess["LI"] >= -1e-12))),
    }
    with np.errstate(invalid="ignore"):
        min_excess = {k: float(np.min(v)) for k, v in excess.items()}
    return ProbeResult(n_probes, violations, min_excess)
