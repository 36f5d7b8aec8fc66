import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsmooth import algebra as qa
from qsmooth import estimation as est
from qsmooth.stats import reference_shift, stats_from_samples

from . import oracle


def _ensemble(seed, n=50, k=1, pure=True, spread=1.0):
    """Stats of ``n`` random true states per step with random weights."""
    rng = np.random.default_rng(seed)
    r = rng.normal(size=(n, k, 3))
    r /= np.linalg.norm(r, axis=-1, keepdims=True)
    if spread < 1.0:
        r = r * spread + np.array([0.0, 0.0, 1.0 - spread])
        r /= np.linalg.norm(r, axis=-1, keepdims=True)
    if not pure:
        r *= rng.uniform(0.2, 1.0, size=(n, k, 1))
    states = qa.from_bloch(r)
    weights = rng.exponential(size=(2, n, k))
    shift = reference_shift(np.einsum("nk,nkab->kab", weights[0], states) / weights[0].sum(axis=0)[:, None, None])
    return stats_from_samples(weights, states, shift=shift), weights, states


def test_closed_form_on_maximally_mixed():
    rho = qa.MAXIMALLY_MIXED[None]
    assert est.closed_form_risk("TrSD", rho).values[0] == pytest.approx(0.5)
    assert est.closed_form_risk("RE", rho).values[0] == pytest.approx(1.0)
    assert est.closed_form_risk("LI", rho).values[0] == pytest.approx(0.5)


def test_unknown_cost():
    with pytest.raises(ValueError):
        est.closed_form_risk("KL", qa.GROUND[None])


def test_optimal_estimators():
    rho = qa.from_bloch([0.1, 0.5, -0.2])[None]
    np.testing.assert_array_equal(est.optimal_estimator("TrSD", rho), rho)
    np.testing.assert_array_equal(est.optimal_estimator("RE", rho), rho)
    np.testing.assert_allclose(est.optimal_estimator("LI", rho), qa.lustrate(rho))


def test_singleton_ensemble_risks():
    truth = qa.from_bloch([0.0, 0.6, 0.8])
    s = stats_from_samples(np.ones((2, 1, 1)), truth[None, None])
    guess = qa.from_bloch([0.3, 0.1, 0.2])[None]
    r_trsd = est.risk("TrSD", guess, s, "filtered")
    assert r_trsd.values[0] == pytest.approx(qa.trsd(guess[0], truth), abs=1e-12)
    r_re = est.risk("RE", guess, s, "filtered")
    assert r_re.values[0] == pytest.approx(oracle.relative_entropy(truth, guess[0]), abs=1e-10)
    r_li = est.risk("LI", guess, s, "smoothed")
    assert r_li.values[0] == pytest.approx(1 - qa.linear_fidelity(guess[0], truth), abs=1e-12)
    assert r_li.cost == "LI" and r_li.sigma[0] == 0


def test_re_risk_matches_logm_oracle():
    s, weights, states = _ensemble(2, n=40, pure=False)
    guess = qa.from_bloch([0.2, -0.3, 0.1])
    got = est.risk("RE", guess[None], s, "smoothed").values[0]
    each = np.array([oracle.relative_entropy(rho, guess) for rho in states[:, 0]])
    expect = np.sum(weights[1, :, 0] * each) / weights[1, :, 0].sum()
    assert got == pytest.approx(expect, abs=1e-9)


def test_re_support_mismatch_is_infinite():
    states = np.array([qa.GROUND, qa.EXCITED])[:, None]
    s = stats_from_samples(np.ones((2, 2, 1)), states)
    assert est.risk("RE", qa.GROUND[None], s, "filtered").values[0] == np.inf
    ok = stats_from_samples(np.ones((2, 1, 1)), qa.GROUND[None, None])
    assert est.risk("RE", qa.GROUND[None], ok, "filtered").values[0] == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_equalities_are_exact_on_the_assembling_ensemble(seed):
    # with pure true states and evaluation = assembly the three identities hold exactly
    s, _, _ = _ensemble(seed, n=30, k=2)
    for check in est.equality_checks(s, s, "smoothed"):
        assert np.max(np.abs(check.gap)) <= 1e-12, check.name


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 0.3, 0.02]))
def test_bound_chains_hold_for_any_pure_ensemble(seed, spread):
    s, _, _ = _ensemble(seed, n=25, k=2, spread=spread)
    for mode in ("filtered", "smoothed"):
        rho = s.mean_state(mode)
        report = est.check_bounds(rho, qa.lustrate(rho), s, mode)
        for name, margin in report.margins.items():
            assert np.all(margin >= -1e-12), name


def test_trsd_decomposition_of_risk():
    s, weights, states = _ensemble(4, n=60, pure=False)
    guess = qa.from_bloch([0.4, 0.0, -0.4])
    got = est.risk("TrSD", guess[None], s, "filtered").values[0]
    direct = np.sum(weights[0, :, 0] * qa.trsd(guess[None], states[:, 0])) / weights[0, :, 0].sum()
    assert got == pytest.approx(direct, abs=1e-12)


def test_li_risk_is_linear():
    s, weights, states = _ensemble(5, n=60)
    guess = qa.from_bloch([0.0, 0.7, 0.1])
    got = est.risk("LI", guess[None], s, "smoothed").values[0]
    direct = 1 - np.sum(weights[1, :, 0] * qa.linear_fidelity(guess[None], states[:, 0])) / weights[1, :, 0].sum()
    assert got == pytest.approx(direct, abs=1e-12)


def test_equality_check_logic():
    sigma = np.array([1e-3, 0.0, 1e-3])
    ok = est.EqualityCheck("x", "filtered", np.array([0.0, 5e-11, 2e-3]), np.zeros(3), sigma)
    assert ok.passed and ok.violations.size == 0
    bad = est.EqualityCheck("x", "filtered", np.array([0.0, 1e-9, 4e-3]), np.zeros(3), sigma)
    np.testing.assert_array_equal(bad.violations, [1, 2])
    assert not bad.passed
    assert "first violation at step 1" in bad.summary()
    wide = est.EqualityCheck("x", "filtered", np.full(3, 0.02), np.zeros(3), np.ones(3))
    assert not wide.passed  # within 3 sigma but the mean gap exceeds 0.01
    inf = est.EqualityCheck("x", "filtered", np.array([np.inf, 0, 0]), np.zeros(3), sigma)
    np.testing.assert_array_equal(inf.violations, [0])


def test_bound_report_flags_violations():
    s, _, _ = _ensemble(8, n=30)
    rho = s.mean_state("filtered")
    wrong = np.array([qa.MAXIMALLY_MIXED])  # not the lustration
    report = est.check_bounds(rho, wrong, s, "filtered")
    assert not report.passed
    assert "LI upper" in report.violations()


def test_random_perturbation_is_valid():
    rng = np.random.default_rng(0)
    for r in ([0, 0, 0], [0, 0, 1], [0.5, 0.5, 0.5]):
        rho = qa.from_bloch(r)
        for _ in range(20):
            p = est.random_perturbation(rho, rng)
            qa.as_state(p)
            assert np.linalg.norm(qa.bloch_vector(p) - qa.bloch_vector(rho)) >= 1e-3


def test_probe_on_random_ensemble():
    s, _, _ = _ensemble(9, n=200, k=5, pure=False)
    for mode in ("filtered", "smoothed"):
        res = est.suboptimality_probe(s, mode, n_probes=100, seed=3)
        assert res.passed, res.violations
