import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qsmooth import algebra as qa
from qsmooth.errors import EstimationError
from qsmooth.stats import (
    ACC_WIDTH,
    ONE,
    PURITY,
    XLOGX,
    EnsembleStats,
    features,
    linear_coeffs,
    reference_shift,
    stats_from_samples,
    xlogx_term,
)

from .strategies import bloch_states


def _samples(seed, n=400, k=3, spread=0.05):
    rng = np.random.default_rng(seed)
    centre = rng.normal(size=(k, 3))
    centre *= 0.6 / np.linalg.norm(centre, axis=1, keepdims=True)
    r = centre[None] + spread * rng.normal(size=(n, k, 3))
    r /= np.maximum(1.0, np.linalg.norm(r, axis=-1, keepdims=True))
    states = qa.from_bloch(r)
    weights = rng.exponential(size=(2, n, k))
    return weights, states


def _explicit(weights, f):
    """Ratio estimator and its delta-method standard error, two-pass."""
    s = weights.sum(axis=0)
    mu = np.sum(weights * f, axis=0) / s
    se = np.sqrt(np.sum(weights**2 * (f - mu) ** 2, axis=0)) / s
    return mu, se


def test_features_of_known_states():
    np.testing.assert_allclose(features(qa.GROUND), [1, 0, 0, 1, 1, 0], atol=1e-15)
    np.testing.assert_allclose(features(qa.MAXIMALLY_MIXED), [1, 0, 0, 0, 0.5, -1], atol=1e-15)


def test_xlogx_matches_entropy():
    rho = np.diag([0.75, 0.25])
    assert xlogx_term(qa.purity(rho)) == pytest.approx(-qa.von_neumann_entropy(rho), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(bloch_states(), bloch_states())
def test_linear_coeffs_reproduce_fidelity(a, rho):
    got = linear_coeffs(a) @ features(rho)
    assert got == pytest.approx(qa.linear_fidelity(a, rho), abs=1e-12)


@pytest.mark.parametrize("centred", [False, True])
def test_mean_and_stderr_match_two_pass_formula(centred):
    weights, states = _samples(3)
    shift = reference_shift(states.mean(axis=0)) if centred else None
    s = stats_from_samples(weights, states, shift=shift)
    est = qa.from_bloch([0.2, -0.1, 0.4])
    coeffs = np.broadcast_to(2 * linear_coeffs(est) - PURITY, (3, 6))
    f = 2 * qa.linear_fidelity(est[None, None], states) - qa.purity(states)
    for m, mode in enumerate(("filtered", "smoothed")):
        mu, se = _explicit(weights[m], f)
        np.testing.assert_allclose(s.mean(coeffs, mode), mu, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(s.stderr(coeffs, mode), se, rtol=1e-9)
        raw = np.mean(weights[m] * f, axis=0)
        raw_se = np.std(weights[m] * f, axis=0, ddof=0) / np.sqrt(weights.shape[1])
        np.testing.assert_allclose(s.mean(coeffs, mode, normalize=False), raw, rtol=1e-12)
        np.testing.assert_allclose(s.stderr(coeffs, mode, normalize=False), raw_se, rtol=1e-8)


def test_centring_rescues_tight_clusters():
    # entropy-like costs of nearly pure states: uncentred one-pass moments
    # lose the spread entirely, centred ones keep it
    weights, states = _samples(5, n=2000, spread=1e-5)
    weights[:] = 1.0
    states = qa.normalize(states)
    shift = reference_shift(states.mean(axis=0))
    s = stats_from_samples(weights, states, shift=shift)
    f = qa.purity(states)
    _, se = _explicit(weights[0], f)
    assert np.all(se > 0)
    np.testing.assert_allclose(s.stderr(PURITY, "filtered"), se, rtol=1e-4)


def test_mean_state_and_weights():
    weights, states = _samples(7)
    s = stats_from_samples(weights, states)
    direct = np.einsum("nk,nkab->kab", weights[1], states) / weights[1].sum(axis=0)[:, None, None]
    np.testing.assert_allclose(s.mean_state("smoothed"), direct, atol=1e-14)
    np.testing.assert_allclose(s.weight_mean("filtered"), weights[0].mean(axis=0))
    np.testing.assert_allclose(s.weight_stderr("filtered"),
                               weights[0].std(axis=0) / np.sqrt(weights.shape[1]), rtol=1e-10)
    assert s.acc.shape == (3, 2, ACC_WIDTH)


def test_merge_equals_concatenation():
    weights, states = _samples(11, n=300)
    a = stats_from_samples(weights[:, :100], states[:100])
    b = stats_from_samples(weights[:, 100:], states[100:])
    whole = stats_from_samples(weights, states)
    m = a.merged(b)
    assert m.n_total == 300
    np.testing.assert_allclose(m.acc, whole.acc, rtol=1e-12)
    with pytest.raises(ValueError):
        a.merged(stats_from_samples(weights, states, shift=np.ones((3, 6))))


def test_zero_weights_raise():
    weights, states = _samples(1, n=10)
    weights[:, :, 1] = 0.0
    s = stats_from_samples(weights, states)
    with pytest.raises(EstimationError) as exc:
        s.mean(ONE, "filtered")
    assert exc.value.step == 1


def test_shift_shape_validated():
    with pytest.raises(ValueError):
        EnsembleStats(np.zeros((3, 2, ACC_WIDTH)), 1, np.zeros(3), 1.0, 0.0, shift=np.zeros((2, 6)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weighted_mean_of_constant_is_constant(seed):
    weights, states = _samples(seed, n=20, k=2)
    s = stats_from_samples(weights, states, shift=reference_shift(states[0]))
    np.testing.assert_allclose(s.mean(3.5 * ONE, "smoothed"), 3.5, rtol=1e-12)
    assert np.all(s.stderr(3.5 * ONE, "smoothed") == 0)
    assert np.all(s.mean(XLOGX, "filtered") <= 1e-12)
