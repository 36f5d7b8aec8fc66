"""Weighted per-step sufficient statistics of a true-state ensemble.

Each true state contributes the feature vector

    v = (1, x, y, z, Tr[rho^2], Tr[rho log2 rho])

(Bloch components plus two nonlinear scalars).  Every cost evaluated in this
package is an affine function ``a . v`` of these features once the estimate
is fixed, so the weighted sums ``sum w v`` and ``sum w^2 v v^T`` give exact
ensemble means and their delta-method standard errors without storing any
trajectory.
"""

from dataclasses import dataclass

import numpy as np

from . import algebra as qa
from .errors import EstimationError

N_FEATURES = 6
N_PAIRS = N_FEATURES * (N_FEATURES + 1) // 2
ACC_WIDTH = N_FEATURES + N_PAIRS
MODES = ("filtered", "smoothed")

ONE = np.eye(N_FEATURES)[0]
PURITY = np.eye(N_FEATURES)[4]
XLOGX = np.eye(N_FEATURES)[5]

# purity above which Tr[rho log rho] is taken as exactly zero
PURE_THRESHOLD = 1.0 - 1e-6

_IU = np.triu_indices(N_FEATURES)


def mode_index(mode):
    try:
        return MODES.index(mode)
    except ValueError:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}") from None


def xlogx_term(g):
    """Tr[rho log2 rho] of a qubit with purity ``g`` (zero above PURE_THRESHOLD)."""
    g = np.asarray(g, dtype=float)
    r = np.sqrt(np.clip(2.0 * g - 1.0, 0.0, 1.0))
    lam1 = 0.5 * (1 + r)
    lam2 = 0.5 * (1 - r)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = lam1 * np.log2(lam1) + np.where(lam2 > 0, lam2 * np.log2(np.where(lam2 > 0, lam2, 1.0)), 0.0)
    return np.where(g > PURE_THRESHOLD, 0.0, h)


def features(rho):
    """Feature vectors of state(s) ``rho`` with shape (..., 6)."""
    rho = np.asarray(rho, dtype=complex)
    r = qa.bloch_vector(rho)
    g = qa.purity(rho)
    one = np.ones(g.shape)
    return np.concatenate([one[..., None], r, g[..., None], xlogx_term(g)[..., None]], axis=-1)


def linear_coeffs(a):
    """Coefficients of ``Tr[a rho]`` for Hermitian ``a`` of shape (..., 2, 2)."""
    a = np.asarray(a, dtype=complex)
    out = np.zeros(a.shape[:-2] + (N_FEATURES,))
    out[..., 0] = 0.5 * qa.trace(a).real
    out[..., 1] = 0.5 * qa.linear_fidelity(a, qa.SIGMA_X)
    out[..., 2] = 0.5 * qa.linear_fidelity(a, qa.SIGMA_Y)
    out[..., 3] = 0.5 * qa.linear_fidelity(a, qa.SIGMA_Z)
    return out


def reference_shift(rho):
    """Feature centring for true states scattered around ``rho``.

    Bloch entries follow ``rho``; purity and ``Tr[rho log2 rho]`` are set to
    their pure-state values 1 and 0.  Entry 0 stays zero.
    """
    r = qa.bloch_vector(np.asarray(rho, dtype=complex))
    shift = np.zeros(r.shape[:-1] + (N_FEATURES,))
    shift[..., 1:4] = r
    shift[..., 4] = 1.0
    return shift


def unpack_second_moments(packed):
    packed = np.asarray(packed)
    full = np.zeros(packed.shape[:-1] + (N_FEATURES, N_FEATURES))
    full[..., _IU[0], _IU[1]] = packed
    full[..., _IU[1], _IU[0]] = packed
    return full


@dataclass
class EnsembleStats:
    """Weighted moments per grid step for both conditioning modes.

    ``acc`` has shape ``(n_steps + 1, 2, ACC_WIDTH)``: for each step and mode
    the first six entries are ``sum w u`` and the rest the packed upper
    triangle of ``sum w^2 u u^T``, where ``u = v - shift[k]`` are features
    centred on a per-step reference.  Weights of dead trajectories are zero.
    """

    acc: np.ndarray
    n_total: int
    dead: np.ndarray
    min_purity: float
    min_eigenvalue: float
    index_start: int = 0
    shift: np.ndarray = None

    def __post_init__(self):
        if self.shift is None:
            self.shift = np.zeros((self.acc.shape[0], N_FEATURES))
        if self.shift.shape != (self.acc.shape[0], N_FEATURES):
            raise ValueError("shift must have shape (n_steps + 1, 6)")

    @property
    def n_steps(self):
        return self.acc.shape[0] - 1

    @property
    def index_range(self):
        return range(self.index_start, self.index_start + self.n_total)

    def sum_w(self, mode):
        return self.acc[:, mode_index(mode), :N_FEATURES]

    def sum_w2(self, mode):
        return unpack_second_moments(self.acc[:, mode_index(mode), N_FEATURES:])

    def weight_sum(self, mode):
        return self.sum_w(mode)[:, 0]

    def weight_mean(self, mode):
        return self.weight_sum(mode) / self.n_total

    def weight_stderr(self, mode):
        m = self.weight_mean(mode)
        second = self.sum_w2(mode)[:, 0, 0] / self.n_total
        return np.sqrt(np.maximum(second - m * m, 0.0) / self.n_total)

    def _norm(self, mode):
        s = self.weight_sum(mode)
        bad = np.flatnonzero(~(s > 0))
        if bad.size:
            raise EstimationError("all ensemble weights vanish", step=int(bad[0]))
        return s

    def mean(self, coeffs, mode, normalize=True):
        """Ensemble average of ``coeffs . v`` per step.

        ``normalize=True`` divides by the weight sum (self-normalised);
        otherwise by the ensemble size, i.e. ``(1/N) sum w f``.
        """
        coeffs = np.broadcast_to(coeffs, (self.n_steps + 1, N_FEATURES))
        num = np.einsum("ki,ki->k", self.sum_w(mode), coeffs)
        off = np.einsum("ki,ki->k", self.shift, coeffs)
        if normalize:
            return num / self._norm(mode) + off
        return (num + self.weight_sum(mode) * off) / self.n_total

    def stderr(self, coeffs, mode, normalize=True):
        """Standard error of :meth:`mean` for the same coefficients."""
        coeffs = np.broadcast_to(coeffs, (self.n_steps + 1, N_FEATURES))
        if normalize:
            # the constant term cancels in a.v - mean; dropping it avoids
            # cancellation when it dominates
            coeffs = coeffs.copy()
            coeffs[:, 0] = 0.0
        q = self.sum_w2(mode)
        aqa = np.einsum("ki,kij,kj->k", coeffs, q, coeffs)
        aq = np.einsum("ki,ki->k", coeffs, q[:, 0, :])
        off = np.einsum("ki,ki->k", self.shift, coeffs)
        if normalize:
            s = self._norm(mode)
            # centred mean; the shift drops out of the variance
            mu = np.einsum("ki,ki->k", self.sum_w(mode), coeffs) / s
            var = aqa - 2.0 * mu * aq + mu * mu * q[:, 0, 0]
            return np.sqrt(np.maximum(var, 0.0)) / s
        n = self.n_total
        mu = self.mean(coeffs, mode, normalize=False)
        second = aqa + 2.0 * off * aq + off * off * q[:, 0, 0]
        return np.sqrt(np.maximum(second / n - mu * mu, 0.0) / n)

    def mean_bloch(self, mode):
        s = self._norm(mode)
        return self.sum_w(mode)[:, 1:4] / s[:, None] + self.shift[:, 1:4]

    def mean_state(self, mode):
        """Weighted mean true state per step (unit trace, Hermitian)."""
        return qa.from_bloch(self.mean_bloch(mode))

    def merged(self, other):
        """Combine two statistics over the same grid (order-sensitive in float)."""
        if other.acc.shape != self.acc.shape:
            raise ValueError("cannot merge statistics from different grids")
        if not np.array_equal(self.shift, other.shift):
            raise ValueError("cannot merge statistics with different centring")
        return EnsembleStats(
            acc=self.acc + other.acc,
            n_total=self.n_total + other.n_total,
            dead=self.dead + other.dead,
            min_purity=min(self.min_purity, other.min_purity),
            min_eigenvalue=min(self.min_eigenvalue, other.min_eigenvalue),
            index_start=min(self.index_start, other.index_start),
            shift=self.shift,
        )


def stats_from_samples(weights, states, alive=None, n_total=None, index_start=0, shift=None):
    """Build EnsembleStats from explicit samples.

    ``weights`` has shape ``(2, n, K)`` (mode, trajectory, step), ``states``
    shape ``(n, K, 2, 2)`` and ``alive`` (optional) shape ``(n, K)``.
    Zero-weight samples contribute nothing to the moments.  ``shift``
    (optional, shape ``(K, 6)``) centres the features as in the kernel.
    """
    weights = np.asarray(weights, dtype=float)
    n, k = weights.shape[1], weights.shape[2]
    v = features(states)  # (n, K, 6)
    shift = np.zeros((k, N_FEATURES)) if shift is None else np.asarray(shift, dtype=float)
    g_all = v[..., 4]
    v = v - shift[None]
    alive = weights[0] > 0 if alive is None else np.asarray(alive, dtype=bool)
    acc = np.zeros((k, 2, ACC_WIDTH))
    for m in range(2):
        w = weights[m]
        acc[:, m, :N_FEATURES] = np.einsum("nk,nki->ki", w, v)
        outer = np.einsum("nk,nki,nkj->kij", w * w, v, v)
        acc[:, m, N_FEATURES:] = outer[:, _IU[0], _IU[1]]
    g_alive = g_all[alive] if alive.any() else np.array([1.0])
    lam_min = qa.min_eigenvalue(np.asarray(states)[alive]) if alive.any() else np.array([0.0])
    return EnsembleStats(
        acc=acc,
        n_total=n if n_total is None else n_total,
        dead=np.sum(~alive, axis=0).astype(np.int64),
        min_purity=float(g_alive.min()),
        min_eigenvalue=float(lam_min.min()),
        index_start=index_start,
        shift=shift,
    )
