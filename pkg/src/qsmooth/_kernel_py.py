"""Pure numpy implementation of the true-state ensemble kernel.

Vectorised over the trajectories of a chunk, looping over time steps.

Arguments of :func:`propagate_chunk`
------------------------------------
kraus : complex (n_steps, 2, 2, 2)
    ``kraus[k, dN]`` is the composed one-step operator ``U_H M_dJ[k] M_dN``
    with the ostensibly rescaled jump operator.
dn : uint8 (n_traj, n_steps)
    Unobserved jump flags, one row per trajectory.
logtr_f : float (n_steps + 1,)
    Log-trace of the unnormalised filtered state.
effect : float (n_steps + 1, 4)
    Trace-normalised retrofiltered effect as ``(E00, E11, Re E01, Im E01)``.
den : float (n_steps + 1,)
    ``Tr[rho_F[k] E[k]]`` for the normalised filtered state and effect.
shift : float (n_steps + 1, 6)
    Per-step reference subtracted from the features before accumulation
    (entry 0 must be zero).  Centring keeps the second moments well
    conditioned when the ensemble is nearly degenerate.
acc : float (n_steps + 1, 2, 27)
    Moment accumulators (added to in place).
dead : int64 (n_steps + 1,)
    Count of trajectories already flagged dead at each step (added to).
diag : float (2,)
    Running minima of purity and of the smallest eigenvalue (updated).
"""

import numpy as np

from .stats import ACC_WIDTH, N_FEATURES, PURE_THRESHOLD

TRACE_FLOOR = 1e-300
_IU = np.triu_indices(N_FEATURES)


def _features(a, d, b):
    g = a * a + d * d + 2.0 * (b.real ** 2 + b.imag ** 2)
    r = np.sqrt(np.clip(2.0 * g - 1.0, 0.0, 1.0))
    l1 = 0.5 * (1.0 + r)
    l2 = 0.5 * (1.0 - r)
    impure = g <= PURE_THRESHOLD
    h = np.zeros_like(g)
    if impure.any():
        li1, li2 = l1[impure], l2[impure]
        hi = li1 * np.log2(li1)
        pos = li2 > 0
        hi[pos] += li2[pos] * np.log2(li2[pos])
        h[impure] = hi
    v = np.empty((a.size, N_FEATURES))
    v[:, 0] = 1.0
    v[:, 1] = 2.0 * b.real
    v[:, 2] = -2.0 * b.imag
    v[:, 3] = a - d
    v[:, 4] = g
    v[:, 5] = h
    return v, g


def _observe(k, a, d, b, logtr, alive, logtr_f, effect, den, shift, acc, diag):
    if not alive.any():
        return
    a, d, b, logtr = a[alive], d[alive], b[alive], logtr[alive]
    v, g = _features(a, d, b)
    v -= shift[k]
    diag[0] = min(diag[0], g.min())
    lam_min = 0.5 * (a + d) - np.hypot(0.5 * (a - d), np.abs(b))
    diag[1] = min(diag[1], lam_min.min())
    w_f = np.exp(logtr - logtr_f[k])
    e = effect[k]
    tre = a * e[0] + d * e[1] + 2.0 * (b.real * e[2] + b.imag * e[3])
    w_s = w_f * tre / den[k]
    for mode, w in enumerate((w_f, w_s)):
        acc[k, mode, :N_FEATURES] += w @ v
        wv = (w * w)[:, None] * v
        acc[k, mode, N_FEATURES:] += (wv.T @ v)[_IU]


def propagate_chunk(kraus, dn, logtr_f, effect, den, shift, acc, dead, diag):
    n_traj, n_steps = dn.shape
    if (kraus.shape[0] != n_steps or acc.shape != (n_steps + 1, 2, ACC_WIDTH)
            or shift.shape != (n_steps + 1, N_FEATURES)):
        raise ValueError("inconsistent step counts")
    a = np.ones(n_traj)
    d = np.zeros(n_traj)
    b = np.zeros(n_traj, dtype=complex)
    logtr = np.zeros(n_traj)
    alive = np.ones(n_traj, dtype=bool)
    _observe(0, a, d, b, logtr, alive, logtr_f, effect, den, shift, acc, diag)
    for k in range(n_steps):
        ops = kraus[k][dn[:, k]]  # (n, 2, 2)
        p, q, r, s = ops[:, 0, 0], ops[:, 0, 1], ops[:, 1, 0], ops[:, 1, 1]
        bc = np.conj(b)
        t00 = p * a + q * bc
        t01 = p * b + q * d
        t10 = r * a + s * bc
        t11 = r * b + s * d
        na = (t00 * np.conj(p) + t01 * np.conj(q)).real
        nd = (t10 * np.conj(r) + t11 * np.conj(s)).real
        nb = t00 * np.conj(r) + t01 * np.conj(s)
        t = na + nd
        with np.errstate(invalid="ignore"):
            dying = alive & ~(t > TRACE_FLOOR)
        alive &= ~dying
        dead[k + 1:] += int(dying.sum())
        safe_t = np.where(alive, t, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            logtr = np.where(alive, logtr + np.log(safe_t), logtr)
        a = np.where(alive, na / safe_t, a)
        d = np.where(alive, nd / safe_t, d)
        b = np.where(alive, nb / safe_t, b)
        _observe(k + 1, a, d, b, logtr, alive, logtr_f, effect, den, shift, acc, diag)
