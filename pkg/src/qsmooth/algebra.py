"""Closed-form 2x2 linear algebra and qubit state measures.

Every function accepts a single ``(2, 2)`` complex array or a stack of
shape ``(..., 2, 2)`` and broadcasts over the leading axes.  Scalar inputs
return Python-float-compatible numpy scalars.

Basis convention: index 0 is the ground state ``|0>``, index 1 the excited
state ``|1>``.  Bloch components follow
``rho = (I + x X + y Y + z Z) / 2`` so the ground state sits at ``z = +1``.
"""

from typing import NamedTuple

import numpy as np

from .errors import DriftError, InvalidStateError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
DRIFT_TOL = 1e-8
DEGENERATE_TOL = 1e-14
EPS_SUPPORT = 1e-12
PHASE_TOL = 1e-12

IDENTITY = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# lowering operator: |1> -> |0>
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)

GROUND = np.array([[1, 0], [0, 0]], dtype=complex)
EXCITED = np.array([[0, 0], [0, 1]], dtype=complex)
MAXIMALLY_MIXED = IDENTITY / 2


class EigenPair2(NamedTuple):
    """Ordered eigen-decomposition of a Hermitian 2x2 matrix.

    ``values[..., 0] >= values[..., 1]``; ``vectors[..., :, i]`` is the
    eigenvector for ``values[..., i]``.
    """

    values: np.ndarray
    vectors: np.ndarray

    @property
    def v1(self):
        return self.vectors[..., :, 0]

    @property
    def v2(self):
        return self.vectors[..., :, 1]


def dagger(a):
    return np.conj(np.swapaxes(a, -1, -2))


def trace(a):
    return a[..., 0, 0] + a[..., 1, 1]


def _as_matrix(a):
    a = np.asarray(a, dtype=complex)
    if a.shape[-2:] != (2, 2):
        raise InvalidStateError(f"expected trailing shape (2, 2), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidStateError("matrix has non-finite entries")
    return a


def hermitian_deviation(a):
    """Max-abs entry of ``a - a^dagger``."""
    a = np.asarray(a, dtype=complex)
    return np.max(np.abs(a - dagger(a)), axis=(-2, -1))


def hermitize(a, tol=DRIFT_TOL):
    """Return ``(a + a^dagger)/2``; raise DriftError if the drift exceeds ``tol``."""
    a = _as_matrix(a)
    drift = np.max(hermitian_deviation(a))
    if drift > tol:
        raise DriftError(f"anti-Hermitian drift {drift:.3e} exceeds {tol:.1e}")
    return 0.5 * (a + dagger(a))


def min_eigenvalue(a):
    """Smallest eigenvalue of a Hermitian matrix (closed form)."""
    a = np.asarray(a, dtype=complex)
    half_tr = 0.5 * (a[..., 0, 0].real + a[..., 1, 1].real)
    half_diff = 0.5 * (a[..., 0, 0].real - a[..., 1, 1].real)
    radius = np.hypot(half_diff, np.abs(a[..., 0, 1]))
    return half_tr - radius


def _check_hermitian_psd(a, kind):
    dev = np.max(hermitian_deviation(a))
    if dev > HERMITIAN_TOL:
        raise InvalidStateError(f"{kind} not Hermitian (deviation {dev:.3e})")
    lam = np.min(min_eigenvalue(a))
    if lam < PSD_TOL:
        raise InvalidStateError(f"{kind} not positive semidefinite (eigenvalue {lam:.3e})")


def as_state(a):
    """Validate a (stack of) density matrix and return it as a complex array.

    Raises InvalidStateError on non-Hermitian, non-unit-trace or non-PSD input.
    """
    a = _as_matrix(a)
    _check_hermitian_psd(a, "state")
    tr_err = np.max(np.abs(trace(a) - 1.0))
    if tr_err > TRACE_TOL:
        raise InvalidStateError(f"state trace deviates from 1 by {tr_err:.3e}")
    return a


def as_unnormalized(a):
    a = _as_matrix(a)
    _check_hermitian_psd(a, "unnormalized state")
    if np.any(trace(a).real <= 0):
        raise InvalidStateError("unnormalized state must have positive trace")
    return a


def as_effect(a):
    a = _as_matrix(a)
    _check_hermitian_psd(a, "effect")
    return a


def normalize(a):
    return a / trace(a).real[..., None, None]


def purity(rho):
    """Tr[rho^2]."""
    rho = np.asarray(rho, dtype=complex)
    return np.sum(np.abs(rho) ** 2, axis=(-2, -1))


def linear_fidelity(a, b):
    """Tr[a b] for Hermitian a, b (real part; the imaginary part vanishes)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    return np.einsum("...ij,...ji->...", a, b).real


def trsd(a, b):
    """Trace-square deviation Tr[(a - b)^2]."""
    return purity(np.asarray(a, dtype=complex) - np.asarray(b, dtype=complex))


def bloch_vector(rho):
    rho = np.asarray(rho, dtype=complex)
    x = 2.0 * rho[..., 0, 1].real
    y = -2.0 * rho[..., 0, 1].imag
    z = (rho[..., 0, 0] - rho[..., 1, 1]).real
    return np.stack([x, y, z], axis=-1)


def from_bloch(r):
    """Density matrix from Bloch vector(s) of shape (..., 3)."""
    r = np.asarray(r, dtype=float)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    out = np.empty(r.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = 0.5 * (1 + z)
    out[..., 1, 1] = 0.5 * (1 - z)
    out[..., 0, 1] = 0.5 * (x - 1j * y)
    out[..., 1, 0] = 0.5 * (x + 1j * y)
    return out


def _fix_phase(v):
    """Make the first component with modulus above PHASE_TOL real-positive."""
    first = np.where(np.abs(v[..., 0]) > PHASE_TOL, v[..., 0], v[..., 1])
    mag = np.abs(first)
    phase = np.where(mag > 0, np.conj(first) / np.where(mag > 0, mag, 1.0), 1.0)
    return v * phase[..., None]


def eig2(a):
    """Closed-form eigenpairs of a Hermitian 2x2 matrix (or stack).

    Eigenvalues come from trace and determinant, ordered descending.  For a
    degenerate spectrum (gap below 1e-14) the canonical basis is returned.
    Each eigenvector has its first non-negligible component real-positive.
    """
    a = _as_matrix(a)
    if np.max(hermitian_deviation(a)) > 1e-10:
        raise InvalidStateError("eig2 requires a Hermitian matrix")
    p = a[..., 0, 0].real
    q = a[..., 1, 1].real
    b = 0.5 * (a[..., 0, 1] + np.conj(a[..., 1, 0]))
    mean = 0.5 * (p + q)
    radius = np.hypot(0.5 * (p - q), np.abs(b))
    lam1 = mean + radius
    lam2 = mean - radius

    # two algebraically equivalent candidates; keep the better-conditioned one
    cand_a = np.stack([b, lam1 - p + 0j], axis=-1)
    cand_b = np.stack([lam1 - q + 0j, np.conj(b)], axis=-1)
    norm_a = np.linalg.norm(cand_a, axis=-1)
    norm_b = np.linalg.norm(cand_b, axis=-1)
    use_a = norm_a >= norm_b
    v1 = np.where(use_a[..., None], cand_a, cand_b)
    norm = np.where(use_a, norm_a, norm_b)

    degenerate = (lam1 - lam2) < DEGENERATE_TOL
    safe = np.where(degenerate | (norm == 0), 1.0, norm)
    v1 = v1 / safe[..., None]
    v1 = np.where(degenerate[..., None], np.array([1.0 + 0j, 0.0 + 0j]), v1)
    v1 = _fix_phase(v1)
    v2 = np.stack([-np.conj(v1[..., 1]), np.conj(v1[..., 0])], axis=-1)
    v2 = _fix_phase(v2)

    values = np.stack([lam1, lam2], axis=-1)
    vectors = np.stack([v1, v2], axis=-1)
    return EigenPair2(values, vectors)


def largest_eigenvalue(rho):
    return eig2(rho).values[..., 0]


def lustrate(rho):
    """Projector onto the eigenvector of the largest eigenvalue of ``rho``."""
    v = eig2(rho).v1
    return np.einsum("...i,...j->...ij", v, np.conj(v))


def _xlog2x(lam):
    lam = np.asarray(lam, dtype=float)
    pos = lam > 0
    out = np.zeros_like(lam)
    out[pos] = lam[pos] * np.log2(lam[pos])
    return out


def von_neumann_entropy(rho):
    """-sum(lambda log2 lambda) in bits, with 0 log 0 = 0."""
    lam = eig2(rho).values
    return -np.sum(_xlog2x(np.clip(lam, 0.0, None)), axis=-1)


def log2_matrix(sigma):
    """Spectral form of log2 for a PSD matrix.

    Returns ``(eigvals, eigvecs, log_eigs)``; eigenvalues below EPS_SUPPORT
    map to ``-inf``.
    """
    pair = eig2(sigma)
    lam = pair.values
    with np.errstate(divide="ignore", invalid="ignore"):
        logs = np.where(lam >= EPS_SUPPORT, np.log2(np.where(lam > 0, lam, 1.0)), -np.inf)
    return pair.values, pair.vectors, logs


def cross_log_term(rho, sigma):
    """Tr[rho log2 sigma] in sigma's eigenbasis; -inf on support mismatch."""
    _, vecs, logs = log2_matrix(sigma)
    # weights <s_i| rho |s_i>
    weights = np.einsum("...ai,...ab,...bi->...i", np.conj(vecs), np.asarray(rho, dtype=complex), vecs).real
    mismatch = np.isinf(logs) & (weights > EPS_SUPPORT)
    finite_logs = np.where(np.isinf(logs), 0.0, logs)
    total = np.sum(weights * finite_logs, axis=-1)
    return np.where(np.any(mismatch, axis=-1), -np.inf, total)


def relative_entropy(rho, sigma):
    """S(rho || sigma) = Tr[rho log2 rho] - Tr[rho log2 sigma] in bits.

    Returns +inf when the support of rho is not contained in that of sigma.
    """
    neg_entropy = -von_neumann_entropy(rho)
    cross = cross_log_term(rho, sigma)
    out = neg_entropy - cross
    # round-off can leave tiny negatives for identical arguments
    return np.where(np.isinf(out), out, np.maximum(out, 0.0))
