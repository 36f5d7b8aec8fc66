"""Measurement operators and one-step maps for the driven, damped qubit.

The system is driven by ``H = (omega/2) sigma_x`` and radiatively damped at
rate ``gamma``.  A fraction ``eta`` of the fluorescence is observed by
Y-homodyne detection (``c_phi = sqrt(gamma eta) e^{-i pi/2} sigma_-``); the
rest is photodetected by an unseen party (``c_N = sqrt(gamma (1-eta)) sigma_-``).

Each time step composes three completely positive maps, applied right to
left: unobserved jump part, homodyne part, Hamiltonian part.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from . import algebra as qa
from .errors import ConfigError, PropagationError

TRACE_FLOOR = 1e-300


@dataclass(frozen=True)
class ModelParams:
    """Physical and discretisation parameters (time in units of 1/gamma).

    ``mu_ost`` is the ostensible jump rate used to sample unobserved records;
    ``None`` selects ``gamma * (1 - eta) / 2``.
    """

    gamma: float = 1.0
    omega: float = 3.0
    eta: float = 0.5
    dt: float = 1e-3
    mu_ost: float = None

    def __post_init__(self):
        for name in ("gamma", "omega", "eta", "dt"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigError(f"eta must lie in [0, 1], got {self.eta}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be non-negative, got {self.gamma}")
        if self.mu_ost is None:
            object.__setattr__(self, "mu_ost", self.unobserved_rate / 2)
        mu = self.mu_ost
        if not math.isfinite(mu) or mu < 0:
            raise ConfigError(f"mu_ost must be a non-negative finite rate, got {mu}")
        if mu == 0 and self.unobserved_rate > 0:
            raise ConfigError("mu_ost must be positive when the unobserved channel is active")
        if mu * self.dt >= 1:
            raise ConfigError(f"mu_ost*dt = {mu * self.dt} must be < 1")

    @property
    def unobserved_rate(self):
        return self.gamma * (1.0 - self.eta)

    @property
    def jump_probability(self):
        """Ostensible per-step jump probability mu_ost * dt."""
        return self.mu_ost * self.dt

    @property
    def c_phi(self):
        return math.sqrt(self.gamma * self.eta) * np.exp(-0.5j * np.pi) * qa.SIGMA_MINUS

    @property
    def c_n(self):
        return math.sqrt(self.unobserved_rate) * qa.SIGMA_MINUS

    @property
    def hamiltonian(self):
        return 0.5 * self.omega * qa.SIGMA_X


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StepOperators:
    """Kraus operators for one step of size ``dt``.

    ``m0``/``m1`` are the jump operators rescaled by the ostensible
    probabilities (used for true-state propagation); ``m0_u``/``m1_u`` are
    the physical pair whose sum forms the unconditioned map.
    """

    dt: float
    u_h: np.ndarray
    c_phi: np.ndarray
    m0: np.ndarray
    m1: np.ndarray
    m0_u: np.ndarray
    m1_u: np.ndarray
    _cdc: np.ndarray = field(repr=False)

    def measurement(self, dJ):
        """Homodyne operator for increment ``dJ`` (second order in dt).

        ``I + c dJ - c^dag c dt/2 + c^2 (dJ^2 - dt)/2``; the realised dJ
        enters the last term.
        """
        c = self.c_phi
        return (
            qa.IDENTITY
            + c * dJ
            - 0.5 * self._cdc * self.dt
            + 0.5 * (c @ c) * (dJ * dJ - self.dt)
        )

    def jump(self, dN):
        return self.m1 if dN else self.m0

    @property
    def unconditioned_pair(self):
        return (self.m0_u, self.m1_u)


def build_step_operators(p):
    """Construct U_H, the homodyne factory and both jump pairs for ``p``."""
    dt = p.dt
    theta = 0.5 * p.omega * dt
    # exp(-i (omega/2) sigma_x dt)
    u_h = math.cos(theta) * qa.IDENTITY - 1j * math.sin(theta) * qa.SIGMA_X

    c_n = p.c_n
    cdc_n = qa.dagger(c_n) @ c_n
    m1_u = c_n * math.sqrt(dt)
    m0_u = qa.IDENTITY - 0.5 * cdc_n * dt - 0.125 * (cdc_n @ cdc_n) * dt * dt

    q = p.jump_probability
    if q >= 1:
        raise ConfigError(f"mu_ost*dt = {q} must be < 1")
    m1 = m1_u / math.sqrt(q) if q > 0 else np.zeros((2, 2), dtype=complex)
    m0 = m0_u / math.sqrt(1.0 - q)

    c_phi = p.c_phi
    return StepOperators(
        dt=dt,
        u_h=_frozen(u_h),
        c_phi=_frozen(c_phi),
        m0=_frozen(m0),
        m1=_frozen(m1),
        m0_u=_frozen(m0_u),
        m1_u=_frozen(m1_u),
        _cdc=_frozen(qa.dagger(c_phi) @ c_phi),
    )


def apply_kraus(m, a):
    """``m a m^dagger``, hermitized.  Raises PropagationError on vanishing trace."""
    out = qa.hermitize(m @ a @ qa.dagger(m))
    tr = qa.trace(out).real
    if not tr > 0:
        raise PropagationError(f"Kraus map produced trace {tr:.3e}")
    return out


def apply_adjoint_kraus(m, e):
    """``m^dagger e m``, hermitized."""
    return qa.hermitize(qa.dagger(m) @ e @ m)


def _unconditioned(a, ops):
    return sum(m @ a @ qa.dagger(m) for m in ops.unconditioned_pair)


def filtered_step_unnormalized(rho, dJ, ops):
    """Unnormalised filtered update: Hamiltonian . homodyne . unconditioned."""
    a = _unconditioned(rho, ops)
    with np.errstate(over="ignore", invalid="ignore"):
        m = ops.measurement(dJ)
        a = m @ a @ qa.dagger(m)
        a = ops.u_h @ a @ qa.dagger(ops.u_h)
    if not np.all(np.isfinite(a)):
        raise PropagationError(f"filtered update overflowed (dJ = {dJ:.3e})")
    return qa.hermitize(a)


def filtered_step(rho, dJ, ops):
    out = filtered_step_unnormalized(rho, dJ, ops)
    tr = qa.trace(out).real
    if not tr > TRACE_FLOOR:
        raise PropagationError(f"filtered trace {tr:.3e} vanished")
    return out / tr


def true_step(rho_t, dJ, dN, ops):
    """Unnormalised true-state update with the ostensibly rescaled jump operator.

    The trace is left to accumulate the record likelihood ratio.  A jump from
    a state with no excited population raises PropagationError.
    """
    a = apply_kraus(ops.jump(dN), rho_t)
    a = apply_kraus(ops.measurement(dJ), a)
    return apply_kraus(ops.u_h, a)


def retro_step(e_next, dJ, ops):
    """One backward step of the retrofiltered effect (adjoint maps, reverse order)."""
    e = apply_adjoint_kraus(ops.u_h, e_next)
    e = apply_adjoint_kraus(ops.measurement(dJ), e)
    return qa.hermitize(sum(qa.dagger(m) @ e @ m for m in ops.unconditioned_pair))


def homodyne_signal(rho, p):
    """Tr[c_phi rho + rho c_phi^dagger]."""
    c = p.c_phi
    return 2.0 * qa.trace(c @ rho).real


def _h_super(c, rho):
    s = c @ rho + rho @ qa.dagger(c)
    return s - qa.trace(s).real * rho


def _d_super(c, rho):
    cdc = qa.dagger(c) @ c
    return c @ rho @ qa.dagger(c) - 0.5 * (cdc @ rho + rho @ cdc)


def sme_true_step_reference(rho, dW, dN, p):
    """One explicit Euler step of the true-state SME (test oracle only).

    ``dW`` is the true innovation; the jump term is the full update
    ``c rho c^dag / Tr - rho`` when ``dN = 1``.
    """
    dt = p.dt
    c_n = p.c_n
    c_phi = p.c_phi
    h = p.hamiltonian
    drho = -1j * (h @ rho - rho @ h) * dt
    drho = drho - _h_super(0.5 * qa.dagger(c_n) @ c_n, rho) * dt
    drho = drho + _d_super(c_phi, rho) * dt + _h_super(c_phi, rho) * dW
    if dN:
        jumped = c_n @ rho @ qa.dagger(c_n)
        tr = qa.trace(jumped).real
        if tr > 0:
            drho = drho + jumped / tr - rho
    out = rho + drho
    out = 0.5 * (out + qa.dagger(out))
    return out / qa.trace(out).real
