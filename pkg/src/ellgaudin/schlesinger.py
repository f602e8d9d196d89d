"""Non-autonomous (monodromy preserving) form of the Lax equations.

tau and the marked points z_a become times.  Explicit tau-derivatives of the
elliptic kernels are taken by centred differences in tau; z-derivatives of M
by centred differences in z.  The state is transported along the autonomous
equations of motion with the time normalisation described below.

Normalisation: for the gl_NM^{x n} model the kernels satisfy
2 pi i d_tau L = N d_z M0 and d_{z_a} L = N d_z M_{1,a} (explicit parts), so
the zero-curvature equations close with ``M -> s M`` and transport
``2 pi i dX/dtau = s * eom_h0`` and ``dX/dz_a = s * eom_h1a``, s = N.
Passing ``m_scale=1`` gives the unscaled form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elliptic import TWO_PI_I, EllipticContext, heat_residual_phi
from .lax import (
    build_lax,
    build_m0,
    build_m1a,
    eom_h0,
    eom_h0_coeffs,
    eom_h1a,
    lax_derivative,
    unwanted_h0,
    unwanted_h1a,
)
from .rmatrix import heat_residual_r
from .special_models import _rho, cm_eom, cm_lax, cm_lax_derivative
from .state import ModelSpec, PhaseState
from .torus import from_coeffs, to_coeffs


def _central(fn, x0, h: float, richardson: bool = False):
    d = lambda e: (fn(x0 + e) - fn(x0 - e)) / (2 * e)
    if not richardson:
        return d(h)
    return (4 * d(h / 2) - d(h)) / 3


def _commutator(a, b):
    return a @ b - b @ a


def _rel(res, terms) -> float:
    scale = max([np.linalg.norm(t) for t in terms] + [1.0])
    return float(np.linalg.norm(res) / scale)


def explicit_tau_lax(spec: ModelSpec, state: PhaseState, z, h: float | None = None,
                     richardson: bool = False) -> np.ndarray:
    """d/dtau L(z) at fixed (q, p, S, z_a)."""
    h = spec.fd_step if h is None else h
    return _central(lambda t: build_lax(spec.with_tau(t), state)(z), spec.tau, h, richardson)


def explicit_za_lax(spec: ModelSpec, state: PhaseState, a: int, z, h: float | None = None,
                    richardson: bool = False) -> np.ndarray:
    """d/dz_a L(z) at fixed (q, p, S, tau)."""
    h = spec.fd_step if h is None else h
    pts = list(spec.marked_points)

    def lz(w):
        moved = pts.copy()
        moved[a] = w
        return build_lax(spec.with_marked_points(moved), state)(z)

    return _central(lz, pts[a], h, richardson)


def monodromy_residual_tau(spec: ModelSpec, state: PhaseState, z_samples, pure: bool = False,
                           h: float | None = None, ablate: bool = False, m_scale: float | None = None,
                           sign: float = -1.0) -> float:
    """max_z of the relative residual of

        2 pi i dL/dtau - d_z (s M0) = [L, s M0] + s U0

    with dL/dtau = explicit tau-derivative + transport 2 pi i dX/dtau = s eom_h0.
    ``ablate`` drops the d_z M0 term (negative control); ``pure`` drops U0.
    """
    h = spec.fd_step if h is None else h
    s = spec.n_inner if m_scale is None else m_scale
    lax, m0 = build_lax(spec, state), build_m0(spec, state)
    transport = lax_derivative(spec, state, eom_h0(spec, state))
    unw = unwanted_h0(spec, state, sign)
    worst = 0.0
    for z in z_samples:
        e = TWO_PI_I * explicit_tau_lax(spec, state, z, h)
        c = s * transport(z)
        dzm = np.zeros_like(e) if ablate else s * _central(m0, z, h)
        rhs = s * _commutator(lax(z), m0(z))
        if not pure:
            rhs = rhs + s * unw(z)
        worst = max(worst, _rel(e + c - dzm - rhs, [e, c, rhs]))
    return worst


def monodromy_residual_za(spec: ModelSpec, state: PhaseState, a: int, z_samples, pure: bool = False,
                          h: float | None = None, ablate: bool = False,
                          m_scale: float | None = None) -> float:
    """max_z of the relative residual of

        dL/dz_a - d_z (s M_{1,a}) = [L, s M_{1,a}] + s U_{1,a}

    with dL/dz_a = explicit z_a-derivative + transport dX/dz_a = s eom_h1a.
    """
    h = spec.fd_step if h is None else h
    s = spec.n_inner if m_scale is None else m_scale
    lax, m1 = build_lax(spec, state), build_m1a(spec, state, a)
    transport = lax_derivative(spec, state, eom_h1a(spec, state, a))
    unw = unwanted_h1a(spec, state, a)
    worst = 0.0
    for z in z_samples:
        e = explicit_za_lax(spec, state, a, z, h)
        c = s * transport(z)
        dzm = np.zeros_like(e) if ablate else s * _central(m1, z, h)
        rhs = s * _commutator(lax(z), m1(z))
        if not pure:
            rhs = rhs + s * unw(z)
        worst = max(worst, _rel(e + c - dzm - rhs, [e, c, rhs]))
    return worst


def translation_residual(spec: ModelSpec, state: PhaseState, z_samples, h: float = 1e-3) -> float:
    """n = 1: d/dz_1 L(z) + d/dz L(z), both Richardson-extrapolated centred differences."""
    if spec.n_poles != 1:
        raise ValueError("translation check needs a single marked point")
    lax = build_lax(spec, state)
    worst = 0.0
    for z in z_samples:
        dza = explicit_za_lax(spec, state, 0, z, h, richardson=True)
        dz = _central(lax, z, h, richardson=True)
        worst = max(worst, _rel(dza + dz, [dz]))
    return worst


# ---------------------------------------------------------------------------
# Painleve-Calogero


def cm_monodromy_m(ctx: EllipticContext, q, p, nu, scalar: bool = True):
    """M^CM plus, when ``scalar``, the term nu rho(z) 1 matching the nu E1(z) diagonal of L."""
    pair = cm_lax(ctx, q, p, nu)
    m = len(q)
    if not scalar:
        return pair.m
    return lambda z: pair.m(z) + nu * _rho(ctx, z) * np.eye(m)


def cm_tau_eom(ctx: EllipticContext, q, p, nu):
    """dq/dtau, dp/dtau with 2 pi i dq/dtau = p and 2 pi i dp/dtau = nu^2 sum wp'(q_ik)."""
    dq, dp = cm_eom(ctx, q, p, nu)
    return dq / TWO_PI_I, dp / TWO_PI_I


def painleve_cm_residual(ctx: EllipticContext, q, p, nu, z_samples, h: float | None = None,
                         scalar: bool = True, ablate: bool = False) -> float:
    """Relative residual of 2 pi i dL/dtau - d_z M = [L, M] for the Calogero-Moser pair."""
    h = ctx.fd_step if h is None else h
    q = np.asarray(q, dtype=complex)
    p = np.asarray(p, dtype=complex)
    lax = cm_lax(ctx, q, p, nu).l
    mop = cm_monodromy_m(ctx, q, p, nu, scalar)
    dq, dp = cm_tau_eom(ctx, q, p, nu)
    transport = cm_lax_derivative(ctx, q, nu, dq, dp)
    worst = 0.0
    for z in z_samples:
        e = TWO_PI_I * _central(lambda t: cm_lax(ctx.with_tau(t), q, p, nu).l(z), ctx.tau, h)
        c = TWO_PI_I * transport(z)
        dzm = np.zeros_like(e) if ablate else _central(mop, z, h)
        rhs = _commutator(lax(z), mop(z))
        worst = max(worst, _rel(e + c - dzm - rhs, [e, c, rhs]))
    return worst


# ---------------------------------------------------------------------------
# heat equations


@dataclass(frozen=True)
class HeatConvergence:
    steps: tuple
    residuals: tuple

    @property
    def ratios(self) -> tuple:
        r = self.residuals
        return tuple(r[k] / r[k + 1] for k in range(len(r) - 1))


def heat_convergence(ctx: EllipticContext, z, u, n: int | None = None,
                     steps=(4e-3, 2e-3, 1e-3, 5e-4)) -> HeatConvergence:
    """Heat-equation residuals of phi (n None) or the normalised R-matrix at a ladder of steps.

    Second-order stencils give ratios near 4.
    """
    if n is None:
        res = [heat_residual_phi(ctx, z, u, h) for h in steps]
    else:
        res = [heat_residual_r(ctx, n, z, u, h) for h in steps]
    return HeatConvergence(tuple(steps), tuple(res))


# ---------------------------------------------------------------------------
# integrated tau path


@dataclass(frozen=True)
class TauPath:
    taus: tuple
    states: tuple
    residuals: tuple


def tau_path(spec: ModelSpec, state: PhaseState, z_samples, steps: int = 5, dtau: complex = 1e-3j,
             pure: bool = False, h: float | None = None) -> TauPath:
    """RK4 in tau for 2 pi i dX/dtau = N eom_h0(X; tau); monodromy residual after each step."""
    basis = spec.basis
    s = spec.n_inner

    def rhs(tau, q, p, c):
        dq, dp, dc = eom_h0_coeffs(spec.with_tau(tau), q, p, c)
        k = s / TWO_PI_I
        return k * dq, k * dp, k * dc

    q, p, c = state.q.copy(), state.p.copy(), to_coeffs(basis, state.spins)
    tau = spec.tau
    taus, states = [tau], [state]
    res = [monodromy_residual_tau(spec, state, z_samples, pure=pure, h=h)]
    for _ in range(steps):
        k1 = rhs(tau, q, p, c)
        k2 = rhs(tau + dtau / 2, *(x + dtau / 2 * d for x, d in zip((q, p, c), k1)))
        k3 = rhs(tau + dtau / 2, *(x + dtau / 2 * d for x, d in zip((q, p, c), k2)))
        k4 = rhs(tau + dtau, *(x + dtau * d for x, d in zip((q, p, c), k3)))
        q, p, c = (x + dtau / 6 * (a + 2 * b + 2 * cc + d)
                   for x, a, b, cc, d in zip((q, p, c), k1, k2, k3, k4))
        tau = tau + dtau
        st = PhaseState(q, p, from_coeffs(basis, c))
        taus.append(tau)
        states.append(st)
        res.append(monodromy_residual_tau(spec.with_tau(tau), st, z_samples, pure=pure, h=h))
    return TauPath(tuple(taus), tuple(states), tuple(res))


__all__ = [
    "HeatConvergence",
    "TauPath",
    "cm_monodromy_m",
    "cm_tau_eom",
    "explicit_tau_lax",
    "explicit_za_lax",
    "heat_convergence",
    "monodromy_residual_tau",
    "monodromy_residual_za",
    "painleve_cm_residual",
    "tau_path",
    "translation_residual",
]
