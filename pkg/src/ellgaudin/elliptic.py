"""Odd theta function and the elliptic toolkit built on it.

All functions broadcast over numpy arrays and take an :class:`EllipticContext`
as first argument.  Conventions::

    theta(z)   = -sum_k exp(pi i tau (k+1/2)^2 + 2 pi i (z+1/2)(k+1/2))
    E1(z)      = theta'(z)/theta(z),        E2(z) = -E1'(z)
    wp(z)      = E2(z) + theta'''(0)/(3 theta'(0))
    phi(z, u)  = theta'(0) theta(z+u) / (theta(z) theta(u))
    f(z, u)    = d/du phi(z, u) = phi(z, u) (E1(z+u) - E1(u))
    rho(z)     = (E1(z)^2 - wp(z)) / 2

Arguments are reduced into the fundamental cell before the series is summed
and the quasi-periodicity factors are reapplied exactly.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import EvaluationError, PoleProximity, ZeroCharacteristicAtPole

TWO_PI_I = 2j * np.pi


@dataclass(frozen=True)
class EllipticContext:
    """Evaluation environment: modular parameter plus numerical knobs.

    ``trunc`` is the bound K of the theta series (k runs over [-K, K]).  It is
    doubled at construction until the first dropped term is negligible.
    """

    tau: complex
    trunc: int = 30
    pole_eps: float = 1e-6
    fd_step: float = 1e-4

    def __post_init__(self):
        tau = complex(self.tau)
        object.__setattr__(self, "tau", tau)
        if not tau.imag > 0:
            raise ValueError(f"Im(tau) must be positive, got tau={tau}")
        if int(self.trunc) < 1:
            raise ValueError("trunc must be a positive integer")
        if not self.pole_eps > 0 or not self.fd_step > 0:
            raise ValueError("pole_eps and fd_step must be positive")
        k = int(self.trunc)
        # geometric tail exp(-pi Im(tau) k^2) against the k ~ 0 terms,
        # with headroom for the |Im z| <= Im(tau) cell after reduction
        while math.exp(-math.pi * tau.imag * (k + 0.5) ** 2 + 2 * math.pi * tau.imag * (k + 1)) > 1e-17:
            k *= 2
        object.__setattr__(self, "trunc", k)

    def with_tau(self, tau: complex) -> "EllipticContext":
        return replace(self, tau=tau, trunc=30)

    @cached_property
    def _k(self) -> np.ndarray:
        return np.arange(-self.trunc, self.trunc + 1) + 0.5

    @cached_property
    def _theta_zero(self) -> tuple[complex, complex]:
        """(theta'(0), theta'''(0)) from term-wise differentiated series."""
        d = _series(self, np.zeros(1, dtype=complex), 3)
        return complex(d[1][0]), complex(d[3][0])

    @property
    def theta1_zero(self) -> complex:
        return self._theta_zero[0]

    @cached_property
    def wp_shift(self) -> complex:
        """The constant wp(z) - E2(z) = theta'''(0) / (3 theta'(0))."""
        t1, t3 = self._theta_zero
        return t3 / (3 * t1)

    def omega(self, alpha1, alpha2, n_order) -> complex:
        return (alpha1 + alpha2 * self.tau) / n_order


@dataclass(frozen=True)
class CharacteristicIndex:
    """alpha = (alpha1, alpha2) in Z_N x Z_N with omega = (alpha1 + alpha2 tau)/N."""

    alpha1: int
    alpha2: int
    n_order: int

    def __post_init__(self):
        if self.n_order < 1:
            raise ValueError("n_order must be positive")
        if not (0 <= self.alpha1 < self.n_order and 0 <= self.alpha2 < self.n_order):
            raise ValueError(f"alpha=({self.alpha1},{self.alpha2}) not reduced mod {self.n_order}")

    def omega(self, tau: complex) -> complex:
        return (self.alpha1 + self.alpha2 * tau) / self.n_order

    @property
    def is_zero(self) -> bool:
        return self.alpha1 == 0 and self.alpha2 == 0


# ---------------------------------------------------------------------------
# series core


def _series(ctx: EllipticContext, z0: np.ndarray, order: int) -> list[np.ndarray]:
    """theta and its first ``order`` derivatives at already-reduced points."""
    k = ctx._k
    z0 = np.asarray(z0, dtype=complex)
    expo = np.pi * 1j * ctx.tau * k**2 + TWO_PI_I * np.multiply.outer(z0 + 0.5, k)
    terms = np.exp(expo)
    out = []
    fac = np.ones_like(k, dtype=complex)
    for _ in range(order + 1):
        out.append(-(terms @ fac))
        fac = fac * (TWO_PI_I * k)
    return out


def _reduce(ctx: EllipticContext, z: np.ndarray):
    """Split z = z0 + m + n tau with z0 near the origin cell."""
    tau = ctx.tau
    n = np.round(z.imag / tau.imag)
    w = z - n * tau
    m = np.round(w.real)
    return w - m, m, n


def _theta_scaled(ctx: EllipticContext, z, order: int = 0):
    """theta^{(j)}(z0) for j<=order, plus the exact log factor and lattice shifts.

    theta(z) = theta(z0) * exp(logfac) with
    logfac = i pi (m + n) - i pi n^2 tau - 2 pi i n z0.
    """
    z = np.asarray(z, dtype=complex)
    z0, m, n = _reduce(ctx, z)
    derivs = _series(ctx, z0, order)
    logfac = 1j * np.pi * (m + n) - 1j * np.pi * n**2 * ctx.tau - TWO_PI_I * n * z0
    return derivs, logfac, n


def lattice_distance(ctx: EllipticContext, z) -> np.ndarray:
    """Distance from z to the nearest point of Z + Z tau."""
    z = np.asarray(z, dtype=complex)
    z0, _, _ = _reduce(ctx, z)
    best = np.full(z0.shape, np.inf)
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            best = np.minimum(best, np.abs(z0 - a - b * ctx.tau))
    return best


def check_regular(ctx: EllipticContext, name: str, z, eps: float | None = None) -> None:
    """Raise PoleProximity if any entry of z is within eps of the lattice."""
    eps = ctx.pole_eps if eps is None else eps
    d = lattice_distance(ctx, z)
    bad = d < eps
    if np.any(bad):
        idx = np.flatnonzero(bad)[0]
        zz = np.asarray(z, dtype=complex).ravel()
        val = complex(zz[idx]) if zz.size > 1 else complex(zz[0])
        raise PoleProximity(name, val, float(d.ravel()[idx]), eps)


def _out(x):
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise EvaluationError("non-finite value from theta series (argument too large?)")
    return x[()] if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# theta, Eisenstein, Weierstrass


def theta(ctx: EllipticContext, z):
    """Odd Riemann theta function theta(z|tau)."""
    (t0,), logfac, _ = _theta_scaled(ctx, z, 0)
    return _out(t0 * np.exp(logfac))


def theta_prime(ctx: EllipticContext, z):
    """d/dz theta(z|tau)."""
    (t0, t1), logfac, n = _theta_scaled(ctx, z, 1)
    return _out((t1 - TWO_PI_I * n * t0) * np.exp(logfac))


def _log_derivs(ctx: EllipticContext, z, order: int):
    """(E1, E2[, E2']) at z; no pole check."""
    derivs, _, n = _theta_scaled(ctx, z, order + 1)
    t0 = derivs[0]
    r1 = derivs[1] / t0
    r2 = derivs[2] / t0
    e1 = r1
    e2 = r1**2 - r2
    out = [e1 - TWO_PI_I * n, e2]
    if order >= 2:
        r3 = derivs[3] / t0
        # l''' = r3 - 3 r2 r1 + 2 r1^3 and E2' = -l'''
        out.append(-(r3 - 3 * r2 * r1 + 2 * r1**3))
    return out


def eisenstein1(ctx: EllipticContext, z):
    """E1(z) = d/dz log theta(z)."""
    check_regular(ctx, "z", z)
    return _out(_log_derivs(ctx, z, 1)[0])


def eisenstein2(ctx: EllipticContext, z):
    """E2(z) = -d/dz E1(z)."""
    check_regular(ctx, "z", z)
    return _out(_log_derivs(ctx, z, 1)[1])


def eisenstein2_prime(ctx: EllipticContext, z):
    """E2'(z), which equals wp'(z)."""
    check_regular(ctx, "z", z)
    return _out(_log_derivs(ctx, z, 2)[2])


def weierstrass_p(ctx: EllipticContext, z):
    check_regular(ctx, "z", z)
    return _out(_log_derivs(ctx, z, 1)[1] + ctx.wp_shift)


weierstrass_p_prime = eisenstein2_prime


def rho(ctx: EllipticContext, z):
    """rho(z) = (E1(z)^2 - wp(z)) / 2."""
    check_regular(ctx, "z", z)
    e1, e2 = _log_derivs(ctx, z, 1)
    return _out((e1**2 - e2 - ctx.wp_shift) / 2)


# ---------------------------------------------------------------------------
# Kronecker function and its u-derivatives


def _phi_raw(ctx: EllipticContext, z, u):
    z = np.asarray(z, dtype=complex)
    u = np.asarray(u, dtype=complex)
    (tz,), lz, _ = _theta_scaled(ctx, z, 0)
    (tu,), lu, _ = _theta_scaled(ctx, u, 0)
    (tzu,), lzu, _ = _theta_scaled(ctx, z + u, 0)
    return ctx.theta1_zero * tzu / (tz * tu) * np.exp(lzu - lz - lu)


def _check_phi_args(ctx, z, u, allow_z_zero=False):
    z = np.asarray(z, dtype=complex)
    if allow_z_zero:
        zz = np.where(z == 0, 0.5 + 0.5 * ctx.tau, z)  # placeholder, never a pole
        check_regular(ctx, "z", zz)
    else:
        check_regular(ctx, "z", z)
    check_regular(ctx, "u", u)
    check_regular(ctx, "z+u", np.where(z == 0, u, z + u) if allow_z_zero else z + u)


def kronecker_phi(ctx: EllipticContext, z, u):
    """phi(z, u) = theta'(0) theta(z+u) / (theta(z) theta(u))."""
    _check_phi_args(ctx, z, u)
    return _out(_phi_raw(ctx, z, u))


def _f_parts(ctx, z, u, order):
    """f (and f') at z != 0 entries, closed forms at z == 0."""
    z = np.asarray(z, dtype=complex)
    u = np.asarray(u, dtype=complex)
    z, u = np.broadcast_arrays(z, u)
    zero = z == 0
    zs = np.where(zero, 0.5 + 0.5 * ctx.tau, z)
    phi = _phi_raw(ctx, zs, u)
    ld_u = _log_derivs(ctx, u, 2 if order > 1 else 1)
    ld_zu = _log_derivs(ctx, zs + u, 1)
    d1 = ld_zu[0] - ld_u[0]
    f = np.where(zero, -ld_u[1], phi * d1)
    if order == 1:
        return f
    fp = phi * (d1**2 - ld_zu[1] + ld_u[1])
    return np.where(zero, -ld_u[2], fp)


def kronecker_f(ctx: EllipticContext, z, u):
    """f(z, u) = d/du phi(z, u); f(0, u) = -E2(u)."""
    _check_phi_args(ctx, z, u, allow_z_zero=True)
    return _out(_f_parts(ctx, z, u, 1))


def kronecker_f_prime(ctx: EllipticContext, z, u):
    """f'(z, u) = d^2/du^2 phi(z, u); f'(0, u) = -wp'(u)."""
    _check_phi_args(ctx, z, u, allow_z_zero=True)
    return _out(_f_parts(ctx, z, u, 2))


# ---------------------------------------------------------------------------
# basis functions phi_alpha, f_alpha


def _alpha_factor(a2, n_order, z):
    return np.exp(TWO_PI_I * np.asarray(a2) * np.asarray(z, dtype=complex) / n_order)


def phi_alpha_raw(ctx, a1, a2, n_order, z, u):
    """Vectorised phi_alpha(z, omega_alpha + u); a1, a2 broadcast with z, u."""
    w = (np.asarray(a1) + np.asarray(a2) * ctx.tau) / n_order + np.asarray(u, dtype=complex)
    _check_phi_args(ctx, z, w)
    return _out(_alpha_factor(a2, n_order, z) * _phi_raw(ctx, z, w))


def f_alpha_raw(ctx, a1, a2, n_order, z, u, order=1):
    """Vectorised f_alpha (order=1) or f'_alpha (order=2) at (z, omega_alpha + u)."""
    w = (np.asarray(a1) + np.asarray(a2) * ctx.tau) / n_order + np.asarray(u, dtype=complex)
    _check_phi_args(ctx, z, w, allow_z_zero=True)
    return _out(_alpha_factor(a2, n_order, z) * _f_parts(ctx, z, w, order))


def _idx_check(idx: CharacteristicIndex, ctx, u):
    if idx.is_zero and np.any(lattice_distance(ctx, u) < ctx.pole_eps):
        raise ZeroCharacteristicAtPole("alpha=(0,0) with u on the lattice is a pole of phi")


def phi_alpha(ctx: EllipticContext, idx: CharacteristicIndex, z, u):
    """phi_alpha(z, omega_alpha + u) = exp(2 pi i alpha2 z / N) phi(z, omega_alpha + u)."""
    _idx_check(idx, ctx, u)
    return phi_alpha_raw(ctx, idx.alpha1, idx.alpha2, idx.n_order, z, u)


def f_alpha(ctx: EllipticContext, idx: CharacteristicIndex, z, u):
    """f_alpha(z, omega_alpha + u) = d/du phi_alpha(z, omega_alpha + u)."""
    _idx_check(idx, ctx, u)
    return f_alpha_raw(ctx, idx.alpha1, idx.alpha2, idx.n_order, z, u, 1)


def f_alpha_prime(ctx: EllipticContext, idx: CharacteristicIndex, z, u):
    _idx_check(idx, ctx, u)
    return f_alpha_raw(ctx, idx.alpha1, idx.alpha2, idx.n_order, z, u, 2)


# ---------------------------------------------------------------------------
# finite-difference helpers


def tau_derivative(ctx: EllipticContext, func, h: float | None = None):
    """Centered difference of ``func(ctx')`` in tau, real and imaginary steps averaged."""
    h = ctx.fd_step if h is None else h
    tau = ctx.tau
    d_re = (func(ctx.with_tau(tau + h)) - func(ctx.with_tau(tau - h))) / (2 * h)
    d_im = (func(ctx.with_tau(tau + 1j * h)) - func(ctx.with_tau(tau - 1j * h))) / (2j * h)
    return (d_re + d_im) / 2


def mixed_derivative(func, z, u, h):
    """4-point centered stencil for d^2/dz du func(z, u)."""
    return (func(z + h, u + h) - func(z + h, u - h) - func(z - h, u + h) + func(z - h, u - h)) / (4 * h * h)


def heat_residual_phi(ctx: EllipticContext, z, u, h: float | None = None) -> float:
    """|2 pi i d_tau phi - d_z d_u phi| / |phi| by finite differences."""
    h = ctx.fd_step if h is None else h
    z = complex(z)
    u = complex(u)
    lhs = TWO_PI_I * tau_derivative(ctx, lambda c: kronecker_phi(c, z, u), h)
    rhs = mixed_derivative(lambda a, b: kronecker_phi(ctx, a, b), z, u, h)
    return float(abs(lhs - rhs) / abs(kronecker_phi(ctx, z, u)))


def richardson_limit(func, h: float, levels: int = 4, even: bool = True):
    """Extrapolate func(h) -> h=0 from steps h, h/2, h/4, ...

    ``even`` assumes a series in h^2; otherwise every power of h is removed.
    """
    table = [func(h / 2**k) for k in range(levels)]
    base = 4 if even else 2
    for j in range(1, levels):
        w = base**j
        table = [(w * table[k + 1] - table[k]) / (w - 1) for k in range(len(table) - 1)]
    return table[0]


def random_points(ctx: EllipticContext, rng: np.random.Generator, size, *, avoid=(), margin=None):
    """Uniform points in the fundamental cell away from the lattice and ``avoid`` shifts.

    ``avoid`` lists callables w -> array of arguments that must also stay away
    from poles; rejected points are resampled.
    """
    margin = 10 * ctx.pole_eps if margin is None else margin
    out = np.empty(size, dtype=complex)
    flat = out.reshape(-1)
    i = 0
    while i < flat.size:
        w = rng.uniform(0.05, 0.95) + rng.uniform(0.05, 0.95) * ctx.tau
        w -= 0.5 + 0.5 * ctx.tau
        if lattice_distance(ctx, w) < margin:
            continue
        if any(np.any(lattice_distance(ctx, g(w)) < margin) for g in avoid):
            continue
        flat[i] = w
        i += 1
    return out


def exp2pii(x) -> complex:
    return cmath.exp(2j * cmath.pi * x)
