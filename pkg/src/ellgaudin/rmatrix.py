"""Elliptic R-matrix, its classical limits and the R-matrix form of the Lax pairs.

Operators on Mat(N) (x) Mat(N) are dense N^2 x N^2 arrays in ``np.kron``
ordering; three-space operators are N^3 x N^3.  The normalised kernel is

    R^z_12(x) = (1/N) sum_alpha phi_alpha(x, z/N + omega_alpha) T_alpha (x) T_{-alpha}

with expansions R^z(x) = 1/z + r(x) + z m(x) + O(z^2) and
R^z(x) = P/x + R^{z,(0)} + x R^{z,(1)} + O(x^2).  ``F^z(x) = d/dx R^z(x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .elliptic import (
    TWO_PI_I,
    EllipticContext,
    _log_derivs,
    _phi_raw,
    check_regular,
    f_alpha_raw,
    kronecker_phi,
    phi_alpha_raw,
    rho,
    weierstrass_p,
)
from .lax import Hamiltonians, SpectralOperator, _residual
from .state import ModelSpec, PhaseState, Tangent, blocks_to_full
from .torus import build_basis, permutation_operator


# ---------------------------------------------------------------------------
# tensor helpers


def swap12(x: np.ndarray, n: int) -> np.ndarray:
    """X_21 = P X_12 P."""
    p = permutation_operator(n)
    return p @ x @ p


def embed(x: np.ndarray, i: int, j: int, n: int) -> np.ndarray:
    """Place a two-space operator X_12 into spaces (i, j) of V^{(x)3}; i, j in {1, 2, 3}."""
    if i == j or {i, j} - {1, 2, 3}:
        raise ValueError(f"bad space pair ({i}, {j})")
    if i > j:
        x = swap12(x, n)
        i, j = j, i
    one = np.eye(n)
    if (i, j) == (1, 2):
        return np.kron(x, one)
    if (i, j) == (2, 3):
        return np.kron(one, x)
    p23 = np.kron(one, permutation_operator(n))
    return p23 @ np.kron(x, one) @ p23


def ptrace(x: np.ndarray, n: int, space: int) -> np.ndarray:
    """Partial trace of a two-space operator over space 1 or 2."""
    t = x.reshape(n, n, n, n)
    return np.einsum("jajb->ab", t) if space == 1 else np.einsum("ajbj->ab", t)


def tr2_with(x: np.ndarray, s: np.ndarray, n: int) -> np.ndarray:
    """tr_2(S_2 X_12) with S_2 = 1 (x) S."""
    return np.einsum("ajbk,kj->ab", x.reshape(n, n, n, n), s)


def tr12_with(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> complex:
    """tr_12(A_1 B_2 X_12)."""
    n = a.shape[0]
    return complex(np.einsum("ia,jb,abij->", a, b, x.reshape(n, n, n, n)))


def _tt_stack(n: int) -> np.ndarray:
    """T_alpha (x) T_{-alpha} for alpha in representatives, shape (N, N, N^2, N^2)."""
    basis = build_basis(n)
    out = np.empty((n, n, n * n, n * n), dtype=complex)
    for a1, a2 in basis.indices:
        out[a1, a2] = np.kron(basis.t((a1, a2)), basis.t((-a1, -a2)))
    return out


# ---------------------------------------------------------------------------
# kernel


@dataclass(frozen=True)
class RMatrixKernel:
    """An R-matrix ``eval(z, x)`` on Mat(N)^{(x)2}.

    Optional closed forms (``deriv``, ``r``, ``m``, ``r0``, ``x_coeffs``) are
    used when given; otherwise the limits are taken numerically, so any
    user-supplied solution of the associative Yang-Baxter equation can be run
    through the same checks.
    """

    eval: Callable[[complex, complex], np.ndarray]
    n_order: int
    ctx: EllipticContext
    deriv: Callable | None = None  # (z, x, order) -> d^order/dx^order R^z(x)
    r: Callable | None = None
    m: Callable | None = None
    r0: np.ndarray | None = None
    x_coeffs: Callable | None = None  # z -> (R^{z,(0)}, R^{z,(1)})
    # circle used for numerical Laurent coefficients; must exclude other singularities
    radius: float = 0.05
    points: int = 48
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __call__(self, z, x):
        return self.eval(z, x)

    @property
    def perm(self) -> np.ndarray:
        return permutation_operator(self.n_order)

    def F(self, z, x, order: int = 1) -> np.ndarray:
        """d^order/dx^order R^z(x); at z = 0 the q-independent 1/z part drops and r is used."""
        if z == 0:
            if order == 1:
                return kernel_r_derivative(self, x)
            return 2 * contour_coeff(self.r_matrix, x, 2, self.radius, self.points)
        if self.deriv is not None:
            return self.deriv(z, x, order)
        return numeric_x_derivative(self, z, x, order)

    def r_matrix(self, x) -> np.ndarray:
        return self.r(x) if self.r is not None else numeric_z_coeffs(self, x)[0]

    def m_matrix(self, x) -> np.ndarray:
        return self.m(x) if self.m is not None else numeric_z_coeffs(self, x)[1]

    def m_at_zero(self) -> np.ndarray:
        """m_12(0), the regular value of m at the origin."""
        if self.m is not None:
            return self.m(0.0)
        if "m0" not in self._cache:
            self._cache["m0"] = contour_coeff(self.m_matrix, 0.0, 0, self.radius, self.points)
        return self._cache["m0"]

    def r_zero(self) -> np.ndarray:
        """r^(0) in r(z) = P/z + r^(0) + z r^(1) + O(z^2)."""
        if self.r0 is not None:
            return self.r0
        if "r0" not in self._cache:
            self._cache["r0"] = numeric_r_expansion(self)[0]
        return self._cache["r0"]

    def expansion_x(self, z) -> tuple[np.ndarray, np.ndarray]:
        """(R^{z,(0)}, R^{z,(1)})."""
        if self.x_coeffs is not None:
            return self.x_coeffs(z)
        return numeric_x_coeffs(self, z)


def contour_coeff(fn, center, power: int, radius: float, points: int = 64) -> np.ndarray:
    """Laurent coefficient of (w - center)^power of a matrix function (trapezoid rule on a circle)."""
    theta = 2 * np.pi * (np.arange(points) + 0.5) / points
    w = radius * np.exp(1j * theta)
    return sum(fn(center + wk) * wk ** (-power) for wk in w) / points


def numeric_z_coeffs(kernel: RMatrixKernel, x) -> tuple[np.ndarray, np.ndarray]:
    """r(x) and m(x) as Laurent coefficients of R^z(x) at z = 0.

    The circle stays inside |z| < N |x|, where the next pole z = -N x sits.
    """
    fn = lambda z: kernel(z, x)
    rad = min(kernel.radius, 0.5 * kernel.n_order * abs(x))
    return (contour_coeff(fn, 0.0, 0, rad, kernel.points),
            contour_coeff(fn, 0.0, 1, rad, kernel.points))


def numeric_x_coeffs(kernel: RMatrixKernel, z) -> tuple[np.ndarray, np.ndarray]:
    """R^{z,(0)} and R^{z,(1)} as Laurent coefficients of R^z(x) at x = 0 (circle inside |x| < |z|/N)."""
    fn = lambda x: kernel(z, x)
    rad = min(kernel.radius, 0.5 * abs(z) / kernel.n_order)
    return (contour_coeff(fn, 0.0, 0, rad, kernel.points),
            contour_coeff(fn, 0.0, 1, rad, kernel.points))


def numeric_r_expansion(kernel: RMatrixKernel) -> tuple[np.ndarray, np.ndarray]:
    """(r^(0), r^(1)) from r(x) = P/x + r^(0) + x r^(1) + O(x^2)."""
    return (contour_coeff(kernel.r_matrix, 0.0, 0, kernel.radius, kernel.points),
            contour_coeff(kernel.r_matrix, 0.0, 1, kernel.radius, kernel.points))


def numeric_x_derivative(kernel: RMatrixKernel, z, x, order: int = 1) -> np.ndarray:
    """d^order/dx^order R^z(x) by a Cauchy integral around x."""
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    coef = contour_coeff(lambda w: kernel(z, w), x, order, kernel.radius, kernel.points)
    return coef * (1 if order == 1 else 2)


def _bb_parts(ctx: EllipticContext, n: int, x, u, order: int):
    """phi_alpha(x, omega_alpha + u) and its x-derivatives for every alpha, shape (order+1, N, N)."""
    r = np.arange(n)
    a1 = np.repeat(r, n)
    a2 = np.tile(r, n)
    w = (a1 + a2 * ctx.tau) / n + u
    check_regular(ctx, "x", x)
    check_regular(ctx, "z/N + omega_alpha", w)
    check_regular(ctx, "x + z/N + omega_alpha", x + w)
    c = TWO_PI_I * a2 / n
    ph = np.exp(c * x) * _phi_raw(ctx, x, w)
    e_xw = _log_derivs(ctx, x + w, 1)
    e_x = _log_derivs(ctx, np.full(w.shape, x), 1)
    g = e_xw[0] - e_x[0] + c
    out = [ph]
    if order >= 1:
        out.append(ph * g)
    if order >= 2:
        out.append(ph * (g**2 - e_xw[1] + e_x[1]))
    return np.array(out).reshape(order + 1, n, n)


def baxter_belavin(ctx: EllipticContext, n: int) -> RMatrixKernel:
    """Normalised Baxter-Belavin kernel R^z(x) = R^BB(z/N, x) with closed-form limits."""
    if n < 1:
        raise ValueError("N must be >= 1")
    tt = _tt_stack(n)
    a2 = np.arange(n)[None, :] * np.ones((n, 1))
    a1 = np.arange(n)[:, None] * np.ones((1, n))
    omega = (a1 + a2 * ctx.tau) / n
    nz = np.ones((n, n), dtype=bool)
    nz[0, 0] = False
    one = np.eye(n * n)

    def contract(table):
        return np.einsum("xy,xyrs->rs", table, tt)

    def ev(z, x):
        return contract(_bb_parts(ctx, n, complex(x), complex(z) / n, 0)[0]) / n

    def deriv(z, x, order=1):
        return contract(_bb_parts(ctx, n, complex(x), complex(z) / n, order)[order]) / n

    def alpha_table(fn, x):
        vals = np.zeros((n, n), dtype=complex)
        if n > 1:
            vals[nz] = fn(a1[nz], a2[nz], x)
        return vals

    def r_fn(x):
        x = complex(x)
        check_regular(ctx, "x", x)
        e1 = _log_derivs(ctx, x, 1)[0]
        vals = alpha_table(lambda b1, b2, xx: phi_alpha_raw(ctx, b1, b2, n, xx, 0.0), x)
        return (e1 * one + contract(vals)) / n

    def m_fn(x):
        x = complex(x)
        if x == 0:
            rho0 = ctx.wp_shift
        else:
            rho0 = rho(ctx, x)
        vals = alpha_table(lambda b1, b2, xx: f_alpha_raw(ctx, b1, b2, n, xx, 0.0), x)
        return (rho0 * one + contract(vals)) / n**2

    # r^(0) = (1/N) sum_{alpha != 0} (E1(omega_alpha) + 2 pi i alpha2 / N) T_alpha (x) T_{-alpha}
    r0_vals = np.zeros((n, n), dtype=complex)
    if n > 1:
        r0_vals[nz] = _log_derivs(ctx, omega[nz], 1)[0] + TWO_PI_I * a2[nz] / n
    r0 = contract(r0_vals) / n
    r0.flags.writeable = False
    perm = permutation_operator(n)

    def x_coeffs(z):
        return r_fn(z) @ perm, m_fn(z) @ perm

    return RMatrixKernel(ev, n, ctx, deriv=deriv, r=r_fn, m=m_fn, r0=r0, x_coeffs=x_coeffs)


def f0_closed_form(ctx: EllipticContext, n: int, x) -> np.ndarray:
    """F^0(x) = d/dx r(x) in closed form.

    -(1/N) E2(x) 1 + (1/N^2) sum_{alpha != 0} phi_alpha(x, omega_alpha)
    (E1(x + omega_alpha) - E1(x) + 2 pi i d_tau omega_alpha) T_alpha (x) T_{-alpha},
    with d_tau omega_alpha = alpha2 / N.  Only the sum is scaled by 1/N^2 in
    print; the consistent factor is 1/N (see ``classical_parts``).
    """
    x = complex(x)
    check_regular(ctx, "x", x)
    tt = _tt_stack(n)
    e1x, e2x = _log_derivs(ctx, x, 1)
    out = -e2x * np.eye(n * n) / n
    for a1 in range(n):
        for a2 in range(n):
            if a1 == 0 and a2 == 0:
                continue
            w = (a1 + a2 * ctx.tau) / n
            ph = phi_alpha_raw(ctx, a1, a2, n, x, 0.0)
            out = out + ph * (_log_derivs(ctx, x + w, 1)[0] - e1x + TWO_PI_I * a2 / n) * tt[a1, a2] / n
    return out


@dataclass(frozen=True)
class ClassicalParts:
    r: np.ndarray
    m: np.ndarray
    f0: np.ndarray
    # max deviations of the closed forms from numerical limits of the kernel
    r_check: float
    m_check: float
    f0_check: float


def classical_parts(kernel: RMatrixKernel, x) -> ClassicalParts:
    """r(x), m(x) and F^0(x) = r'(x), each compared with a numerical limit."""
    x = complex(x)
    r_num, m_num = numeric_z_coeffs(kernel, x)
    r, m = kernel.r_matrix(x), kernel.m_matrix(x)
    f0_num = contour_coeff(kernel.r_matrix, x, 1, kernel.radius, kernel.points)
    if kernel.r is not None and kernel.deriv is not None:
        f0 = f0_closed_form(kernel.ctx, kernel.n_order, x)
    else:
        f0 = f0_num
    return ClassicalParts(r, m, f0, float(np.abs(r - r_num).max()), float(np.abs(m - m_num).max()),
                          float(np.abs(f0 - f0_num).max()))


# ---------------------------------------------------------------------------
# axioms and identities


def _rel(lhs: np.ndarray, rhs: np.ndarray) -> float:
    scale = max(float(np.abs(lhs).max()), float(np.abs(rhs).max()), 1.0)
    return float(np.abs(lhs - rhs).max() / scale)


def aybe_residual(kernel: RMatrixKernel, z, w, q) -> float:
    """R^z_12 R^w_23 = R^w_13 R^{z-w}_12 + R^{w-z}_23 R^z_13 with R_ij = R(q_i - q_j)."""
    n = kernel.n_order
    rr = lambda s, i, j: embed(kernel(s, q[i - 1] - q[j - 1]), i, j, n)
    lhs = rr(z, 1, 2) @ rr(w, 2, 3)
    rhs = rr(w, 1, 3) @ rr(z - w, 1, 2) + rr(w - z, 2, 3) @ rr(z, 1, 3)
    return _rel(lhs, rhs)


def qybe_residual(kernel: RMatrixKernel, z, q) -> float:
    """R^z_12 R^z_13 R^z_23 = R^z_23 R^z_13 R^z_12."""
    n = kernel.n_order
    rr = lambda i, j: embed(kernel(z, q[i - 1] - q[j - 1]), i, j, n)
    return _rel(rr(1, 2) @ rr(1, 3) @ rr(2, 3), rr(2, 3) @ rr(1, 3) @ rr(1, 2))


def fourier_residual(kernel: RMatrixKernel, z, x) -> float:
    """R^z_12(x) P_12 = R^x_12(z)."""
    return _rel(kernel(z, x) @ kernel.perm, kernel(x, z))


def unitarity_scalar(kernel: RMatrixKernel, z, x) -> tuple[complex, float]:
    """R^z_12(x) R^z_21(-x) = s 1; returns (s, deviation from a scalar)."""
    n = kernel.n_order
    prod = kernel(z, x) @ swap12(kernel(z, -x), n)
    s = complex(np.trace(prod) / n**2)
    return s, _rel(prod, s * np.eye(n * n))


def unitarity_residuals(kernel: RMatrixKernel, z, x) -> dict:
    """Residuals of the unitarity product against the wp(z) and wp(z/N) readings."""
    ctx, n = kernel.ctx, kernel.n_order
    s, dev = unitarity_scalar(kernel, z, x)
    out = {}
    for name, arg in (("wp(z)", z), ("wp(z/N)", z / n)):
        target = weierstrass_p(ctx, arg) - weierstrass_p(ctx, x)
        out[name] = max(dev, abs(s - target) / max(abs(target), 1.0))
    return out


def skew_residuals(kernel: RMatrixKernel, z, x) -> dict:
    n = kernel.n_order
    r0 = kernel.r_zero()
    return {
        "R12(z,x) = -R21(-z,-x)": _rel(kernel(z, x), -swap12(kernel(-z, -x), n)),
        "r12(x) = -r21(-x)": _rel(kernel.r_matrix(x), -swap12(kernel.r_matrix(-x), n)),
        "r0_12 = -r0_21": _rel(r0, -swap12(r0, n)),
        "m12(x) = m21(-x)": _rel(kernel.m_matrix(x), swap12(kernel.m_matrix(-x), n)),
    }


def trace_values(kernel: RMatrixKernel, z, x) -> dict:
    """Partial traces of R, r and m with their scalar values (deviation from scalar included)."""
    n = kernel.n_order
    one = np.eye(n)
    out = {}
    for name, mat in (("tr1 R", kernel(z, x)), ("tr2 R", None), ("tr1 r", kernel.r_matrix(x)),
                      ("tr1 m", kernel.m_matrix(x))):
        if mat is None:
            t = ptrace(kernel(z, x), n, 2)
        else:
            t = ptrace(mat, n, 1)
        val = complex(t[0, 0])
        out[name] = (val, _rel(t, val * one))
    return out


def trace_residuals(kernel: RMatrixKernel, z, x) -> dict:
    """Trace normalisations of the normalised kernel.

    tr R^z(x) = phi(z/N, x), tr r(x) = E1(x), tr m(x) = rho(x)/N.
    """
    ctx, n = kernel.ctx, kernel.n_order
    vals = trace_values(kernel, z, x)
    ph = kronecker_phi(ctx, z / n, x)
    targets = {"tr1 R": ph, "tr2 R": ph, "tr1 r": _log_derivs(ctx, complex(x), 1)[0],
               "tr1 m": rho(ctx, x) / n}
    return {k: max(vals[k][1], abs(vals[k][0] - targets[k]) / max(abs(targets[k]), 1.0)) for k in vals}


def printed_trace_residuals(kernel: RMatrixKernel, z, x) -> dict:
    """The literal forms tr R = phi(z, x) and tr m = rho(x)."""
    ctx = kernel.ctx
    vals = trace_values(kernel, z, x)
    targets = {"tr1 R": kronecker_phi(ctx, z, x), "tr1 m": rho(ctx, x)}
    return {k: abs(vals[k][0] - t) / max(abs(t), 1.0) for k, t in targets.items()}


def expansion_residuals(kernel: RMatrixKernel, z, x) -> dict:
    """Series coefficients: closed forms against Laurent coefficients of the kernel."""
    p = kernel.perm
    r_num, m_num = numeric_z_coeffs(kernel, x)
    x0, x1 = numeric_x_coeffs(kernel, z)
    r0, r1 = numeric_r_expansion(kernel)
    m0 = kernel.m_at_zero()
    return {
        "R^z(x) z^0 = r(x)": _rel(r_num, kernel.r_matrix(x)),
        "R^z(x) z^1 = m(x)": _rel(m_num, kernel.m_matrix(x)),
        "R^(z,0) = r(z) P": _rel(x0, kernel.r_matrix(z) @ p),
        "R^(z,1) = m(z) P": _rel(x1, kernel.m_matrix(z) @ p),
        "r^(0) = r^(0) P": _rel(kernel.r_zero(), kernel.r_zero() @ p),
        "r^(0) closed form": _rel(r0, kernel.r_zero()),
        "r^(1) = m(0) P": _rel(r1, m0 @ p),
    }


def derivative_residual(kernel: RMatrixKernel, z, x) -> dict:
    """F = dR/dx and dF/dx against Cauchy-integral derivatives."""
    return {
        "F = d_x R": _rel(kernel.F(z, x), numeric_x_derivative(kernel, z, x, 1)),
        "d_x F = d_x^2 R": _rel(kernel.F(z, x, 2), numeric_x_derivative(kernel, z, x, 2)),
    }


def bb_unnormalised(ctx: EllipticContext, n: int, z, x) -> np.ndarray:
    """R^BB(z, x) = sum_alpha phi_alpha(x, z + omega_alpha) T_alpha (x) T_{-alpha} = N R^{Nz}(x)."""
    return n * baxter_belavin(ctx, n)(n * z, x)


def heat_residual_r(ctx: EllipticContext, n: int, z, u, h: float | None = None,
                    normalised: bool = True) -> float:
    """Relative residual of the R-matrix heat equation by centred differences.

    For the normalised kernel the equation is 2 pi i d_tau R^z(u) = N d_z d_u R^z(u);
    for R^BB(z, u) it is 2 pi i d_tau R = d_z d_u R.
    """
    h = ctx.fd_step if h is None else h
    tau = ctx.tau
    if normalised:
        ev = lambda t, a, b: baxter_belavin(ctx.with_tau(t), n)(a, b)
        factor = n
    else:
        ev = lambda t, a, b: bb_unnormalised(ctx.with_tau(t), n, a, b)
        factor = 1
    d_tau = ((ev(tau + h, z, u) - ev(tau - h, z, u)) / (2 * h)
             + (ev(tau + 1j * h, z, u) - ev(tau - 1j * h, z, u)) / (2j * h)) / 2
    mixed = (ev(tau, z + h, u + h) - ev(tau, z + h, u - h) - ev(tau, z - h, u + h)
             + ev(tau, z - h, u - h)) / (4 * h * h)
    base = np.abs(ev(tau, z, u)).max()
    return float(np.abs(TWO_PI_I * d_tau - factor * mixed).max() / base)


@dataclass(frozen=True)
class IdentitySample:
    """Arguments for the degenerate identities: x, y and spectral data z, z_a, z_b."""

    x: complex
    y: complex
    z: complex
    za: complex
    zb: complex


def degeneration_sides(kernel: RMatrixKernel, s: IdentitySample) -> dict:
    """name -> (lhs, rhs) for each degenerate identity of the associative Yang-Baxter equation."""
    n = kernel.n_order
    e = lambda mat, i, j: embed(mat, i, j, n)
    p = kernel.perm
    p12, p23, p13 = e(p, 1, 2), e(p, 2, 3), e(p, 1, 3)
    r, m, r0, m00 = kernel.r_matrix, kernel.m_matrix, kernel.r_zero(), kernel.m_at_zero()
    R, F = kernel, kernel.F
    x, y, z, za, zb = s.x, s.y, s.z, s.za, s.zb
    zab, zba = za - zb, zb - za
    R0 = lambda w: kernel.expansion_x(w)[0]
    R1 = lambda w: kernel.expansion_x(w)[1]
    comm = lambda a, b: a @ b - b @ a
    dm = contour_coeff(m, x, 1, kernel.radius, kernel.points)
    dr = kernel_r_derivative(kernel, x)
    out = {}

    # classical Yang-Baxter with r_ij = r(q_i - q_j), q = (0, x, x + y) up to sign
    q = (x + y, y, 0.0)
    rq = lambda i, j: e(r(q[i - 1] - q[j - 1]), i, j)
    out["CYBE"] = (comm(rq(1, 2), rq(1, 3)) + comm(rq(1, 2), rq(2, 3)) + comm(rq(1, 3), rq(2, 3)),
                   np.zeros((n**3, n**3)))

    out["half CYBE"] = (e(r(x), 1, 2) @ e(r(x + y), 1, 3) - e(r(y), 2, 3) @ e(r(x), 1, 2)
                        + e(r(x + y), 1, 3) @ e(r(y), 2, 3),
                        e(m(x), 1, 2) + e(m(y), 2, 3) + e(m(x + y), 1, 3))

    out["half CYBE at y = 0"] = (e(r(x), 1, 2) @ e(r(x), 1, 3) - e(r0, 2, 3) @ e(r(x), 1, 2)
                                 + e(r(x), 1, 3) @ e(r0, 2, 3) + e(dr, 1, 3) @ p23,
                                 e(m(x), 1, 2) + e(m00, 2, 3) + e(m(x), 1, 3))

    out["[r12, m13] commutator"] = (
        comm(e(r(x), 1, 2), e(m(x), 1, 3)),
        comm(e(r0, 2, 3), e(m(x), 1, 2)) + comm(e(r0, 2, 3), e(m(x), 1, 3))
        + comm(e(m00, 2, 3), e(r(x), 1, 2)) + comm(e(dm, 1, 2), p23))

    out["R R^(0) exchange"] = (
        e(R(z - za, x), 1, 2) @ e(R0(z - zb), 2, 3),
        e(R(z - zb, x), 1, 3) @ e(R(zba, x), 1, 2) + e(R0(zab), 2, 3) @ e(R(z - za, x), 1, 3)
        + p23 @ e(F(z - za, x), 1, 3))

    out["R^(0) R exchange"] = (
        e(R0(z - za), 1, 2) @ e(R(z - zb, x), 2, 3),
        e(R(z - zb, x), 1, 3) @ e(R0(zba), 1, 2) + e(R(zab, x), 2, 3) @ e(R(z - za, x), 1, 3)
        + e(F(z - zb, x), 1, 3) @ p12)

    out["R R(-x) exchange"] = (
        e(R(z - za, x), 1, 2) @ e(R(z - zb, -x), 2, 3),
        e(R0(z - zb), 1, 3) @ e(R(zba, x), 1, 2) + e(R(zab, -x), 2, 3) @ e(R0(z - za), 1, 3)
        + e(F(zba, x), 3, 2) @ p13)

    out["F R(-x) exchange"] = (
        e(F(z - za, x), 1, 2) @ e(R(z - zb, -x), 2, 3) - e(R(z - za, x), 1, 2) @ e(F(z - zb, -x), 2, 3),
        e(R0(z - zb), 1, 3) @ e(F(zba, x), 1, 2) - e(F(zab, -x), 2, 3) @ e(R0(z - za), 1, 3)
        + e(F(zba, x, 2), 3, 2) @ p13)

    out["q3 -> q2 limit"] = (
        e(R(z - za, x), 1, 2) @ e(R1(z - zb), 2, 3) - e(F(z - za, x), 1, 2) @ e(R0(z - zb), 2, 3),
        e(R1(zab), 2, 3) @ e(R(z - za, x), 1, 3) - e(R(z - zb, x), 1, 3) @ e(F(zba, x), 1, 2)
        - 0.5 * p23 @ e(F(z - za, x, 2), 1, 3))

    out["q1 -> q2 limit"] = (
        e(R0(z - za), 1, 2) @ e(F(z - zb, x), 2, 3) - e(R1(z - za), 1, 2) @ e(R(z - zb, x), 2, 3),
        e(F(zab, x), 2, 3) @ e(R(z - za, x), 1, 3) - e(R(z - zb, x), 1, 3) @ e(R1(zba), 1, 2)
        + 0.5 * e(F(z - zb, x, 2), 1, 3) @ p12)
    return out


def kernel_r_derivative(kernel: RMatrixKernel, x) -> np.ndarray:
    """d/dx r(x): closed form for the Baxter-Belavin kernel, Cauchy integral otherwise."""
    if kernel.r is not None and kernel.deriv is not None:
        return f0_closed_form(kernel.ctx, kernel.n_order, x)
    return contour_coeff(kernel.r_matrix, x, 1, kernel.radius, kernel.points)


# ---------------------------------------------------------------------------
# verification reports


def _polar(rng, lo, hi):
    return rng.uniform(lo, hi) * np.exp(2j * np.pi * rng.uniform())


def identity_samples(count: int, seed: int = 0) -> list[IdentitySample]:
    """Random arguments kept clear of each other so that every expansion circle is pole free.

    x-type arguments have modulus in [0.15, 0.3]; spectral differences
    z - z_a, z - z_b and z_a - z_b have modulus at least 0.4.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        x, y = _polar(rng, 0.15, 0.3), _polar(rng, 0.15, 0.3)
        d1, d2 = _polar(rng, 0.4, 0.6), _polar(rng, 0.4, 0.6)
        if abs(x + y) < 0.15 or abs(d2 - d1) < 0.4:
            continue
        z = 0.1 + 0.05j
        out.append(IdentitySample(x, y, z, z - d1, z - d2))
    return out


def _record(name: str, kernel: RMatrixKernel, residuals, tol: float) -> dict:
    worst = float(max(residuals))
    return {"name": name, "N": kernel.n_order, "samples": len(residuals), "max_residual": worst,
            "pass": bool(worst < tol)}


def verify_axioms(kernel: RMatrixKernel, samples, tol: float = 1e-9) -> list[dict]:
    """Axioms, traces, skew-symmetry and series relations, one record per named predicate.

    Unitarity is checked with right-hand side wp(z) - wp(x); the wp(z/N)
    reading is available from ``unitarity_residuals``.
    """
    rows: dict[str, list[float]] = {}

    def add(name, val):
        rows.setdefault(name, []).append(float(val))

    for s in samples:
        zz, ww = s.za - s.z, s.zb - s.z
        add("AYBE", aybe_residual(kernel, zz, ww, (s.x + s.y, s.y, 0.0)))
        add("QYBE", qybe_residual(kernel, zz, (s.x + s.y, s.y, 0.0)))
        add("Fourier symmetry", fourier_residual(kernel, zz, s.x))
        add("unitarity", unitarity_residuals(kernel, zz, s.x)["wp(z)"])
        for k, v in skew_residuals(kernel, zz, s.x).items():
            add(f"skew {k}", v)
        for k, v in trace_residuals(kernel, zz, s.x).items():
            add(f"trace {k}", v)
        for k, v in expansion_residuals(kernel, zz, s.x).items():
            add(f"series {k}", v)
        for k, v in derivative_residual(kernel, zz, s.x).items():
            add(f"derivative {k}", v)
    return [_record(k, kernel, v, tol) for k, v in rows.items()]


def verify_degenerations(kernel: RMatrixKernel, samples, tol: float = 1e-9) -> list[dict]:
    """One record per degenerate identity of the associative Yang-Baxter equation."""
    rows: dict[str, list[float]] = {}
    for s in samples:
        for k, (lhs, rhs) in degeneration_sides(kernel, s).items():
            rows.setdefault(k, []).append(_rel(lhs, rhs))
    return [_record(k, kernel, v, tol) for k, v in rows.items()]


# ---------------------------------------------------------------------------
# Lax pair in R-matrix form


def _offdiag_block(kernel: RMatrixKernel, s: np.ndarray, z, q, order: int = 0) -> np.ndarray:
    """tr_2(S_2 X_12 P_12) with X = R^z(q) (order 0) or its q-derivatives."""
    x = kernel(z, q) if order == 0 else kernel.F(z, q, order)
    return tr2_with(x @ kernel.perm, s, kernel.n_order)


def _blocks(spec: ModelSpec, q, spins, kernel: RMatrixKernel, z, diag_fn, off_order: int,
            weight=None) -> np.ndarray:
    """Block grid [i, j] built from per-pole terms; ``weight[a]`` scales pole a."""
    n, m, npole = spec.n_inner, spec.m_blocks, spec.n_poles
    zs = spec.marked_points
    out = np.zeros((m, m, n, n), dtype=complex)
    for a in range(npole):
        w = 1.0 if weight is None else weight[a]
        if w == 0:
            continue
        za = z - zs[a]
        dmat = diag_fn(za)
        for i in range(m):
            out[i, i] += w * tr2_with(dmat, spins[a, i, i], n)
            for j in range(m):
                if i != j:
                    out[i, j] += w * _offdiag_block(kernel, spins[a, i, j], za, q[i] - q[j], off_order)
    return out


def _check_z(spec: ModelSpec, z):
    check_regular(spec.ctx, "z - z_a", complex(z) - np.array(spec.marked_points))


def rlax_build(spec: ModelSpec, state: PhaseState, kernel: RMatrixKernel) -> SpectralOperator:
    """L^{ij}(z) = delta_ij (p_i + sum_a tr_2(S^{ii,a}_2 r_12(z - z_a)))
    + (1 - delta_ij) sum_a tr_2(S^{ij,a}_2 R^{z - z_a}_12(q_ij) P_12)."""
    state.check(spec)
    mom = np.kron(np.diag(state.p), np.eye(spec.n_inner))

    def ev(z):
        _check_z(spec, z)
        return mom + blocks_to_full(_blocks(spec, state.q, state.spins, kernel, z, kernel.r_matrix, 0))

    return SpectralOperator(ev, tuple(spec.marked_points))


def rlax_m0(spec: ModelSpec, state: PhaseState, kernel: RMatrixKernel) -> SpectralOperator:
    """M0 blocks: m_12(z - z_a) on the diagonal, F^{z - z_a}_12(q_ij) P_12 off it."""
    state.check(spec)

    def ev(z):
        _check_z(spec, z)
        return blocks_to_full(_blocks(spec, state.q, state.spins, kernel, z, kernel.m_matrix, 1))

    return SpectralOperator(ev, tuple(spec.marked_points))


def rlax_m1a(spec: ModelSpec, state: PhaseState, kernel: RMatrixKernel, a: int) -> SpectralOperator:
    """M_{1,a} = -(1/N) times the pole-a part of L."""
    state.check(spec)
    weight = np.zeros(spec.n_poles)
    weight[a] = -1.0 / spec.n_inner

    def ev(z):
        _check_z(spec, z)
        return blocks_to_full(_blocks(spec, state.q, state.spins, kernel, z, kernel.r_matrix, 0, weight))

    return SpectralOperator(ev, tuple(spec.marked_points))


def rtop_inertia(kernel: RMatrixKernel, s: np.ndarray) -> np.ndarray:
    """J(S) = tr_2(m_12(0) S_2)."""
    return tr2_with(kernel.m_at_zero(), s, kernel.n_order)


def rtop_pair(kernel: RMatrixKernel, s: np.ndarray):
    """(L(z), M(z)) = (tr_2(r_12(z) S_2), tr_2(m_12(z) S_2))."""
    n = kernel.n_order
    return (lambda z: tr2_with(kernel.r_matrix(z), s, n),
            lambda z: tr2_with(kernel.m_matrix(z), s, n))


# ---------------------------------------------------------------------------
# Hamiltonians


def rlax_hamiltonians(spec: ModelSpec, state: PhaseState, kernel: RMatrixKernel) -> Hamiltonians:
    """H0, H_{1,a}, H_{2,a} from partial traces of r, m, R and F."""
    state.check(spec)
    n, m, npole = spec.n_inner, spec.m_blocks, spec.n_poles
    q, p, sp = state.q, state.p, state.spins
    zs = spec.marked_points
    perm = kernel.perm
    h0 = complex(np.sum(p**2) / 2)
    for a in range(npole):
        for b in range(npole):
            zab = zs[a] - zs[b]
            mm = kernel.m_at_zero() if a == b else kernel.m_matrix(zab)
            for i in range(m):
                h0 += 0.5 * tr12_with(mm, sp[a, i, i], sp[b, i, i])
                for j in range(m):
                    if i != j:
                        f21 = swap12(kernel.F(zs[b] - zs[a], q[i] - q[j]), n)
                        h0 += 0.5 * tr12_with(f21 @ perm, sp[a, i, j], sp[b, j, i])
    h1 = []
    for a in range(npole):
        val = sum(p[i] * np.trace(sp[a, i, i]) for i in range(m)) / n
        for b in range(npole):
            if b == a:
                continue
            zab = zs[a] - zs[b]
            rr = kernel.r_matrix(zab)
            for i in range(m):
                val += tr12_with(rr, sp[a, i, i], sp[b, i, i]) / n
                for j in range(m):
                    if i != j:
                        val += tr12_with(kernel(zab, q[j] - q[i]) @ perm, sp[a, i, j], sp[b, j, i]) / n
        h1.append(complex(val))
    h2 = tuple(complex(sum(tr12_with(perm, sp[a, i, j], sp[a, j, i]) for i in range(m) for j in range(m))
                       / (2 * n)) for a in range(npole))
    return Hamiltonians(h0, tuple(h1), h2)


# ---------------------------------------------------------------------------
# equations of motion


def _spin_rhs(spec, q, sp, a, kernel, diag_mat, off_fn, others):
    """Common shape of the spin equations for pole a.

    sum_b [S^{ij,a} tr_2(S^{jj,b} D_ab) - tr_2(S^{ii,b} D_ab) S^{ij,a}]
    + sum_b [sum_{k != j} S^{ik,a} tr_2(S^{kj,b} O_ab(q_kj) P) - sum_{k != i} tr_2(S^{ik,b} O_ab(q_ik) P) S^{kj,a}]
    """
    n, m = spec.n_inner, spec.m_blocks
    perm = kernel.perm
    out = np.zeros((m, m, n, n), dtype=complex)
    for b in others:
        dmat = diag_mat(b)
        dd = [tr2_with(dmat, sp[b, k, k], n) for k in range(m)]
        off = {(i, k): tr2_with(off_fn(b, q[i] - q[k]) @ perm, sp[b, i, k], n)
               for i in range(m) for k in range(m) if i != k}
        for i in range(m):
            for j in range(m):
                acc = sp[a, i, j] @ dd[j] - dd[i] @ sp[a, i, j]
                for k in range(m):
                    if k != j:
                        acc = acc + sp[a, i, k] @ off[(k, j)]
                    if k != i:
                        acc = acc - off[(i, k)] @ sp[a, k, j]
                out[i, j] += acc
    return out


def rlax_eom_h0(spec: ModelSpec, state: PhaseState, kernel: RMatrixKernel) -> Tangent:
    """H0 flow in block form."""
    state.check(spec)
    n, m, npole = spec.n_inner, spec.m_blocks, spec.n_poles
    q, p, sp = state.q, state.p, state.spins
    zs = spec.marked_points
    perm = kernel.perm
    dp = np.zeros(m, dtype=complex)
    for i in range(m):
        for k in range(m):
            if k == i:
                continue
            for a in range(npole):
                for b in range(npole):
                    d21 = swap12(kernel.F(zs[b] - zs[a], q[i] - q[k], 2), n)
                    dp[i] -= tr12_with(d21 @ perm, sp[a, i, k], sp[b, k, i])
    ds = np.zeros_like(sp)
    for a in range(npole):
        mz = lambda b: kernel.m_at_zero() if b == a else kernel.m_matrix(zs[a] - zs[b])
        fz = lambda b, x: kernel.F(zs[a] - zs[b], x)
        ds[a] = _spin_rhs(spec, q, sp, a, kernel, mz, fz, range(npole))
    return Tangent(p.copy(), dp, ds)


def rlax_eom_h1a(spec: ModelSpec, state: PhaseState, kernel: RMatrixKernel, a: int,
                 dp_order: int = 1) -> Tangent:
    """H_{1,a} flow in block form.

    ``dp_order`` is the x-derivative order of R in the momentum equation:
    1 is the derivative of the Hamiltonian, 2 the printed d_q F.
    """
    state.check(spec)
    n, m, npole = spec.n_inner, spec.m_blocks, spec.n_poles
    q, p, sp = state.q, state.p, state.spins
    zs = spec.marked_points
    perm = kernel.perm
    others = [b for b in range(npole) if b != a]
    dq = np.array([np.trace(sp[a, i, i]) for i in range(m)]) / n
    dp = np.zeros(m, dtype=complex)
    for i in range(m):
        for k in range(m):
            if k == i:
                continue
            for b in others:
                x_ba = swap12(kernel.F(zs[b] - zs[a], q[i] - q[k], dp_order), n)
                x_ab = swap12(kernel.F(zs[a] - zs[b], q[i] - q[k], dp_order), n)
                dp[i] += (tr12_with(x_ba @ perm, sp[a, i, k], sp[b, k, i])
                          - tr12_with(x_ab @ perm, sp[b, i, k], sp[a, k, i])) / n
    ds = np.zeros_like(sp)
    pdiff = (p[:, None] - p[None, :])[:, :, None, None]
    ds[a] = -pdiff * sp[a] / n
    ds[a] += _spin_rhs(spec, q, sp, a, kernel, lambda b: kernel.r_matrix(zs[a] - zs[b]),
                       lambda b, x: kernel(zs[a] - zs[b], x), others) / n
    for b in others:
        # the b != a equation has the roles of a and b exchanged and the opposite sign
        ds[b] = -_spin_rhs(spec, q, sp, b, kernel, lambda c: kernel.r_matrix(zs[b] - zs[a]),
                           lambda c, x: kernel(zs[b] - zs[a], x), [a]) / n
    return Tangent(dq, dp, ds)


# ---------------------------------------------------------------------------
# Lax equations


def rlax_derivative(spec: ModelSpec, state: PhaseState, kernel: RMatrixKernel,
                    tangent: Tangent) -> SpectralOperator:
    """Chain-rule derivative of the R-matrix Lax matrix along a tangent vector."""
    n = spec.n_inner
    dq = np.asarray(tangent.dq, dtype=complex)
    dqij = dq[:, None] - dq[None, :]
    qspins = state.spins * dqij[None, :, :, None, None]
    mom = np.kron(np.diag(np.asarray(tangent.dp, dtype=complex)), np.eye(n))
    zero = lambda x: np.zeros((n * n, n * n), dtype=complex)

    def ev(z):
        _check_z(spec, z)
        blocks = _blocks(spec, state.q, tangent.dspins, kernel, z, kernel.r_matrix, 0)
        blocks += _blocks(spec, state.q, qspins, kernel, z, zero, 1)
        return mom + blocks_to_full(blocks)

    return SpectralOperator(ev, tuple(spec.marked_points))


def rlax_unwanted_h0(spec: ModelSpec, state: PhaseState, kernel: RMatrixKernel,
                     sign: float = -1.0) -> SpectralOperator:
    """sign * (1/2) sum E_ij (x) tr_23(S^{ij,b}_2 (S^{ii,a}_3 - S^{jj,a}_3) d_q F^{z - z_b}_12(q_ij) P_12).

    The Lax equation holds with sign = -1.
    """
    n = spec.n_inner
    tot = np.einsum("aiikk->i", state.spins)
    weight = sign * 0.5 * (tot[:, None] - tot[None, :])
    sp = state.spins * weight[None, :, :, None, None]
    zero = lambda x: np.zeros((n * n, n * n), dtype=complex)

    def ev(z):
        _check_z(spec, z)
        return blocks_to_full(_blocks(spec, state.q, sp, kernel, z, zero, 2))

    return SpectralOperator(ev, tuple(spec.marked_points))


def rlax_unwanted_h1a(spec: ModelSpec, state: PhaseState, kernel: RMatrixKernel, a: int,
                      sign: float = -1.0) -> SpectralOperator:
    """sign * (1/N) sum E_ij (x) tr_23(S^{ij,a}_2 (S^{jj,b}_3 - S^{ii,b}_3) F^{z - z_a}_12(q_ij) P_12).

    The Lax equation holds with sign = -1.
    """
    n = spec.n_inner
    tot = np.einsum("aiikk->i", state.spins)
    weight = sign * (tot[None, :] - tot[:, None]) / n
    sp = np.zeros_like(state.spins)
    sp[a] = state.spins[a] * weight[:, :, None, None]
    zero = lambda x: np.zeros((n * n, n * n), dtype=complex)

    def ev(z):
        _check_z(spec, z)
        return blocks_to_full(_blocks(spec, state.q, sp, kernel, z, zero, 1))

    return SpectralOperator(ev, tuple(spec.marked_points))


def _commutator(lax, mop):
    def ev(z):
        lz, mz = lax(z), mop(z)
        return lz @ mz - mz @ lz

    return ev


def rlax_residuals(spec: ModelSpec, state: PhaseState, kernel: RMatrixKernel, flow: str, z_samples,
                   a: int = 0, pure: bool = False, sign: float | None = None) -> float:
    """max_z |dL/dt - [L, M] - unwanted| / |dL/dt| for flow "h0" or "h1a"."""
    lax = rlax_build(spec, state, kernel)
    if flow == "h0":
        tangent = rlax_eom_h0(spec, state, kernel)
        mop = rlax_m0(spec, state, kernel)
        extra = rlax_unwanted_h0(spec, state, kernel, -1.0 if sign is None else sign)
    elif flow == "h1a":
        tangent = rlax_eom_h1a(spec, state, kernel, a)
        mop = rlax_m1a(spec, state, kernel, a)
        extra = rlax_unwanted_h1a(spec, state, kernel, a, -1.0 if sign is None else sign)
    else:
        raise ValueError(f"unknown flow {flow!r}")
    parts = [_commutator(lax, mop)]
    if not pure:
        parts.append(extra)
    return _residual(rlax_derivative(spec, state, kernel, tangent), parts, z_samples)
