"""Degenerations of the general model.

Standalone builders for the spinless and spin Calogero-Moser models, the
Gaudin model and the gl_N top, the multispin Calogero-Moser model (N = 1),
the mixed model (n = 1) and the interacting tops (rank-one residue).  Each
builder works from its own formulas; :func:`scheme_arrow_residuals` compares
them with each other and with :mod:`ellgaudin.lax`.

Matrix spins use the gl Poisson structure
``{S_ij, S_kl} = S_kj delta_il - S_il delta_kj``, so a Hamiltonian H(S)
generates ``dS/dt = [S, (dH/dS)^T]``.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .elliptic import (
    EllipticContext,
    _f_parts,
    _log_derivs,
    _phi_raw,
    check_regular,
    f_alpha_raw,
    phi_alpha_raw,
)
from .lax import SpectralOperator
from .torus import build_basis, from_coeffs, kappa_table, negate_coeffs, shifted_index_tables, to_coeffs


class LaxPair(NamedTuple):
    l: SpectralOperator
    m: SpectralOperator


class LaxTriple(NamedTuple):
    l: SpectralOperator
    m0: SpectralOperator
    m1: tuple  # one M_{1,a} per marked point


class TopModel(NamedTuple):
    l: SpectralOperator
    m: SpectralOperator
    j: np.ndarray  # J(S)
    h: complex


# ---------------------------------------------------------------------------
# small helpers


def _c(x) -> np.ndarray:
    return np.asarray(x, dtype=complex)


def _pairwise(ctx: EllipticContext, q) -> tuple[np.ndarray, np.ndarray]:
    """(q_ij with a harmless diagonal placeholder, off-diagonal mask)."""
    q = _c(q)
    m = q.size
    off = ~np.eye(m, dtype=bool)
    qij = q[:, None] - q[None, :]
    if m > 1:
        check_regular(ctx, "q_i - q_j", qij[off])
    return np.where(off, qij, 0.5), off.astype(float)


def _e1(ctx, x):
    check_regular(ctx, "z", x)
    return _log_derivs(ctx, _c(x), 1)[0]


def _e2(ctx, x, order=1):
    check_regular(ctx, "z", x)
    return _log_derivs(ctx, _c(x), order)[order]


def _rho(ctx, x):
    check_regular(ctx, "z", x)
    e1, e2 = _log_derivs(ctx, _c(x), 1)
    return (e1**2 - e2 - ctx.wp_shift) / 2


def _wp(ctx, x):
    return _e2(ctx, x) + ctx.wp_shift


def _phi(ctx, z, u):
    check_regular(ctx, "z", z)
    check_regular(ctx, "u", u)
    return _phi_raw(ctx, z, u)


def _f(ctx, z, u, order=1):
    """f (order 1) or f' (order 2); z = 0 allowed."""
    check_regular(ctx, "u", u)
    return _f_parts(ctx, _c(z), _c(u), order)


def _operator(fn, poles=()) -> SpectralOperator:
    return SpectralOperator(fn, tuple(poles))


def _basis_kernel(ctx, n_order: int, x, u, kind: str, skip_zero: bool = True) -> np.ndarray:
    """Table [..., a1, a2] of phi_alpha, f_alpha or f'_alpha at (x, omega_alpha + u)."""
    r = np.arange(n_order)
    x = _c(x)[..., None, None]
    u = _c(u)[..., None, None]
    shape = np.broadcast_shapes(x.shape, u.shape, (n_order, n_order))
    sel = np.ones(shape, dtype=bool)
    if skip_zero:
        sel[..., 0, 0] = False
    a1 = np.broadcast_to(r[:, None], shape)[sel]
    a2 = np.broadcast_to(r[None, :], shape)[sel]
    xb = np.broadcast_to(x, shape)[sel]
    ub = np.broadcast_to(u, shape)[sel]
    out = np.zeros(shape, dtype=complex)
    if kind == "phi":
        out[sel] = phi_alpha_raw(ctx, a1, a2, n_order, xb, ub)
    else:
        out[sel] = f_alpha_raw(ctx, a1, a2, n_order, xb, ub, order=1 if kind == "f" else 2)
    return out


def _from_table(table: np.ndarray, n_order: int) -> np.ndarray:
    return from_coeffs(build_basis(n_order), table)


def gl_flow(hamiltonian: Callable, q, p, spins, h: float = 1e-3):
    """(dq, dp, dspins) generated by ``hamiltonian(q, p, spins)`` for stacked gl spins.

    Independent brute-force oracle: each spin matrix S^a carries its own copy
    of the gl Poisson structure, q and p are canonical with {p_i, q_j} = delta_ij.
    The Hamiltonian must be at most quadratic in the spins.
    """
    from .brackets import _gradient_quadratic, _gradient_smooth

    q, p, spins = _c(q), _c(p), _c(spins)
    grad = _gradient_quadratic(lambda s: hamiltonian(q, p, s), spins).reshape(spins.shape)
    gt = np.swapaxes(grad, -1, -2)
    ds = spins @ gt - gt @ spins
    dq = _gradient_smooth(lambda pp: hamiltonian(q, pp, spins), p, h)
    dp = -_gradient_smooth(lambda qq: hamiltonian(qq, p, spins), q, h)
    return dq, dp, ds


def lax_equation_residual(dl: Callable, lax: Callable, mop: Callable, z_samples,
                          extra: Callable | None = None) -> float:
    """max_z |dL - [L, M] - extra| / max(|dL|, 1) in the Frobenius norm."""
    worst = 0.0
    for z in z_samples:
        lz, mz, d = lax(z), mop(z), dl(z)
        r = d - (lz @ mz - mz @ lz)
        if extra is not None:
            r = r - extra(z)
        worst = max(worst, float(np.linalg.norm(r) / max(np.linalg.norm(d), 1.0)))
    return worst


def rk4_path(rhs: Callable, y0: np.ndarray, t_end: float, dt: float) -> list:
    """Fixed-step RK4 for dy/dt = rhs(y); returns the list of states."""
    y = _c(y0).copy()
    path = [y.copy()]
    for _ in range(int(round(t_end / dt))):
        k1 = rhs(y)
        k2 = rhs(y + dt / 2 * k1)
        k3 = rhs(y + dt / 2 * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        path.append(y.copy())
    return path


# ---------------------------------------------------------------------------
# spinless Calogero-Moser


def cm_lax(ctx: EllipticContext, q, p, nu) -> LaxPair:
    """Krichever's Lax pair; M carries the diagonal d_i = sum_{k != i} E2(q_ik)."""
    qij, off = _pairwise(ctx, q)
    p = _c(p)
    d = np.sum(off * _e2(ctx, qij), axis=1)

    def lmat(z):
        return np.diag(p + nu * _e1(ctx, z)) + nu * off * _phi(ctx, z, qij)

    def mmat(z):
        check_regular(ctx, "z", z)
        return np.diag(nu * d) + nu * off * _f(ctx, z, qij)

    return LaxPair(_operator(lmat, (0,)), _operator(mmat, (0,)))


def cm_hamiltonian(ctx: EllipticContext, q, p, nu) -> complex:
    qij, off = _pairwise(ctx, q)
    return complex(np.sum(_c(p) ** 2) / 2 - nu**2 * np.sum(np.triu(off) * _wp(ctx, qij)))


def cm_eom(ctx: EllipticContext, q, p, nu):
    """(dq, dp) with dp_i = nu^2 sum_{k != i} wp'(q_ik)."""
    qij, off = _pairwise(ctx, q)
    return _c(p).copy(), nu**2 * np.sum(off * _e2(ctx, qij, 2), axis=1)


def cm_lax_derivative(ctx: EllipticContext, q, nu, dq, dp) -> SpectralOperator:
    qij, off = _pairwise(ctx, q)
    dq = _c(dq)
    dqij = dq[:, None] - dq[None, :]
    return _operator(lambda z: np.diag(_c(dp)) + nu * off * dqij * _f(ctx, z, qij))


def cm_lax_residual(ctx: EllipticContext, q, p, nu, z_samples) -> float:
    pair = cm_lax(ctx, q, p, nu)
    dl = cm_lax_derivative(ctx, q, nu, *cm_eom(ctx, q, p, nu))
    return lax_equation_residual(dl, pair.l, pair.m, z_samples)


def cm_trace_generator(ctx: EllipticContext, q, p, nu, z) -> complex:
    """tr L(z)^2 / 2 minus its p-linear part nu E1(z) sum p.

    Equals H^CM plus a state-independent function of z
    (see :func:`cm_trace_offset`).
    """
    lz = cm_lax(ctx, q, p, nu).l(z)
    return complex(np.trace(lz @ lz) / 2 - nu * _e1(ctx, z) * np.sum(p))


def cm_trace_offset(ctx: EllipticContext, m: int, nu, z) -> complex:
    """nu^2 (M E1(z)^2 + M (M - 1) wp(z)) / 2, the part of tr L^2 / 2 free of dynamics."""
    return complex(nu**2 * (m * _e1(ctx, z) ** 2 + m * (m - 1) * _wp(ctx, z)) / 2)


# ---------------------------------------------------------------------------
# spin Calogero-Moser


def spin_cm_lax(ctx: EllipticContext, q, p, spins) -> LaxPair:
    qij, off = _pairwise(ctx, q)
    p, s = _c(p), _c(spins)

    def lmat(z):
        return np.diag(p + np.diag(s) * _e1(ctx, z)) + off * s * _phi(ctx, z, qij)

    def mmat(z):
        check_regular(ctx, "z", z)
        return off * s * _f(ctx, z, qij)

    return LaxPair(_operator(lmat, (0,)), _operator(mmat, (0,)))


def spin_cm_hamiltonian(ctx: EllipticContext, q, p, spins) -> complex:
    qij, off = _pairwise(ctx, q)
    s = _c(spins)
    return complex(np.sum(_c(p) ** 2) / 2 - np.sum(np.triu(off) * s * s.T * _wp(ctx, qij)))


def spin_cm_eom(ctx: EllipticContext, q, p, spins, exact: bool = False):
    """(dq, dp, dS) of the spin CM model.

    The default is the printed system, in which dS_ij keeps only the k != i, j
    terms.  ``exact`` adds S_ij (S_jj - S_ii) wp(q_ij), which makes it the
    bracket flow of the Hamiltonian; the two agree when all S_ii are equal.
    """
    qij, off = _pairwise(ctx, q)
    s = _c(spins)
    wp = off * _wp(ctx, qij)
    dp = np.sum(s * s.T * off * _e2(ctx, qij, 2), axis=1)
    # sum_{k != i, j} S_ik S_kj (wp(q_ik) - wp(q_jk)); wp is zero on the diagonal
    # the products include k = j and k = i respectively; remove those terms
    ds = (s * wp) @ s - s @ (wp * s)
    diag = np.diag(s)
    ds = ds - wp * s * (diag[None, :] - diag[:, None])
    ds = ds * off
    if exact:
        ds = ds + wp * s * (diag[None, :] - diag[:, None])
    return _c(p).copy(), dp, ds


def spin_cm_unwanted(ctx: EllipticContext, q, spins, sign: float = -1.0) -> SpectralOperator:
    """sign * sum_ij E_ij (S_ii - S_jj) S_ij E1(z) f(z, q_ij).

    The Lax equation with the printed equations of motion holds for sign = -1.
    """
    qij, off = _pairwise(ctx, q)
    s = _c(spins)
    d = np.diag(s)
    w = sign * (d[:, None] - d[None, :]) * s * off
    return _operator(lambda z: w * _e1(ctx, z) * _f(ctx, z, qij))


def spin_cm_lax_derivative(ctx: EllipticContext, q, spins, dq, dp, dspins) -> SpectralOperator:
    qij, off = _pairwise(ctx, q)
    s, ds, dq = _c(spins), _c(dspins), _c(dq)
    dqij = dq[:, None] - dq[None, :]

    def ev(z):
        return (np.diag(_c(dp) + np.diag(ds) * _e1(ctx, z))
                + off * (ds * _phi(ctx, z, qij) + s * dqij * _f(ctx, z, qij)))

    return _operator(ev)


def spin_cm_lax_residual(ctx: EllipticContext, q, p, spins, z_samples, pure: bool = False) -> float:
    pair = spin_cm_lax(ctx, q, p, spins)
    dl = spin_cm_lax_derivative(ctx, q, spins, *spin_cm_eom(ctx, q, p, spins))
    extra = None if pure else spin_cm_unwanted(ctx, q, spins)
    return lax_equation_residual(dl, pair.l, pair.m, z_samples, extra)


# ---------------------------------------------------------------------------
# Gaudin model and gl_N top


def gaudin_coeffs(n_order: int, spins) -> np.ndarray:
    """Coefficients S^a_alpha of each residue, with the scalar alpha = 0 part dropped."""
    c = to_coeffs(build_basis(n_order), _c(spins))
    c[..., 0, 0] = 0
    return c


def _gaudin_pair_kernel(ctx, n_order, zs, kind):
    """Table [a, b, alpha] at z_ab; phi entries with a == b are zero."""
    zs = _c(zs)
    x = zs[:, None] - zs[None, :]
    same = np.eye(zs.size, dtype=bool)
    if kind == "phi":
        x = np.where(same, 0.3137 + 0.2719 * ctx.tau, x)  # placeholder, zeroed below
        out = _basis_kernel(ctx, n_order, x, 0, "phi")
        out[same] = 0
        return out
    return _basis_kernel(ctx, n_order, x, 0, kind)


def gaudin_lax(ctx: EllipticContext, n_order: int, marked_points, spins) -> LaxTriple:
    """L = sum_a sum_{alpha != 0} S^a_alpha T_alpha phi_alpha(z - z_a, omega_alpha).

    M0 = sum_a sum_{alpha != 0} S^a_alpha T_alpha f_alpha(z - z_a, omega_alpha) and
    M_{1,a} = sum_{alpha != 0} S^a_alpha T_alpha phi_alpha(z - z_a, omega_alpha).
    """
    zs = _c(marked_points)
    c = gaudin_coeffs(n_order, spins)
    t = build_basis(n_order).t_matrices

    def kern(z, kind):
        x = _c(z) - zs
        check_regular(ctx, "z - z_a", x)
        return _basis_kernel(ctx, n_order, x, 0, kind)

    def lmat(z):
        return np.einsum("axy,axy,xyrs->rs", c, kern(z, "phi"), t)

    def m0(z):
        return np.einsum("axy,axy,xyrs->rs", c, kern(z, "f"), t)

    def m1(a):
        return _operator(lambda z: np.einsum("xy,xy,xyrs->rs", c[a], kern(z, "phi")[a], t), zs)

    return LaxTriple(_operator(lmat, zs), _operator(m0, zs), tuple(m1(a) for a in range(zs.size)))


def gaudin_hamiltonians(ctx: EllipticContext, n_order: int, marked_points, spins):
    """(H0, (H_{1,a})) with H_{1,a} = sum_{b != a} sum_alpha S^a_alpha S^b_{-alpha} phi_alpha(z_ba, omega_alpha)."""
    c = gaudin_coeffs(n_order, spins)
    neg = negate_coeffs(c, n_order)
    ff = _gaudin_pair_kernel(ctx, n_order, marked_points, "f")
    ph = _gaudin_pair_kernel(ctx, n_order, marked_points, "phi")
    h0 = 0.5 * np.einsum("axy,bxy,baxy->", c, neg, ff)
    h1 = tuple(complex(np.einsum("xy,bxy,bxy->", c[a], neg, ph[:, a])) for a in range(c.shape[0]))
    return complex(h0), h1


def _gaudin_sums(ctx, n_order, marked_points, spins, kind):
    """K[a, b] = sum_beta S^b_beta T_beta g_beta(z_ab, omega_beta) as matrices."""
    c = gaudin_coeffs(n_order, spins)
    kern = _gaudin_pair_kernel(ctx, n_order, marked_points, kind)
    return np.einsum("bxy,abxy,xyrs->abrs", c, kern, build_basis(n_order).t_matrices)


def gaudin_eom_h0(ctx: EllipticContext, n_order: int, marked_points, spins) -> np.ndarray:
    """dS^a = sum_b [S^a, sum_beta S^b_beta T_beta f_beta(z_ab, omega_beta)]."""
    s = _c(spins)
    k = _gaudin_sums(ctx, n_order, marked_points, spins, "f").sum(axis=1)
    return s @ k - k @ s


def gaudin_eom_h1a(ctx: EllipticContext, n_order: int, marked_points, spins, a: int) -> np.ndarray:
    s = _c(spins)
    if not 0 <= a < s.shape[0]:
        raise IndexError(f"marked point index {a} out of range")
    k = _gaudin_sums(ctx, n_order, marked_points, spins, "phi")
    out = np.zeros_like(s)
    for b in range(s.shape[0]):
        if b == a:
            continue
        out[a] -= s[a] @ k[a, b] - k[a, b] @ s[a]
        out[b] = s[b] @ k[b, a] - k[b, a] @ s[b]
    return out


def gaudin_lax_residual(ctx: EllipticContext, n_order: int, marked_points, spins, flow: str,
                        z_samples, a: int = 0) -> float:
    """Residual of the Lax equation for flow "h0" or "h1a" (with index ``a``)."""
    lax = gaudin_lax(ctx, n_order, marked_points, spins)
    if flow == "h0":
        ds, mop = gaudin_eom_h0(ctx, n_order, marked_points, spins), lax.m0
    elif flow == "h1a":
        ds, mop = gaudin_eom_h1a(ctx, n_order, marked_points, spins, a), lax.m1[a]
    else:
        raise ValueError(f"unknown flow {flow!r}")
    dl = gaudin_lax(ctx, n_order, marked_points, ds).l
    return lax_equation_residual(dl, lax.l, mop, z_samples)


def gaudin_bracket_tensor(n_order: int, n_poles: int) -> np.ndarray:
    """{S^a_alpha, S^b_beta} = delta^{ab} (kappa_{alpha,beta} - kappa_{beta,alpha}) S^a_{alpha+beta}.

    Dense tensor over coordinates flattened as (a, alpha1, alpha2).
    """
    kap = kappa_table(n_order)
    r1, r2, sign = shifted_index_tables(n_order)["plus"]
    size = n_poles * n_order**2
    tensor = np.zeros((size, size, size), dtype=complex)
    shape = (n_poles, n_order, n_order)
    for a in range(n_poles):
        for x1, x2, y1, y2 in np.ndindex(n_order, n_order, n_order, n_order):
            val = kap[x1, x2, y1, y2] - kap[y1, y2, x1, x2]
            if abs(val) < 1e-15:
                continue
            xi = np.ravel_multi_index((a, x1, x2), shape)
            yi = np.ravel_multi_index((a, y1, y2), shape)
            zi = np.ravel_multi_index((a, r1[x1, x2, y1, y2], r2[x1, x2, y1, y2]), shape)
            tensor[xi, yi, zi] += sign[x1, x2, y1, y2] * val
    return tensor


def gaudin_bracket_flow(n_order: int, coeffs, hamiltonian: Callable) -> np.ndarray:
    """Coefficient velocities of ``hamiltonian(coeffs)`` (quadratic) under the Gaudin bracket."""
    from .brackets import _gradient_quadratic

    c = _c(coeffs)
    tensor = gaudin_bracket_tensor(n_order, c.shape[0])
    g = _gradient_quadratic(hamiltonian, c)
    return np.einsum("y,yxz,z->x", g, tensor, c.ravel()).reshape(c.shape)


def top_inertia(ctx: EllipticContext, n_order: int) -> np.ndarray:
    """J_alpha = -E2(omega_alpha) on representatives, zero at alpha = 0."""
    r = np.arange(n_order)
    w = (r[:, None] + r[None, :] * ctx.tau) / n_order
    w[0, 0] = 0.5  # placeholder
    j = -_e2(ctx, w)
    j[0, 0] = 0
    return j


def top_rhs(ctx: EllipticContext, n_order: int, spin) -> np.ndarray:
    """dS/dt = [S, J(S)]."""
    s = _c(spin)
    c = to_coeffs(build_basis(n_order), s)
    js = _from_table(c * top_inertia(ctx, n_order), n_order)
    return s @ js - js @ s


def top_pair(ctx: EllipticContext, n_order: int, spin) -> TopModel:
    """Lax pair, J(S) and H = tr(S J(S)) / 2 of the gl_N top (scalar part of S ignored)."""
    c = gaudin_coeffs(n_order, spin)
    s = _from_table(c, n_order)
    js = _from_table(c * top_inertia(ctx, n_order), n_order)
    t = build_basis(n_order).t_matrices

    def lmat(z):
        check_regular(ctx, "z", z)
        return np.einsum("xy,xy,xyrs->rs", c, _basis_kernel(ctx, n_order, z, 0, "phi"), t)

    def mmat(z):
        check_regular(ctx, "z", z)
        return np.einsum("xy,xy,xyrs->rs", c, _basis_kernel(ctx, n_order, z, 0, "f"), t)

    return TopModel(_operator(lmat, (0,)), _operator(mmat, (0,)), js, complex(np.trace(s @ js) / 2))


def top_lax_residual(ctx: EllipticContext, n_order: int, spin, z_samples) -> float:
    top = top_pair(ctx, n_order, spin)
    dl = top_pair(ctx, n_order, top_rhs(ctx, n_order, spin)).l
    return lax_equation_residual(dl, top.l, top.m, z_samples)


# ---------------------------------------------------------------------------
# multispin Calogero-Moser (N = 1)


def _multi_tables(ctx, zs, q):
    """Pair tables at x = z_ab: E1, rho, phi(x, q_ij), f(x, q_ij), f'(x, q_ij)."""
    zs = _c(zs)
    npole = zs.size
    qij, off = _pairwise(ctx, q)
    x = zs[:, None] - zs[None, :]
    same = np.eye(npole, dtype=bool)
    xs = np.where(same, 0.3137 + 0.2719 * ctx.tau, x)  # placeholder on a == b, zeroed
    if npole > 1:
        check_regular(ctx, "z_a - z_b", x[~same])
    e1 = np.where(same, 0, _log_derivs(ctx, xs, 1)[0])
    rho = np.where(same, 0, _rho(ctx, xs))
    ph = _phi(ctx, xs[:, :, None, None], qij) * (~same)[:, :, None, None] * off
    f = _f(ctx, x[:, :, None, None], qij) * off
    fp = _f(ctx, x[:, :, None, None], qij, 2) * off
    return e1, rho, ph, f, fp, off


def multispin_lax(ctx: EllipticContext, marked_points, q, p, spins) -> LaxTriple:
    """L, M0 and M_{1,a} of the multispin CM model; spins has shape (n, M, M)."""
    zs = _c(marked_points)
    qij, off = _pairwise(ctx, q)
    p, s = _c(p), _c(spins)
    diag = np.einsum("aii->ai", s)

    def shifts(z):
        x = _c(z) - zs
        check_regular(ctx, "z - z_a", x)
        return x

    def lmat(z):
        x = shifts(z)
        e1 = _log_derivs(ctx, x, 1)[0]
        ph = _phi(ctx, x[:, None, None], qij)
        return np.diag(p + diag.T @ e1) + off * np.einsum("aij,aij->ij", s, ph)

    def m0(z):
        x = shifts(z)
        f = _f(ctx, x[:, None, None], qij)
        return np.diag(diag.T @ _rho(ctx, x)) + off * np.einsum("aij,aij->ij", s, f)

    def m1(a):
        def ev(z):
            x = shifts(z)[a]
            return -np.diag(diag[a] * _e1(ctx, x)) - off * s[a] * _phi(ctx, x, qij)
        return _operator(ev, zs)

    return LaxTriple(_operator(lmat, zs), _operator(m0, zs), tuple(m1(a) for a in range(zs.size)))


def multispin_hamiltonians(ctx: EllipticContext, marked_points, q, p, spins, literal: bool = False):
    """(H0, (H_{1,a})).  Without ``literal`` H0 includes (c0/2) sum_{a,i} (S^a_ii)^2."""
    s = _c(spins)
    e1, rho, ph, f, _, off = _multi_tables(ctx, marked_points, q)
    diag = np.einsum("aii->ai", s)
    p = _c(p)
    h0 = np.sum(p**2) / 2 + 0.5 * np.einsum("ai,bi,ab->", diag, diag, rho)
    h0 += 0.5 * np.einsum("aij,bji,baij->", s, s, f)
    if not literal:
        h0 += ctx.wp_shift / 2 * np.sum(diag**2)
    h1 = []
    for a in range(s.shape[0]):
        val = np.sum(p * diag[a]) + np.einsum("i,bi,b->", diag[a], diag, e1[a])
        val += np.einsum("bij,ji,bij->", s, s[a], ph[a])
        h1.append(complex(val))
    return complex(h0), tuple(h1)


def multispin_eom_h0(ctx: EllipticContext, marked_points, q, p, spins, literal: bool = False):
    s = _c(spins)
    _, rho, _, f, fp, off = _multi_tables(ctx, marked_points, q)
    diag = np.einsum("aii->ai", s)
    # dp_i = sum_{k != i} sum_{a,b} S^a_ki S^b_ik f'(z_ba, q_ki)
    dp = np.einsum("aki,bik,baki->i", s, s, fp)
    dd = diag[:, None, :] - diag[:, :, None]  # [b, i, j] = S^b_jj - S^b_ii
    ds = np.einsum("aij,bij,ba->aij", s, dd, rho)
    ds += np.einsum("aik,bkj,abkj->aij", s, s, f)
    ds -= np.einsum("akj,bik,abik->aij", s, s, f)
    if not literal:
        ds += ctx.wp_shift * dd * s
    return _c(p).copy(), dp, ds


def multispin_eom_h1a(ctx: EllipticContext, marked_points, q, p, spins, a: int):
    s = _c(spins)
    npole = s.shape[0]
    if not 0 <= a < npole:
        raise IndexError(f"marked point index {a} out of range")
    e1, _, ph, f, _, off = _multi_tables(ctx, marked_points, q)
    diag = np.einsum("aii->ai", s)
    others = np.array([b != a for b in range(npole)], dtype=float)
    dq = diag[a].copy()
    fb = f[:, a]  # f(z_ba, q_ij)
    dp = np.einsum("b,ik,bki,bik->i", others, s[a], s, fb)
    dp -= np.einsum("b,bik,ki,bki->i", others, s, s[a], fb)
    dd = diag[:, None, :] - diag[:, :, None]
    p = _c(p)
    ds = np.zeros_like(s)
    ds[a] = -(p[:, None] - p[None, :]) * s[a]
    for c in range(npole):
        if c == a:
            continue
        ds[a] += s[a] * dd[c] * e1[a, c]
        ds[a] += np.einsum("ik,kj,kj->ij", s[a], s[c], ph[a, c])
        ds[a] -= np.einsum("kj,ik,ik->ij", s[a], s[c], ph[a, c])
        b = c
        ds[b] = s[b] * dd[a] * e1[a, b]
        ds[b] += np.einsum("kj,ik,ik->ij", s[b], s[a], ph[b, a])
        ds[b] -= np.einsum("ik,kj,kj->ij", s[b], s[a], ph[b, a])
    return dq, dp, ds


def multispin_unwanted_h0(ctx: EllipticContext, marked_points, q, spins, sign: float = -1.0):
    """sign * (1/2) sum S^b_ij (S^a_ii - S^a_jj) E_ij f'(z - z_b, q_ij); the Lax equation needs sign = -1."""
    zs = _c(marked_points)
    qij, off = _pairwise(ctx, q)
    s = _c(spins)
    tot = np.einsum("aii->i", s)
    w = sign * 0.5 * s * (tot[:, None] - tot[None, :]) * off

    def ev(z):
        x = _c(z) - zs
        check_regular(ctx, "z - z_a", x)
        return np.einsum("bij,bij->ij", w, _f(ctx, x[:, None, None], qij, 2))

    return _operator(ev, zs)


def multispin_unwanted_h1a(ctx: EllipticContext, marked_points, q, spins, a: int):
    """sum S^a_ij (S^b_ii - S^b_jj) E_ij f(z - z_a, q_ij)."""
    zs = _c(marked_points)
    qij, off = _pairwise(ctx, q)
    s = _c(spins)
    tot = np.einsum("aii->i", s)
    w = s[a] * (tot[:, None] - tot[None, :]) * off

    def ev(z):
        x = _c(z) - zs[a]
        check_regular(ctx, "z - z_a", x)
        return w * _f(ctx, x, qij)

    return _operator(ev, zs)


def multispin_lax_derivative(ctx: EllipticContext, marked_points, q, spins, dq, dp, dspins):
    zs = _c(marked_points)
    qij, off = _pairwise(ctx, q)
    s, ds, dq = _c(spins), _c(dspins), _c(dq)
    dqij = dq[:, None] - dq[None, :]
    ddiag = np.einsum("aii->ai", ds)

    def ev(z):
        x = _c(z) - zs
        check_regular(ctx, "z - z_a", x)
        e1 = _log_derivs(ctx, x, 1)[0]
        ph = _phi(ctx, x[:, None, None], qij)
        f = _f(ctx, x[:, None, None], qij)
        return (np.diag(_c(dp) + ddiag.T @ e1)
                + off * (np.einsum("aij,aij->ij", ds, ph) + dqij * np.einsum("aij,aij->ij", s, f)))

    return _operator(ev, zs)


def multispin_lax_residual(ctx: EllipticContext, marked_points, q, p, spins, z_samples,
                           flow: str = "h0", a: int = 0, pure: bool = False) -> float:
    lax = multispin_lax(ctx, marked_points, q, p, spins)
    if flow == "h0":
        vel = multispin_eom_h0(ctx, marked_points, q, p, spins)
        mop, extra = lax.m0, multispin_unwanted_h0(ctx, marked_points, q, spins)
    elif flow == "h1a":
        vel = multispin_eom_h1a(ctx, marked_points, q, p, spins, a)
        mop, extra = lax.m1[a], multispin_unwanted_h1a(ctx, marked_points, q, spins, a)
    else:
        raise ValueError(f"unknown flow {flow!r}")
    dl = multispin_lax_derivative(ctx, marked_points, q, spins, *vel)
    return lax_equation_residual(dl, lax.l, mop, z_samples, None if pure else extra)


# ---------------------------------------------------------------------------
# mixed model (n = 1) and interacting tops


def _mixed_kernels(ctx, n_order, q, x, kind):
    """[..., i, j, alpha] kernel of the mixed model at spectral argument x."""
    qq = _c(q)
    m = qq.size
    qij, off = _pairwise(ctx, qq)
    u = np.where(off > 0, qij / n_order, 0)
    x = _c(x)
    out = np.zeros(x.shape + (m, m, n_order, n_order), dtype=complex)
    for i in range(m):
        for j in range(m):
            out[..., i, j, :, :] = _basis_kernel(ctx, n_order, x, u[i, j], kind, skip_zero=i == j)
    return out


def _blocks(ctx, n_order, table) -> np.ndarray:
    blocks = np.einsum("ijxy,xyrs->irjs", table, build_basis(n_order).t_matrices)
    m = table.shape[0]
    return blocks.reshape(m * n_order, m * n_order)


def mixed_coeffs(n_order: int, spins) -> np.ndarray:
    """C[i, j, alpha] = tr(S^ij T_-alpha) / N for spins of shape (M, M, N, N)."""
    return to_coeffs(build_basis(n_order), _c(spins))


def mixed_lax(ctx: EllipticContext, n_order: int, q, p, spins) -> LaxPair:
    """Lax matrix of the mixed model (single marked point at 0) and its M-matrix on the constraints."""
    c = mixed_coeffs(n_order, spins)
    p = _c(p)
    m = p.size
    s00 = c[np.arange(m), np.arange(m), 0, 0]
    eye = np.eye(n_order)

    def lmat(z):
        check_regular(ctx, "z", z)
        k = _mixed_kernels(ctx, n_order, q, z, "phi")
        return _blocks(ctx, n_order, c * k) + np.kron(np.diag(p + s00 * _e1(ctx, z)), eye)

    def mmat(z):
        check_regular(ctx, "z", z)
        k = _mixed_kernels(ctx, n_order, q, z, "f")
        return (_blocks(ctx, n_order, c * k) + np.kron(np.diag(s00 * _rho(ctx, z)), eye)) / n_order

    return LaxPair(_operator(lmat, (0,)), _operator(mmat, (0,)))


def mixed_hamiltonian(ctx: EllipticContext, n_order: int, q, p, spins) -> complex:
    """H = sum p^2/2 - (1/2) sum S^ii_a S^ii_-a E2(omega_a) - (1/2) sum_{i != j} S^ij_a S^ji_-a E2(omega_a + q_ij/N)."""
    c = mixed_coeffs(n_order, spins)
    neg = negate_coeffs(c, n_order)
    m = c.shape[0]
    qij, off = _pairwise(ctx, q)
    pair = np.einsum("ijxy,jixy->ijxy", c, neg)
    e2 = np.zeros(pair.shape, dtype=complex)
    j = top_inertia(ctx, n_order)
    for i in range(m):
        for k in range(m):
            if i == k:
                e2[i, i] = -j
            else:
                e2[i, k] = _e2_alpha(ctx, n_order, qij[i, k] / n_order)
    return complex(np.sum(_c(p) ** 2) / 2 - 0.5 * np.sum(pair * e2))


def _e2_alpha(ctx, n_order, u, order=1):
    """Table [alpha] of E2 (order 1) or E2' (order 2) at omega_alpha + u."""
    r = np.arange(n_order)
    w = (r[:, None] + r[None, :] * ctx.tau) / n_order + u
    return _e2(ctx, w, order)


def mixed_eom(ctx: EllipticContext, n_order: int, q, p, spins):
    """(dq, dp, dspins) of the mixed model Hamiltonian, written in coefficients."""
    basis = build_basis(n_order)
    c = mixed_coeffs(n_order, spins)
    neg = negate_coeffs(c, n_order)
    m = c.shape[0]
    qij, off = _pairwise(ctx, q)
    kap = kappa_table(n_order)
    mr1, mr2, msign = shifted_index_tables(n_order)["minus"]
    cm = msign * c[..., mr1, mr2]  # [i, j, alpha, beta] -> S^ij_{alpha - beta}
    e2 = np.zeros((m, m, n_order, n_order), dtype=complex)
    e2p = np.zeros_like(e2)
    for i in range(m):
        for k in range(m):
            if i != k:
                e2[i, k] = _e2_alpha(ctx, n_order, qij[i, k] / n_order)
                e2p[i, k] = _e2_alpha(ctx, n_order, qij[i, k] / n_order, 2)
    je = -top_inertia(ctx, n_order)  # E2(omega_beta), zero at beta = 0
    # dp_i = -(1/N) sum_{k != i} sum_alpha S^ki_alpha S^ik_-alpha E2'(omega_alpha + q_ki/N)
    dp = -np.einsum("kixy,ikxy,kixy->i", c, neg, e2p) / n_order
    ckk = c[np.arange(m), np.arange(m)]
    ds = -np.einsum("ijxyuv,xyuv,juv,uv->ijxy", cm, kap, ckk, je)
    ds += np.einsum("ijxyuv,uvxy,iuv,uv->ijxy", cm, kap, ckk, je)
    ds -= np.einsum("ikxyuv,xyuv,kjuv,kjuv->ijxy", cm, kap, c, e2)
    ds += np.einsum("kjxyuv,uvxy,ikuv,ikuv->ijxy", cm, kap, c, e2)
    ds /= n_order
    return _c(p).copy(), dp, from_coeffs(basis, ds)


def mixed_lax_derivative(ctx: EllipticContext, n_order: int, q, spins, dq, dp, dspins):
    c = mixed_coeffs(n_order, spins)
    dc = mixed_coeffs(n_order, dspins)
    dq = _c(dq)
    m = dq.size
    dqij = (dq[:, None] - dq[None, :])[:, :, None, None] / n_order
    ds00 = dc[np.arange(m), np.arange(m), 0, 0]
    eye = np.eye(n_order)

    def ev(z):
        kp = _mixed_kernels(ctx, n_order, q, z, "phi")
        kf = _mixed_kernels(ctx, n_order, q, z, "f")
        return (_blocks(ctx, n_order, dc * kp + c * dqij * kf)
                + np.kron(np.diag(_c(dp) + ds00 * _e1(ctx, z)), eye))

    return _operator(ev, (0,))


def mixed_lax_residual(ctx: EllipticContext, n_order: int, q, p, spins, z_samples) -> float:
    pair = mixed_lax(ctx, n_order, q, p, spins)
    dl = mixed_lax_derivative(ctx, n_order, q, spins, *mixed_eom(ctx, n_order, q, p, spins))
    return lax_equation_residual(dl, pair.l, pair.m, z_samples)


def rank_one_spins(xi, eta) -> np.ndarray:
    """S^ij = xi^i (eta^j)^T for xi, eta of shape (M, N)."""
    return np.einsum("ir,js->ijrs", _c(xi), _c(eta))


def check_rank_one(spins, tol: float = 1e-9) -> None:
    s = _c(spins)
    m, n = s.shape[0], s.shape[2]
    full = s.transpose(0, 2, 1, 3).reshape(m * n, m * n)
    sv = np.linalg.svd(full, compute_uv=False)
    if sv.size > 1 and sv[1] > tol * max(sv[0], 1.0):
        raise ValueError(f"residue is not rank one (second singular value {sv[1]:.3e})")


def r3_sides(n_order: int, xi, eta) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of S^ij_alpha S^ji_-alpha = sum_beta kappa^2_{alpha,beta} S^jj_beta S^ii_-beta / N.

    Returned as arrays indexed [i, j, alpha1, alpha2], each computed independently.
    """
    c = mixed_coeffs(n_order, rank_one_spins(xi, eta))
    neg = negate_coeffs(c, n_order)
    lhs = np.einsum("ijxy,jixy->ijxy", c, neg)
    m = c.shape[0]
    diag = c[np.arange(m), np.arange(m)]
    dneg = neg[np.arange(m), np.arange(m)]
    k2 = kappa_table(n_order) ** 2
    rhs = np.einsum("xyuv,juv,iuv->ijxy", k2, diag, dneg) / n_order
    return lhs, rhs


def tops_hamiltonian(ctx: EllipticContext, n_order: int, q, p, xi, eta) -> complex:
    """Interacting-tops Hamiltonian, written through the diagonal blocks S^ii only."""
    c = mixed_coeffs(n_order, rank_one_spins(xi, eta))
    neg = negate_coeffs(c, n_order)
    m = c.shape[0]
    qij, off = _pairwise(ctx, q)
    diag = c[np.arange(m), np.arange(m)]
    dneg = neg[np.arange(m), np.arange(m)]
    je = -top_inertia(ctx, n_order)
    h = np.sum(_c(p) ** 2) / 2 - 0.5 * np.einsum("ixy,ixy,xy->", diag, dneg, je)
    k2 = kappa_table(n_order) ** 2
    for i in range(m):
        for j in range(m):
            if i != j:
                e2 = _e2_alpha(ctx, n_order, qij[i, j] / n_order)
                h -= np.einsum("xyuv,uv,uv,xy->", k2, diag[j], dneg[i], e2) / (2 * n_order)
    return complex(h)


class InteractingTops(NamedTuple):
    h: complex
    dq: np.ndarray
    dp: np.ndarray
    dspins: np.ndarray


def interacting_tops(ctx: EllipticContext, n_order: int, q, p, xi, eta) -> InteractingTops:
    """Hamiltonian and equations of motion of the interacting tops (rank-one mixed model)."""
    spins = rank_one_spins(xi, eta)
    if _c(xi).shape != _c(eta).shape or _c(xi).shape != (_c(q).size, n_order):
        raise ValueError("xi and eta must both have shape (M, N)")
    check_rank_one(spins)
    dq, dp, ds = mixed_eom(ctx, n_order, q, p, spins)
    return InteractingTops(tops_hamiltonian(ctx, n_order, q, p, xi, eta), dq, dp, ds)


def interacting_tops_lax(ctx: EllipticContext, n_order: int, q, p, xi, eta) -> SpectralOperator:
    """Lax matrix assembled from xi, eta: S^ij_alpha = eta^j T_-alpha xi^i / N."""
    basis = build_basis(n_order)
    inv = np.conj(np.swapaxes(basis.t_matrices, -1, -2))
    c = np.einsum("js,xysr,ir->ijxy", _c(eta), inv, _c(xi)) / n_order
    return mixed_lax(ctx, n_order, q, p, from_coeffs(basis, c)).l


# ---------------------------------------------------------------------------
# classification-scheme arrows


def _max_entry_diff(op_a: Callable, op_b: Callable, zs) -> float:
    return float(max(np.abs(op_a(z) - op_b(z)).max() for z in zs))


def scheme_arrow_residuals(seed: int = 0, n_z: int = 5, tau: complex = 1j) -> dict:
    """Entrywise Lax-matrix differences for each arrow of the classification scheme.

    Every comparison uses ``n_z`` random spectral parameters away from all
    marked points.  Returns {arrow name: max |difference|}.
    """
    from .lax import build_lax, sample_points
    from .state import ModelSpec, default_marked_points, random_state

    out = {}
    rng = np.random.default_rng(seed)

    # general (M = 1) -> Gaudin, after removing the scalar diagonal part
    spec = ModelSpec(2, 1, 2, default_marked_points(2, tau), tau)
    st = random_state(spec, seed)
    zs = sample_points(spec, n_z, seed)
    ctx, marks = spec.ctx, np.array(spec.marked_points)
    s00 = st.coeffs[:, 0, 0, 0, 0]
    gen = build_lax(spec, st)
    scalar = lambda z: (st.p[0] + s00 @ _log_derivs(ctx, z - marks, 1)[0]) * np.eye(2)
    gaud = gaudin_lax(ctx, 2, marks, st.spins[:, 0, 0])
    out["general(M=1)->gaudin"] = _max_entry_diff(lambda z: gen(z) - scalar(z), gaud.l, zs)

    # general (N = 1) -> multispin CM
    spec = ModelSpec(1, 3, 2, default_marked_points(2, tau), tau)
    st = random_state(spec, seed)
    zs = sample_points(spec, n_z, seed)
    ms = multispin_lax(spec.ctx, spec.marked_points, st.q, st.p, st.spins[..., 0, 0])
    out["general(N=1)->multispin"] = _max_entry_diff(build_lax(spec, st), ms.l, zs)

    # general (n = 1) -> mixed model
    spec = ModelSpec(2, 2, 1, (0,), tau)
    st = random_state(spec, seed)
    zs = sample_points(spec, n_z, seed)
    mx = mixed_lax(spec.ctx, 2, st.q, st.p, st.spins[0])
    out["general(n=1)->mixed"] = _max_entry_diff(build_lax(spec, st), mx.l, zs)

    # Gaudin (n = 1) -> top
    spin = 0.5 * (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    top = top_pair(ctx, 3, spin)
    out["gaudin(n=1)->top"] = _max_entry_diff(gaudin_lax(ctx, 3, (0,), spin[None]).l, top.l, zs)

    # multispin (n = 1) -> spin CM
    spec = ModelSpec(1, 3, 1, (0,), tau)
    st = random_state(spec, seed)
    s = st.spins[0, :, :, 0, 0]
    out["multispin(n=1)->spin_cm"] = _max_entry_diff(
        multispin_lax(spec.ctx, (0,), st.q, st.p, s[None]).l, spin_cm_lax(spec.ctx, st.q, st.p, s).l, zs)

    # mixed (rank one) -> interacting tops
    spec = ModelSpec(2, 2, 1, (0,), tau)
    st = random_state(spec, seed)
    xi = 0.5 * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    eta = 0.5 * (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
    out["mixed(rank1)->interacting_tops"] = _max_entry_diff(
        mixed_lax(spec.ctx, 2, st.q, st.p, rank_one_spins(xi, eta)).l,
        interacting_tops_lax(spec.ctx, 2, st.q, st.p, xi, eta), zs)

    # spin CM with S_ij = nu -> spinless CM
    nu = 0.7 + 0.2j
    out["spin_cm(S=nu)->cm"] = _max_entry_diff(
        spin_cm_lax(spec.ctx, st.q, st.p, np.full((2, 2), nu)).l, cm_lax(spec.ctx, st.q, st.p, nu).l, zs)
    return out
