"""Lax pair, Hamiltonians and equations of motion of the gl_NM^{x n} model.

Spin data enter through coefficient tables ``C[a, i, j, a1, a2] = S^{ij,a}_alpha``
on representatives.  Kernel tables hold the elliptic function attached to each
(i, j, alpha) slot:

* ``phi``:  diagonal alpha=0 -> E1(x),  otherwise phi_alpha(x, omega_alpha + q_ij/N)
* ``f``:    diagonal alpha=0 -> rho(x), otherwise f_alpha(x, omega_alpha + q_ij/N)
* ``fp``:   diagonal alpha=0 -> 0,      otherwise f'_alpha(x, omega_alpha + q_ij/N)

so that, e.g., the Lax matrix is ``diag(p) + sum_a C * phi-table(z - z_a) * T``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .elliptic import (
    _log_derivs,
    check_regular,
    f_alpha_raw,
    lattice_distance,
    phi_alpha_raw,
    random_points,
    richardson_limit,
)
from .state import ModelSpec, PhaseState, Tangent, blocks_to_full, trace_coeffs
from .torus import from_coeffs, kappa_table, negate_coeffs, shifted_index_tables


@dataclass(frozen=True)
class SpectralOperator:
    """Matrix-valued function of the spectral parameter."""

    eval: Callable[[np.ndarray], np.ndarray]
    poles: tuple

    def __call__(self, z):
        return self.eval(z)


# ---------------------------------------------------------------------------
# kernel tables


def kernel_table(spec: ModelSpec, q, x, kind: str) -> np.ndarray:
    """Elliptic kernels of shape x.shape + (M, M, N, N).

    Entries whose special (diagonal, alpha=0) function would sit on a pole
    are set to zero; callers never use them.
    """
    ctx, n = spec.ctx, spec.n_inner
    q = np.asarray(q, dtype=complex)
    m = q.size
    x = np.asarray(x, dtype=complex)
    lead = x.shape
    shape = lead + (m, m, n, n)
    u = ((q[:, None] - q[None, :]) / n)[:, :, None, None]
    r = np.arange(n)
    a1 = r[:, None]
    a2 = r[None, :]
    special = np.zeros((m, m, n, n), dtype=bool)
    special[np.arange(m), np.arange(m), 0, 0] = True

    xb = np.broadcast_to(x.reshape(lead + (1, 1, 1, 1)), shape)
    ub = np.broadcast_to(u, shape)
    a1b = np.broadcast_to(a1, shape)
    a2b = np.broadcast_to(a2, shape)
    sel = ~np.broadcast_to(special, shape)

    out = np.zeros(shape, dtype=complex)
    args = (a1b[sel], a2b[sel], n, xb[sel], ub[sel])
    if kind == "phi":
        out[sel] = phi_alpha_raw(ctx, *args)
    elif kind == "f":
        out[sel] = f_alpha_raw(ctx, *args, order=1)
    elif kind == "fp":
        out[sel] = f_alpha_raw(ctx, *args, order=2)
    else:
        raise ValueError(f"unknown kernel kind {kind!r}")

    if kind != "fp":
        xs = xb[~sel]
        ok = lattice_distance(ctx, xs) >= ctx.pole_eps
        vals = np.zeros(xs.shape, dtype=complex)
        if np.any(ok):
            e1, e2 = _log_derivs(ctx, xs[ok], 1)
            vals[ok] = e1 if kind == "phi" else (e1**2 - e2 - ctx.wp_shift) / 2
        out[~sel] = vals
    return out


def pair_table(spec: ModelSpec, q, kind: str) -> np.ndarray:
    """Kernel table at x = z_a - z_b, indexed [a, b, i, j, a1, a2]; zero where a == b for phi."""
    zs = np.array(spec.marked_points)
    x = zs[:, None] - zs[None, :]
    same = np.eye(spec.n_poles, dtype=bool)
    if kind == "phi":
        x = np.where(same, 0.3137 + 0.2719 * spec.tau, x)  # placeholder, zeroed below
        out = kernel_table(spec, q, x, kind)
        out[same] = 0
        return out
    return kernel_table(spec, q, x, kind)


def _assemble(spec: ModelSpec, coef: np.ndarray, kern: np.ndarray) -> np.ndarray:
    """sum_a sum_alpha coef * kern * E_ij (x) T_alpha; kern may carry leading sample axes."""
    t = spec.basis.t_matrices
    blocks = np.einsum("aijxy,...aijxy,xyrs->...ijrs", coef, kern, t)
    return blocks_to_full(blocks)


def _momentum_part(spec: ModelSpec, p) -> np.ndarray:
    return np.kron(np.diag(np.asarray(p, dtype=complex)), np.eye(spec.n_inner))


def _shifts(spec: ModelSpec, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    x = z[..., None] - np.array(spec.marked_points)
    check_regular(spec.ctx, "z - z_a", x)
    return x


def _operator(spec, fn) -> SpectralOperator:
    return SpectralOperator(fn, tuple(spec.marked_points))


# ---------------------------------------------------------------------------
# Lax matrix and M-matrices


def build_lax(spec: ModelSpec, state: PhaseState) -> SpectralOperator:
    state.check(spec)
    coef = state.coeffs
    mom = _momentum_part(spec, state.p)

    def ev(z):
        x = _shifts(spec, z)
        return mom + _assemble(spec, coef, kernel_table(spec, state.q, x, "phi"))

    return _operator(spec, ev)


def build_m0(spec: ModelSpec, state: PhaseState) -> SpectralOperator:
    state.check(spec)
    coef = state.coeffs / spec.n_inner

    def ev(z):
        x = _shifts(spec, z)
        return _assemble(spec, coef, kernel_table(spec, state.q, x, "f"))

    return _operator(spec, ev)


def build_m1a(spec: ModelSpec, state: PhaseState, a: int) -> SpectralOperator:
    _check_pole_index(spec, a)
    state.check(spec)
    coef = np.zeros_like(state.coeffs)
    coef[a] = -state.coeffs[a] / spec.n_inner

    def ev(z):
        x = _shifts(spec, z)
        return _assemble(spec, coef, kernel_table(spec, state.q, x, "phi"))

    return _operator(spec, ev)


def _check_pole_index(spec: ModelSpec, a: int) -> None:
    if not 0 <= a < spec.n_poles:
        raise IndexError(f"marked point index {a} out of range(0, {spec.n_poles})")


def lax_residue(spec: ModelSpec, state: PhaseState, a: int, h: float = 1e-2,
                levels: int = 6) -> tuple[np.ndarray, float]:
    """Residue of L at z_a as the limit of (z - z_a) L(z) along four directions.

    Each directional limit is Richardson-extrapolated; returns the mean and
    the largest deviation between directions.
    """
    _check_pole_index(spec, a)
    lax = build_lax(spec, state)
    za = spec.marked_points[a]
    ests = [richardson_limit(lambda e, d=d: (d * e) * lax(za + d * e), h, levels, even=False)
            for d in (1, 1j, -1, -1j)]
    mean = np.mean(ests, axis=0)
    return mean, float(max(np.abs(e - mean).max() for e in ests))


def quasi_periodicity_factors(spec: ModelSpec, state: PhaseState):
    """g_1 and g_tau with L(z+1) = g_1 L g_1^-1 and L(z+tau) = g_tau L g_tau^-1."""
    n = spec.n_inner
    basis = spec.basis
    qinv = np.linalg.inv(basis.q)
    linv = np.linalg.inv(basis.lam)
    g1 = np.kron(np.eye(spec.m_blocks), qinv)
    gt = np.kron(np.diag(np.exp(-2j * np.pi * state.q / n)), linv)
    return g1, gt


# ---------------------------------------------------------------------------
# Hamiltonians


@dataclass(frozen=True)
class Hamiltonians:
    h0: complex
    h1: tuple
    h2: tuple


def _hamiltonians(spec: ModelSpec, q, p, coef, literal: bool = False) -> Hamiltonians:
    """Closed-form Hamiltonians.

    With ``literal`` H0 omits the term (c0/2) sum_{a,i} (S^{ii,a}_00)^2 where
    c0 = wp(z) - E2(z); that version is not the constant term of
    tr L^2 / (2N) and does not generate a Lax flow with M0.
    """
    n = spec.n_inner
    neg = negate_coeffs(coef, n)
    # pair[a, b, i, j, alpha] = S^{ij,a}_alpha S^{ji,b}_{-alpha}
    pair = np.einsum("aijxy,bjixy->abijxy", coef, neg)
    s00 = coef[:, np.arange(spec.m_blocks), np.arange(spec.m_blocks), 0, 0]

    # ff[b, a] holds f at z_ba: rho(z_ba) on the (ii, 0) slots, f_alpha otherwise
    ff = pair_table(spec, q, "f")
    h0 = np.sum(p**2) / 2 + 0.5 * np.einsum("abijxy,baijxy->", pair, ff)
    if not literal:
        # constant left over from E1^2 = 2 rho + E2 + c0 in the diagonal a = b products
        h0 += spec.ctx.wp_shift / 2 * np.sum(s00**2)

    ph = pair_table(spec, q, "phi")
    h1 = []
    for a in range(spec.n_poles):
        others = [b for b in range(spec.n_poles) if b != a]
        val = np.sum(p * s00[a])
        # phi table holds E1(z_ba) = -E1(z_ab) on the (ii, 0) slots
        val -= sum(np.einsum("ijxy,ijxy->", pair[a, b], ph[b, a]) for b in others)
        h1.append(complex(val))
    h2 = tuple(complex(0.5 * np.einsum("ijxy->", pair[a, a])) for a in range(spec.n_poles))
    return Hamiltonians(complex(h0), tuple(h1), h2)


def hamiltonians(spec: ModelSpec, state: PhaseState, literal: bool = False) -> Hamiltonians:
    state.check(spec)
    return _hamiltonians(spec, state.q, state.p, state.coeffs, literal)


def laurent_coefficient(func, center: complex, power: int, radius: float, points: int = 64) -> complex:
    """Coefficient of (z - center)^power by the trapezoid rule on a circle."""
    theta = 2 * np.pi * np.arange(points) / points
    w = radius * np.exp(1j * theta)
    vals = np.array([func(center + wk) for wk in w])
    return complex(np.mean(vals * w ** (-power)))


def _pole_radius(spec: ModelSpec, a: int) -> float:
    zs = np.array(spec.marked_points)
    others = np.delete(zs, a) - zs[a]
    cands = [0.25 * spec.ctx.tau.imag, 0.25]
    if others.size:
        cands.append(0.4 * float(lattice_distance(spec.ctx, others).min()))
    return min(cands)


def hamiltonians_via_trace(spec: ModelSpec, state: PhaseState, n_samples: int = 8,
                           seed: int = 0) -> tuple[Hamiltonians, float]:
    """Hamiltonians read off the expansion of tr L(z)^2 / (2N).

    Returns the record and the spread of the regular part over the sample
    points, which measures how constant it is.
    """
    ctx = spec.ctx
    lax = build_lax(spec, state)
    n = spec.n_inner
    gen = lambda z: np.trace(lax(z) @ lax(z)) / (2 * n)
    h1, h2 = [], []
    for a, za in enumerate(spec.marked_points):
        r = _pole_radius(spec, a)
        h2.append(laurent_coefficient(gen, za, -2, r))
        h1.append(laurent_coefficient(gen, za, -1, r))
    s00 = trace_coeffs(state)  # (n, M)
    # reading of the last term: sum_i (sum_b S^{ii,b}) (sum_a S^{ii,a} rho(z - z_a))
    rho_coef = np.einsum("ai,i->a", s00, s00.sum(axis=0))
    rng = np.random.default_rng(seed)
    zs = random_points(ctx, rng, n_samples, avoid=[lambda w: w - np.array(spec.marked_points)],
                       margin=0.05)
    regs = []
    for z in zs:
        x = z - np.array(spec.marked_points)
        e1, e2 = _log_derivs(ctx, x, 1)
        rho = (e1**2 - e2 - ctx.wp_shift) / 2
        regs.append(gen(z) - np.dot(h1, e1) - np.dot(h2, e2) - np.dot(rho_coef, rho))
    regs = np.array(regs)
    h0 = complex(regs.mean())
    spread = float(np.max(np.abs(regs - h0)))
    return Hamiltonians(h0, tuple(h1), tuple(h2)), spread


# ---------------------------------------------------------------------------
# equations of motion


def _index_tools(n: int):
    mr1, mr2, msign = shifted_index_tables(n)["minus"]
    kap = kappa_table(n)
    return mr1, mr2, msign, kap


def _minus_table(coef, n):
    """cm[..., a1, a2, b1, b2] = S_{alpha - beta} (lift sign applied)."""
    mr1, mr2, msign, _ = _index_tools(n)
    return msign * coef[..., mr1, mr2]


def eom_h0_coeffs(spec: ModelSpec, q, p, coef, literal: bool = False):
    """(dq, dp, dcoef) of the H0 flow.

    ``literal`` drops the c0 term, giving the flow of the literal H0.
    """
    n, m, npole = spec.n_inner, spec.m_blocks, spec.n_poles
    kap = kappa_table(n)  # [A, B] = kappa_{alpha, beta}
    neg = negate_coeffs(coef, n)
    cm = _minus_table(coef, n)
    off = 1 - np.eye(m)
    s00 = coef[:, np.arange(m), np.arange(m), 0, 0]

    ff = pair_table(spec, q, "f")  # [a, b] -> z_ab
    fp = pair_table(spec, q, "fp")
    rho_ab = ff[:, :, 0, 0, 0, 0] * (1 - np.eye(npole))  # rho(z_ab), zero on a = b
    f0 = ff[:, :, 0, 0].copy()  # f_beta(z_ab, omega_beta), beta != 0
    f0[:, :, 0, 0] = 0

    dq = p.copy()
    # f'_alpha(z_ba, omega_alpha + q_ki/N) = fp[b, a, k, i]
    dp = np.einsum("ki,akixy,bikxy,bakixy->i", off, coef, neg, fp) / n

    dc = np.einsum("aijxy,bj,ba->aijxy", coef, s00, rho_ab)
    dc -= np.einsum("aijxy,bi,ba->aijxy", coef, s00, rho_ab)
    ckk = coef[:, np.arange(m), np.arange(m)]  # S^{kk,b}_beta, [b, k, beta]
    dc += np.einsum("aijxyuv,xyuv,bjuv,abuv->aijxy", cm, kap, ckk, f0)
    dc -= np.einsum("aijxyuv,uvxy,biuv,abuv->aijxy", cm, kap, ckk, f0)
    dc += np.einsum("kj,aikxyuv,xyuv,bkjuv,abkjuv->aijxy", off, cm, kap, coef, ff)
    dc -= np.einsum("ik,akjxyuv,uvxy,bikuv,abikuv->aijxy", off, cm, kap, coef, ff)
    if not literal:
        dc += spec.ctx.wp_shift * (s00[:, None, :] - s00[:, :, None])[..., None, None] * coef
    return dq, dp, dc / n


def eom_h1a_coeffs(spec: ModelSpec, q, p, coef, a: int):
    """(dq, dp, dcoef) of the H_{1,a} flow."""
    n, m, npole = spec.n_inner, spec.m_blocks, spec.n_poles
    kap = kappa_table(n)
    neg = negate_coeffs(coef, n)
    cm = _minus_table(coef, n)
    off = 1 - np.eye(m)
    s00 = coef[:, np.arange(m), np.arange(m), 0, 0]
    ckk = coef[:, np.arange(m), np.arange(m)]

    ff = pair_table(spec, q, "f")
    ph = pair_table(spec, q, "phi")  # [x, y] -> z_xy; diagonal (ii, 0) slots carry E1
    e1 = ph[:, :, 0, 0, 0, 0]
    p0 = ph[:, :, 0, 0].copy()
    p0[:, :, 0, 0] = 0
    others = np.array([b != a for b in range(npole)], dtype=float)

    dq = s00[a].copy()
    # f_alpha(z_ba, omega_alpha + q_ik/N) = ff[b, a, i, k]
    dp = np.einsum("b,ki,ikxy,bkixy,bikxy->i", others, off, coef[a], neg, ff[:, a])
    dp -= np.einsum("b,ki,kixy,bikxy,bkixy->i", others, off, coef[a], neg, ff[:, a])
    dp /= n

    dc = np.zeros_like(coef)
    # b != a
    for b in range(npole):
        if b == a:
            continue
        term = coef[b] * (s00[a][None, :] - s00[a][:, None])[:, :, None, None] * e1[a, b]
        term = term + np.einsum("ijxyuv,uvxy,iuv,uv->ijxy", cm[b], kap, ckk[a], p0[b, a])
        term = term - np.einsum("ijxyuv,xyuv,juv,uv->ijxy", cm[b], kap, ckk[a], p0[b, a])
        term = term + np.einsum("ik,kjxyuv,uvxy,ikuv,ikuv->ijxy", off, cm[b], kap, coef[a], ph[b, a])
        term = term - np.einsum("kj,ikxyuv,xyuv,kjuv,kjuv->ijxy", off, cm[b], kap, coef[a], ph[b, a])
        dc[b] = term / n
    # b == a
    pdiff = (p[:, None] - p[None, :])[:, :, None, None]
    term = -pdiff * coef[a]
    for c in range(npole):
        if c == a:
            continue
        term = term + coef[a] * (s00[c][None, :] - s00[c][:, None])[:, :, None, None] * e1[a, c]
        term = term + np.einsum("ijxyuv,xyuv,juv,uv->ijxy", cm[a], kap, ckk[c], p0[a, c])
        term = term - np.einsum("ijxyuv,uvxy,iuv,uv->ijxy", cm[a], kap, ckk[c], p0[a, c])
        term = term + np.einsum("kj,ikxyuv,xyuv,kjuv,kjuv->ijxy", off, cm[a], kap, coef[c], ph[a, c])
        term = term - np.einsum("ik,kjxyuv,uvxy,ikuv,ikuv->ijxy", off, cm[a], kap, coef[c], ph[a, c])
    dc[a] = term / n
    return dq, dp, dc


def _tangent(spec, dq, dp, dc) -> Tangent:
    return Tangent(dq, dp, from_coeffs(spec.basis, dc), {"dcoeffs": dc})


def eom_h0(spec: ModelSpec, state: PhaseState, literal: bool = False) -> Tangent:
    state.check(spec)
    return _tangent(spec, *eom_h0_coeffs(spec, state.q, state.p, state.coeffs, literal))


def eom_h1a(spec: ModelSpec, state: PhaseState, a: int) -> Tangent:
    _check_pole_index(spec, a)
    state.check(spec)
    return _tangent(spec, *eom_h1a_coeffs(spec, state.q, state.p, state.coeffs, a))


# ---------------------------------------------------------------------------
# Lax equations


def lax_derivative(spec: ModelSpec, state: PhaseState, tangent: Tangent) -> SpectralOperator:
    """Directional derivative of L(z) along a tangent vector (chain rule, no differencing)."""
    n = spec.n_inner
    dcoef = tangent.extra.get("dcoeffs")
    if dcoef is None:
        from .torus import to_coeffs
        dcoef = to_coeffs(spec.basis, tangent.dspins)
    dq = np.asarray(tangent.dq, dtype=complex)
    # only off-diagonal kernels depend on q, through q_ij / N
    dqij = (dq[:, None] - dq[None, :]) / n
    qcoef = state.coeffs * dqij[None, :, :, None, None]
    mom = _momentum_part(spec, tangent.dp)

    def ev(z):
        x = _shifts(spec, z)
        kp = kernel_table(spec, state.q, x, "phi")
        kf = kernel_table(spec, state.q, x, "f")
        return mom + _assemble(spec, dcoef, kp) + _assemble(spec, qcoef, kf)

    return _operator(spec, ev)


def unwanted_h0(spec: ModelSpec, state: PhaseState, sign: float = -1.0) -> SpectralOperator:
    """sign * (1/2N) sum S^{ij,b}_alpha (S^{ii,a}_00 - S^{jj,a}_00) E_ij (x) T_alpha f'_alpha(z - z_b, .).

    The Lax equation holds with sign = -1.
    """
    n = spec.n_inner
    tot = trace_coeffs(state).sum(axis=0)
    weight = sign * (tot[:, None] - tot[None, :]) / (2 * n)
    coef = state.coeffs * weight[None, :, :, None, None]

    def ev(z):
        x = _shifts(spec, z)
        return _assemble(spec, coef, kernel_table(spec, state.q, x, "fp"))

    return _operator(spec, ev)


def unwanted_h1a(spec: ModelSpec, state: PhaseState, a: int) -> SpectralOperator:
    """(1/N) sum S^{ij,a}_alpha (S^{ii,b}_00 - S^{jj,b}_00) E_ij (x) T_alpha f_alpha(z - z_a, .)."""
    n = spec.n_inner
    tot = trace_coeffs(state).sum(axis=0)
    weight = (tot[:, None] - tot[None, :]) / n
    coef = np.zeros_like(state.coeffs)
    coef[a] = state.coeffs[a] * weight[:, :, None, None]
    # diagonal slots have zero weight, so the rho entries of the f table never enter

    def ev(z):
        x = _shifts(spec, z)
        return _assemble(spec, coef, kernel_table(spec, state.q, x, "f"))

    return _operator(spec, ev)


def sample_points(spec: ModelSpec, count: int = 10, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    zs = np.array(spec.marked_points)
    return random_points(spec.ctx, rng, count, avoid=[lambda w: w - zs],
                         margin=10 * spec.pole_eps)


def _residual(lhs, rhs_parts, zs) -> float:
    worst = 0.0
    for z in zs:
        d = lhs(z)
        r = d - sum(part(z) for part in rhs_parts)
        scale = max(np.linalg.norm(d), 1e-300)
        worst = max(worst, float(np.linalg.norm(r) / scale) if np.linalg.norm(d) > 0 else float(np.linalg.norm(r)))
    return worst


def _commutator(lax: SpectralOperator, mop: SpectralOperator):
    def ev(z):
        lz, mz = lax(z), mop(z)
        return lz @ mz - mz @ lz

    return ev


def lax_residual_h0(spec: ModelSpec, state: PhaseState, z_samples, pure: bool = False) -> float:
    """max_z |dL/dt0 - [L, M0] - unwanted| / |dL/dt0| (unwanted term omitted when ``pure``)."""
    lax = build_lax(spec, state)
    dl = lax_derivative(spec, state, eom_h0(spec, state))
    parts = [_commutator(lax, build_m0(spec, state))]
    if not pure:
        parts.append(unwanted_h0(spec, state))
    return _residual(dl, parts, z_samples)


def lax_residual_h1a(spec: ModelSpec, state: PhaseState, a: int, z_samples, pure: bool = False) -> float:
    lax = build_lax(spec, state)
    dl = lax_derivative(spec, state, eom_h1a(spec, state, a))
    parts = [_commutator(lax, build_m1a(spec, state, a))]
    if not pure:
        parts.append(unwanted_h1a(spec, state, a))
    return _residual(dl, parts, z_samples)
