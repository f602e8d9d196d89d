"""Named identity predicates for the elliptic functions and the torus basis.

Every elliptic predicate takes a context, a random generator and a sample count
and returns the maximum relative residual |lhs - rhs| / max(1, |lhs|, |rhs|)
over admissible random points.  Torus predicates take N and are exhaustive
over all index pairs.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from .elliptic import (
    TWO_PI_I,
    EllipticContext,
    eisenstein1,
    eisenstein2,
    kronecker_f,
    kronecker_f_prime,
    kronecker_phi,
    lattice_distance,
    phi_alpha_raw,
    f_alpha_raw,
    rho,
    weierstrass_p,
)
from .torus import build_basis, from_coeffs, kappa, permutation_operator, to_coeffs

SAMPLE_MARGIN = 0.08


def _rel(lhs, rhs) -> float:
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    scale = np.maximum(1.0, np.maximum(np.abs(lhs), np.abs(rhs)))
    return float(np.max(np.abs(lhs - rhs) / scale))


def draw(ctx: EllipticContext, rng: np.random.Generator, count: int, nvar: int, combos=(),
         margin: float = SAMPLE_MARGIN) -> np.ndarray:
    """``count`` tuples of ``nvar`` points in the centred fundamental cell.

    Each variable and each integer combination in ``combos`` (coefficient
    tuples, optionally with a trailing constant) stays ``margin`` away from
    the lattice.
    """
    out = np.empty((count, nvar), dtype=complex)
    i = 0
    while i < count:
        w = rng.uniform(-0.45, 0.45, nvar) + rng.uniform(-0.45, 0.45, nvar) * ctx.tau
        vals = list(w)
        for c in combos:
            shift = c[nvar] if len(c) > nvar else 0.0
            vals.append(np.dot(c[:nvar], w) + shift)
        if np.min(lattice_distance(ctx, np.array(vals))) < margin:
            continue
        out[i] = w
        i += 1
    return out.T


def _fns(ctx):
    return (
        lambda z, u: kronecker_phi(ctx, z, u),
        lambda z, u: kronecker_f(ctx, z, u),
        lambda z: eisenstein1(ctx, z),
        lambda z: eisenstein2(ctx, z),
    )


# ---------------------------------------------------------------------------
# quasi-periodicity


def quasi_periodicity(ctx: EllipticContext, rng, count: int = 100) -> dict:
    """The eight shift relations of E1, E2, phi and f under z -> z + 1, z + tau."""
    phi, f, e1, e2 = _fns(ctx)
    tau = ctx.tau
    z, u = draw(ctx, rng, count, 2, [(1, 1)])
    return {
        "E1(z+1)": _rel(e1(z + 1), e1(z)),
        "E1(z+tau)": _rel(e1(z + tau), e1(z) - TWO_PI_I),
        "E2(z+1)": _rel(e2(z + 1), e2(z)),
        "E2(z+tau)": _rel(e2(z + tau), e2(z)),
        "phi(z+1,u)": _rel(phi(z + 1, u), phi(z, u)),
        "phi(z+tau,u)": _rel(phi(z + tau, u), np.exp(-TWO_PI_I * u) * phi(z, u)),
        "f(z+1,u)": _rel(f(z + 1, u), f(z, u)),
        "f(z+tau,u)": _rel(f(z + tau, u), np.exp(-TWO_PI_I * u) * (f(z, u) - TWO_PI_I * phi(z, u))),
    }


def parity(ctx: EllipticContext, rng, count: int = 100) -> dict:
    """Observed parities; E1 is odd, phi is odd under joint negation, f even."""
    phi, f, e1, _ = _fns(ctx)
    z, u = draw(ctx, rng, count, 2, [(1, 1)])
    return {
        "E1 odd": _rel(e1(-z), -e1(z)),
        "E1 even": _rel(e1(-z), e1(z)),
        "phi symmetric": _rel(phi(z, u), phi(u, z)),
        "phi(-z,-u)": _rel(phi(-z, -u), -phi(z, u)),
        "f(-z,-u)": _rel(f(-z, -u), f(z, u)),
        "rho even": _rel(rho(ctx, -z), rho(ctx, z)),
    }


# ---------------------------------------------------------------------------
# addition formula and its degenerations


def fay(ctx: EllipticContext, rng, count: int = 100) -> float:
    phi, _, _, _ = _fns(ctx)
    z1, z2, u1, u2 = draw(ctx, rng, count, 4, [(1, -1, 0, 0), (0, 0, 1, 1)])
    lhs = phi(z1, u1) * phi(z2, u2)
    rhs = phi(z1, u1 + u2) * phi(z2 - z1, u2) + phi(z2, u1 + u2) * phi(z1 - z2, u1)
    return _rel(lhs, rhs)


def cross_derivative(ctx: EllipticContext, rng, count: int = 100) -> float:
    phi, f, _, _ = _fns(ctx)
    z1, z2, u1, u2 = draw(ctx, rng, count, 4, [(1, -1, 0, 0), (0, 0, 1, 1)])
    lhs = f(z1, u1) * phi(z2, u2) - phi(z1, u1) * f(z2, u2)
    rhs = phi(z2, u1 + u2) * f(z1 - z2, u1) - phi(z1, u1 + u2) * f(z2 - z1, u2)
    return _rel(lhs, rhs)


def same_z_derivative(ctx: EllipticContext, rng, count: int = 100) -> float:
    phi, f, _, e2 = _fns(ctx)
    z, u1, u2 = draw(ctx, rng, count, 3, [(0, 1, 1)])
    lhs = f(z, u1) * phi(z, u2) - phi(z, u1) * f(z, u2)
    return _rel(lhs, phi(z, u1 + u2) * (e2(u2) - e2(u1)))


def diffsign(ctx: EllipticContext, rng, count: int = 100) -> float:
    phi, _, _, e2 = _fns(ctx)
    z, u = draw(ctx, rng, count, 2, [(1, 1), (1, -1)])
    lhs = phi(z, u) * phi(z, -u)
    return max(_rel(lhs, e2(z) - e2(u)), _rel(lhs, weierstrass_p(ctx, z) - weierstrass_p(ctx, u)))


def same_z_product(ctx: EllipticContext, rng, count: int = 100) -> float:
    phi, _, e1, _ = _fns(ctx)
    z, u1, u2 = draw(ctx, rng, count, 3, [(1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 1)])
    lhs = phi(z, u1) * phi(z, u2)
    return _rel(lhs, phi(z, u1 + u2) * (e1(z) + e1(u1) + e1(u2) - e1(z + u1 + u2)))


def same_u_product(ctx: EllipticContext, rng, count: int = 100) -> float:
    phi, f, e1, _ = _fns(ctx)
    z1, z2, u = draw(ctx, rng, count, 3, [(1, 1, 0), (1, 0, 1), (0, 1, 1), (1, 1, 1)])
    lhs = phi(z1, u) * phi(z2, u)
    return _rel(lhs, phi(z1 + z2, u) * (e1(z1) + e1(z2)) - f(z1 + z2, u))


def rho_relation_two_points(ctx: EllipticContext, rng, count: int = 100, sign: float = -1.0) -> float:
    """Right-hand side ``sign/2 d_u f(z1, u)``; the identity holds with sign = -1."""
    phi, f, e1, _ = _fns(ctx)
    z1, z2, u = draw(ctx, rng, count, 3, [(1, -1, 0), (1, 0, 1), (0, 1, 1), (1, -1, 1)])
    lhs = phi(z1, u) * rho(ctx, z2) - e1(z2) * f(z1, u) + phi(z2, u) * f(z1 - z2, u) \
        - phi(z1, u) * rho(ctx, z2 - z1)
    return _rel(lhs, sign * 0.5 * kronecker_f_prime(ctx, z1, u))


def e1_square(ctx: EllipticContext, rng, count: int = 100) -> float:
    _, _, e1, _ = _fns(ctx)
    u, v = draw(ctx, rng, count, 2, [(1, 1)])
    wp = lambda x: weierstrass_p(ctx, x)
    return _rel((e1(u + v) - e1(u) - e1(v)) ** 2, wp(u + v) + wp(u) + wp(v))


def rho_relation(ctx: EllipticContext, rng, count: int = 100, sign: float = -1.0) -> float:
    """Right-hand side ``sign/2 d_u f(z, u)``; the identity holds with sign = -1."""
    phi, f, e1, _ = _fns(ctx)
    z, u = draw(ctx, rng, count, 2, [(1, 1)])
    lhs = phi(z, u) * rho(ctx, z) - e1(z) * f(z, u) - phi(z, u) * weierstrass_p(ctx, u)
    return _rel(lhs, sign * 0.5 * kronecker_f_prime(ctx, z, u))


DEGENERATIONS = {
    "cross derivative": cross_derivative,
    "same-z derivative": same_z_derivative,
    "diffsign": diffsign,
    "same-z product": same_z_product,
    "same-u product": same_u_product,
    "rho relation two points": rho_relation_two_points,
    "E1 square": e1_square,
    "rho relation": rho_relation,
}


# ---------------------------------------------------------------------------
# basis functions phi_alpha


def _random_alpha(rng, n):
    return int(rng.integers(n)), int(rng.integers(n))


def _pa(ctx, n, a, z, u):
    return phi_alpha_raw(ctx, a[0], a[1], n, z, u)


def _fa(ctx, n, a, z, u):
    return f_alpha_raw(ctx, a[0], a[1], n, z, u)


def _omega(ctx, n, a):
    return (a[0] + a[1] * ctx.tau) / n


def _draw_alpha(ctx, rng, count, n, nvar, shifts):
    """Per-sample indices plus points keeping omega-shifted arguments regular.

    ``shifts(alpha, beta)`` returns (coeffs, const) pairs to keep away from the
    lattice.
    """
    cols = []
    for _ in range(count):
        a, b = _random_alpha(rng, n), _random_alpha(rng, n)
        combos = [tuple(c) + (k,) for c, k in shifts(a, b)]
        cols.append((a, b, draw(ctx, rng, 1, nvar, combos)[:, 0]))
    return cols


def formula_f(ctx: EllipticContext, rng, count: int = 100, n: int = 2) -> float:
    """f_alpha = d_u phi_alpha = phi_alpha (E1(z + omega + u) - E1(omega + u))."""
    worst = 0.0
    for a, _, (z, u) in _draw_alpha(ctx, rng, count, n, 2, lambda a, b: [
            ((0, 1), _omega(ctx, n, a)), ((1, 1), _omega(ctx, n, a))]):
        w = _omega(ctx, n, a) + u
        rhs = _pa(ctx, n, a, z, u) * (eisenstein1(ctx, z + w) - eisenstein1(ctx, w))
        worst = max(worst, _rel(_fa(ctx, n, a, z, u), rhs))
    return worst


def formula_phi(ctx: EllipticContext, rng, count: int = 100, n: int = 2) -> float:
    """Addition formula for phi_alpha; the last factor carries u2."""
    worst = 0.0

    def shifts(a, b):
        oa, ob, oab = _omega(ctx, n, a), _omega(ctx, n, b), _omega(ctx, n, (a[0] + b[0], a[1] + b[1]))
        return [((1, -1, 0, 0), 0), ((0, 0, 1, 0), oa), ((0, 0, 0, 1), ob), ((0, 0, 1, 1), oab)]

    for a, b, (z1, z2, u1, u2) in _draw_alpha(ctx, rng, count, n, 4, shifts):
        ab = (a[0] + b[0], a[1] + b[1])
        lhs = _pa(ctx, n, a, z1, u1) * _pa(ctx, n, b, z2, u2)
        rhs = _pa(ctx, n, a, z1 - z2, u1) * _pa(ctx, n, ab, z2, u1 + u2) \
            + _pa(ctx, n, b, z2 - z1, u2) * _pa(ctx, n, ab, z1, u1 + u2)
        worst = max(worst, _rel(lhs, rhs))
    return worst


def formula_e(ctx: EllipticContext, rng, count: int = 100, n: int = 2) -> float:
    """Same-z product of basis functions; alpha + beta is formed in Z x Z."""
    worst = 0.0

    def shifts(a, b):
        oa, ob, oab = _omega(ctx, n, a), _omega(ctx, n, b), _omega(ctx, n, (a[0] + b[0], a[1] + b[1]))
        return [((0, 1, 0), oa), ((0, 0, 1), ob), ((0, 1, 1), oab), ((1, 1, 1), oab)]

    for a, b, (z, u1, u2) in _draw_alpha(ctx, rng, count, n, 3, shifts):
        ab = (a[0] + b[0], a[1] + b[1])
        oa, ob, oab = _omega(ctx, n, a), _omega(ctx, n, b), _omega(ctx, n, ab)
        lhs = _pa(ctx, n, a, z, u1) * _pa(ctx, n, b, z, u2)
        e1 = lambda x: eisenstein1(ctx, x)
        rhs = _pa(ctx, n, ab, z, u1 + u2) * (e1(z) + e1(oa + u1) + e1(ob + u2) - e1(z + oab + u1 + u2))
        worst = max(worst, _rel(lhs, rhs))
    return worst


def formula_ef(ctx: EllipticContext, rng, count: int = 100, n: int = 2) -> float:
    worst = 0.0

    def shifts(a, b):
        oa = _omega(ctx, n, a)
        return [((1, 1, 0), 0), ((0, 0, 1), oa), ((1, 0, 1), oa), ((0, 1, 1), oa), ((1, 1, 1), oa)]

    for a, _, (z1, z2, u) in _draw_alpha(ctx, rng, count, n, 3, shifts):
        lhs = _pa(ctx, n, a, z1, u) * _pa(ctx, n, a, z2, u)
        rhs = _pa(ctx, n, a, z1 + z2, u) * (eisenstein1(ctx, z1) + eisenstein1(ctx, z2)) \
            - _fa(ctx, n, a, z1 + z2, u)
        worst = max(worst, _rel(lhs, rhs))
    return worst


def marked_point_product(ctx: EllipticContext, rng, count: int = 100, n: int = 2) -> float:
    """phi_alpha(z - za) phi_beta(z - zb) at u = 0, alpha, beta, alpha + beta nonzero."""
    worst = 0.0
    done = 0
    while done < count:
        a, b = _random_alpha(rng, n), _random_alpha(rng, n)
        ab = (a[0] + b[0], a[1] + b[1])
        if a == (0, 0) or b == (0, 0) or (ab[0] % n, ab[1] % n) == (0, 0):
            continue
        z, za, zb = draw(ctx, rng, 1, 3, [(1, -1, 0), (1, 0, -1), (0, 1, -1)])[:, 0]
        lhs = _pa(ctx, n, a, z - za, 0) * _pa(ctx, n, b, z - zb, 0)
        rhs = _pa(ctx, n, a, zb - za, 0) * _pa(ctx, n, ab, z - zb, 0) \
            + _pa(ctx, n, b, za - zb, 0) * _pa(ctx, n, ab, z - za, 0)
        worst = max(worst, _rel(lhs, rhs))
        done += 1
    return worst


BASIS_FORMULAS = {
    "formula f": formula_f,
    "formula Phi": formula_phi,
    "marked-point product": marked_point_product,
    "formula E": formula_e,
    "formula Ef": formula_ef,
}


# ---------------------------------------------------------------------------
# finite Fourier transform


def _kappa_sq(alpha, beta, n):
    return kappa(alpha, beta, n) ** 2


def fourier_transform(ctx: EllipticContext, rng, count: int = 100, n: int = 2) -> float:
    """(1/N) sum_alpha kappa^2 phi_alpha(N x, omega_alpha + z/N) = phi_beta(z, omega_beta + x)."""
    idx = list(product(range(n), repeat=2))
    worst = 0.0
    done = 0
    while done < count:
        beta = _random_alpha(rng, n)
        x, z = draw(ctx, rng, 1, 2, [(n, 0), (0, 1.0 / n)])[:, 0]
        # all omega_alpha + z/N and omega_beta + x regular
        ws = [_omega(ctx, n, a) + z / n for a in idx] + [_omega(ctx, n, beta) + x]
        if np.min(lattice_distance(ctx, np.array(ws))) < SAMPLE_MARGIN:
            continue
        lhs = sum(_kappa_sq(a, beta, n) * _pa(ctx, n, a, n * x, z / n) for a in idx) / n
        worst = max(worst, _rel(lhs, _pa(ctx, n, beta, z, x)))
        done += 1
    return worst


def e2_sum(ctx: EllipticContext, rng, count: int = 100, n: int = 2) -> float:
    """sum_alpha E2(omega_alpha + x) = N^2 E2(N x)."""
    idx = list(product(range(n), repeat=2))
    (x,) = draw(ctx, rng, count, 1, [(n,)])
    x = x[np.min([lattice_distance(ctx, _omega(ctx, n, a) + x) for a in idx], axis=0) > SAMPLE_MARGIN]
    lhs = sum(eisenstein2(ctx, _omega(ctx, n, a) + x) for a in idx)
    return _rel(lhs, n * n * eisenstein2(ctx, n * x))


def fourier_e2(ctx: EllipticContext, rng, count: int = 100, n: int = 2) -> float:
    """sum_{alpha != 0} kappa^2 phi_alpha(x, omega_alpha)(E1(x + omega_alpha) - E1(x) + 2 pi i alpha2/N)
    - E2(x) = -E2(omega_beta + x/N)."""
    idx = list(product(range(n), repeat=2))[1:]
    worst = 0.0
    done = 0
    while done < count:
        beta = _random_alpha(rng, n)
        (x,) = draw(ctx, rng, 1, 1, [(1.0 / n, _omega(ctx, n, beta))])[:, 0]
        ws = [_omega(ctx, n, a) + x for a in idx]
        if np.min(lattice_distance(ctx, np.array(ws))) < SAMPLE_MARGIN:
            continue
        s = sum(_kappa_sq(a, beta, n) * _pa(ctx, n, a, x, 0)
                * (eisenstein1(ctx, x + _omega(ctx, n, a)) - eisenstein1(ctx, x) + TWO_PI_I * a[1] / n)
                for a in idx)
        worst = max(worst, _rel(s - eisenstein2(ctx, x), -eisenstein2(ctx, _omega(ctx, n, beta) + x / n)))
        done += 1
    return worst


FOURIER = {
    "finite Fourier transform": fourier_transform,
    "E2 lattice sum": e2_sum,
    "Fourier E2 relation": fourier_e2,
}


def elliptic_identity_suite(ctx: EllipticContext, seed: int = 0, count: int = 100,
                            orders=(2, 3)) -> dict:
    """All named elliptic identities -> max relative residual."""
    rng = np.random.default_rng(seed)
    out = {"addition formula": fay(ctx, rng, count)}
    for name, fn in DEGENERATIONS.items():
        out[name] = fn(ctx, rng, count)
    for name, val in quasi_periodicity(ctx, rng, count).items():
        out[f"quasi-periodicity {name}"] = val
    for n in orders:
        for name, fn in BASIS_FORMULAS.items():
            out[f"{name} N={n}"] = fn(ctx, rng, count, n)
        for name, fn in FOURIER.items():
            out[f"{name} N={n}"] = fn(ctx, rng, count, n)
    return out


# ---------------------------------------------------------------------------
# torus basis


def _neg(a):
    return (-a[0], -a[1])


def _add(a, b):
    return (a[0] + b[0], a[1] + b[1])


def torus_checks(n: int, seed: int = 0, sine_sign: float = -1.0) -> dict:
    """Exhaustive residuals of the basis relations for one N.

    Index sums and negations are formed in Z x Z.  The commutator sine form is
    ``2i sin(sine_sign * pi/N (alpha1 beta2 - alpha2 beta1))``; it holds with
    sine_sign = -1.
    """
    basis = build_basis(n)
    idx = basis.indices
    eye = np.eye(n)
    out = {}
    k = np.arange(1, n + 1)
    q_ref = np.diag(np.exp(2j * np.pi * k / n))
    lam_ref = np.array([[1.0 if (j - kk + 1) % n == 0 else 0.0 for kk in k] for j in k])
    out["T0 identity"] = float(np.max(np.abs(basis.t((0, 0)) - eye)))
    out["generators"] = float(max(np.max(np.abs(basis.q - q_ref)), np.max(np.abs(basis.lam - lam_ref))))
    out["Q^N = 1"] = float(np.max(np.abs(np.linalg.matrix_power(basis.q, n) - eye)))
    out["Lambda^N = 1"] = float(np.max(np.abs(np.linalg.matrix_power(basis.lam, n) - eye)))
    out["T definition"] = max(
        float(np.max(np.abs(basis.t(a) - np.exp(1j * np.pi * a[0] * a[1] / n)
                            * np.linalg.matrix_power(basis.q, a[0]) @ np.linalg.matrix_power(basis.lam, a[1]))))
        for a in idx)
    prod_res = tr_res = br_res = sin_res = kap1 = kap2 = 0.0
    for a, b in product(idx, repeat=2):
        ta, tb, tab = basis.t(a), basis.t(b), basis.t(_add(a, b))
        kab, kba = kappa(a, b, n), kappa(b, a, n)
        prod_res = max(prod_res, float(np.max(np.abs(ta @ tb - kab * tab))))
        if (a[0] + b[0]) % n or (a[1] + b[1]) % n:
            tr_res = max(tr_res, abs(np.trace(ta @ tb)))
        else:
            tr_res = max(tr_res, abs(np.trace(ta @ basis.t(_neg(a))) - n))
        br_res = max(br_res, float(np.max(np.abs(ta @ tb - tb @ ta - (kab - kba) * tab))))
        sin_res = max(sin_res, abs(kab - kba - 2j * np.sin(sine_sign * np.pi / n * (a[0] * b[1] - a[1] * b[0]))))
        kap1 = max(kap1, abs(kappa(a, _add(a, b), n) - kab))
        kap2 = max(kap2, abs(kappa(_neg(a), b, n) - kba))
    out["product"] = prod_res
    out["trace pairing"] = float(tr_res)
    out["commutator"] = br_res
    out["commutator sine form"] = float(sin_res)
    out["kappa shift"] = float(kap1)
    out["kappa negation"] = float(kap2)

    rng = np.random.default_rng(seed)
    p = permutation_operator(n)
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    y = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    out["permutation square"] = float(np.max(np.abs(p @ p - np.eye(n * n))))
    out["permutation swap"] = float(np.max(np.abs(p @ np.kron(x, y) @ p - np.kron(y, x))))
    elementary = np.eye(n * n).reshape(n * n, n, n)
    out["coefficient round trip"] = float(np.max(np.abs(from_coeffs(basis, to_coeffs(basis, elementary))
                                                        - elementary)))
    out["identity coefficient"] = float(np.max(np.abs(to_coeffs(basis, x)[0, 0] - np.trace(x) / n)))
    return out


__all__ = [
    "BASIS_FORMULAS",
    "DEGENERATIONS",
    "FOURIER",
    "cross_derivative",
    "diffsign",
    "draw",
    "e1_square",
    "e2_sum",
    "elliptic_identity_suite",
    "fay",
    "formula_e",
    "formula_ef",
    "formula_f",
    "formula_phi",
    "fourier_e2",
    "fourier_transform",
    "marked_point_product",
    "parity",
    "quasi_periodicity",
    "rho_relation",
    "rho_relation_two_points",
    "same_u_product",
    "same_z_derivative",
    "same_z_product",
    "torus_checks",
]
