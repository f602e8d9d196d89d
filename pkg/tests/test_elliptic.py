"""Theta function, Eisenstein functions, Kronecker function and the identity set."""

import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ellgaudin.elliptic import (
    CharacteristicIndex,
    EllipticContext,
    eisenstein1,
    eisenstein2,
    f_alpha,
    heat_residual_phi,
    kronecker_f,
    kronecker_f_prime,
    kronecker_phi,
    phi_alpha,
    rho,
    richardson_limit,
    theta,
    weierstrass_p,
    weierstrass_p_prime,
)
from ellgaudin.errors import PoleProximity, ZeroCharacteristicAtPole
from ellgaudin import identities as ids

Z = 0.31 + 0.17j
U = 0.21 - 0.13j


def rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


# ---------------------------------------------------------------------------
# context and theta


def test_context_rejects_lower_half_plane():
    with pytest.raises(ValueError):
        EllipticContext(-1j)


def test_theta_vanishes_at_zero_and_is_odd(ctx):
    assert abs(theta(ctx, 0)) < 1e-15
    assert abs(theta(ctx, -Z) + theta(ctx, Z)) < 1e-14


def test_theta_truncation_converged(ctx):
    wide = EllipticContext(ctx.tau, trunc=2 * ctx.trunc)
    for z in (0.25, Z, 0.4 + 0.45j):
        assert rel(theta(ctx, z), theta(wide, z)) < 1e-13


# ---------------------------------------------------------------------------
# Eisenstein functions and wp


def test_e1_leading_pole(ctx):
    z = 1e-3
    assert abs(z * eisenstein1(ctx, z) - 1) < 1e-5


def test_e1_quasi_periods(ctx):
    assert rel(eisenstein1(ctx, Z + 1), eisenstein1(ctx, Z)) < 1e-12
    assert rel(eisenstein1(ctx, Z + ctx.tau), eisenstein1(ctx, Z) - 2j * np.pi) < 1e-12
    assert rel(eisenstein2(ctx, Z + ctx.tau), eisenstein2(ctx, Z)) < 1e-12


def test_e1_is_odd_not_even(ctx):
    assert abs(eisenstein1(ctx, -Z) + eisenstein1(ctx, Z)) < 1e-13
    assert abs(eisenstein1(ctx, -Z) - eisenstein1(ctx, Z)) > 0.1


def test_wp_even_and_shift_constant(ctx):
    assert rel(weierstrass_p(ctx, -Z), weierstrass_p(ctx, Z)) < 1e-13
    d1 = weierstrass_p(ctx, Z) - eisenstein2(ctx, Z)
    d2 = weierstrass_p(ctx, U) - eisenstein2(ctx, U)
    assert abs(d1 - d2) < 1e-12
    assert abs(d1 - ctx.wp_shift) < 1e-12


def test_wp_double_pole(ctx):
    z = 1e-3
    assert abs(z * z * weierstrass_p(ctx, z) - 1) < 1e-4


def test_wp_shift_at_square_lattice():
    # wp has no constant term, so at tau = i the shift E2 -> wp is -pi
    ctx = EllipticContext(1j)
    assert abs(ctx.wp_shift + np.pi) < 1e-12


def test_pole_proximity_raised():
    ctx = EllipticContext(1j)
    with pytest.raises(PoleProximity, match="'z'"):
        kronecker_phi(ctx, 1e-8, 0.3)
    with pytest.raises(PoleProximity):
        eisenstein1(ctx, ctx.tau + 1e-9)


# ---------------------------------------------------------------------------
# Kronecker function


def test_phi_symmetry(ctx):
    assert rel(kronecker_phi(ctx, Z, U), kronecker_phi(ctx, U, Z)) < 1e-12
    assert rel(kronecker_phi(ctx, -Z, -U), -kronecker_phi(ctx, Z, U)) < 1e-12


def test_phi_quasi_period(ctx):
    lhs = kronecker_phi(ctx, Z + ctx.tau, U)
    assert rel(lhs, cmath.exp(-2j * cmath.pi * U) * kronecker_phi(ctx, Z, U)) < 1e-12


def test_phi_product_with_negated_argument(ctx):
    lhs = kronecker_phi(ctx, Z, U) * kronecker_phi(ctx, Z, -U)
    assert rel(lhs, weierstrass_p(ctx, Z) - weierstrass_p(ctx, U)) < 1e-12


def test_f_at_zero(ctx):
    assert rel(kronecker_f(ctx, 0, U), -eisenstein2(ctx, U)) < 1e-12


def test_f_even_under_joint_negation(ctx):
    assert rel(kronecker_f(ctx, -Z, -U), kronecker_f(ctx, Z, U)) < 1e-12


def test_f_prime_at_zero(ctx):
    h = 1e-4
    fd = (weierstrass_p(ctx, U + h) - weierstrass_p(ctx, U - h)) / (2 * h)
    assert abs(kronecker_f_prime(ctx, 0, U) + fd) / abs(fd) < 1e-6
    assert rel(kronecker_f_prime(ctx, 0, U), -weierstrass_p_prime(ctx, U)) < 1e-12


def test_f_matches_u_derivatives_of_phi(ctx):
    d1 = lambda h: (kronecker_phi(ctx, Z, U + h) - kronecker_phi(ctx, Z, U - h)) / (2 * h)
    d2 = lambda h: (kronecker_phi(ctx, Z, U + h) - 2 * kronecker_phi(ctx, Z, U)
                    + kronecker_phi(ctx, Z, U - h)) / (h * h)
    assert rel(richardson_limit(d1, 1e-2), kronecker_f(ctx, Z, U)) < 1e-10
    assert rel(richardson_limit(d2, 1e-2), kronecker_f_prime(ctx, Z, U)) < 1e-8


def test_f_stencil_is_second_order(ctx):
    f = kronecker_f(ctx, Z, U)
    err = [abs((kronecker_phi(ctx, Z, U + h) - kronecker_phi(ctx, Z, U - h)) / (2 * h) - f)
           for h in (4e-3, 2e-3)]
    assert 3.5 < err[0] / err[1] < 4.5


# ---------------------------------------------------------------------------
# rho


def test_rho_even_and_periodic(ctx):
    assert rel(rho(ctx, -Z), rho(ctx, Z)) < 1e-12
    assert rel(rho(ctx, Z + 1), rho(ctx, Z)) < 1e-12


def test_rho_value_at_zero_is_wp_shift(ctx):
    # E1^2 - wp = 2 rho is regular at 0 with value 2 * wp_shift
    assert abs(rho(ctx, 1e-4) - ctx.wp_shift) < 1e-6


def test_rho_is_linear_coefficient_of_phi(ctx):
    u = U
    e1 = eisenstein1(ctx, u)
    lim = richardson_limit(lambda z: (kronecker_phi(ctx, z, u) - 1 / z - e1) / z, 1e-2, levels=5, even=False)
    assert rel(lim, rho(ctx, u)) < 1e-6


# ---------------------------------------------------------------------------
# basis functions


def test_phi_alpha_zero_index_is_phi(ctx):
    idx = CharacteristicIndex(0, 0, 3)
    assert rel(phi_alpha(ctx, idx, Z, U), kronecker_phi(ctx, Z, U)) < 1e-15


def test_phi_alpha_rejects_zero_index_at_pole(ctx):
    with pytest.raises(ZeroCharacteristicAtPole):
        phi_alpha(ctx, CharacteristicIndex(0, 0, 2), Z, 0)


def test_characteristic_index_reduced():
    with pytest.raises(ValueError):
        CharacteristicIndex(2, 0, 2)
    assert CharacteristicIndex(1, 2, 3).omega(1j) == (1 + 2j) / 3


def test_f_alpha_is_u_derivative(ctx):
    idx = CharacteristicIndex(1, 2, 3)
    d = lambda h: (phi_alpha(ctx, idx, Z, U + h) - phi_alpha(ctx, idx, Z, U - h)) / (2 * h)
    assert rel(richardson_limit(d, 1e-2), f_alpha(ctx, idx, Z, U)) < 1e-10


def test_same_alpha_product_n3(ctx):
    idx = CharacteristicIndex(1, 2, 3)
    z1, z2 = 0.23 + 0.11j, -0.17 + 0.29j
    lhs = phi_alpha(ctx, idx, z1, U) * phi_alpha(ctx, idx, z2, U)
    rhs = phi_alpha(ctx, idx, z1 + z2, U) * (eisenstein1(ctx, z1) + eisenstein1(ctx, z2)) \
        - f_alpha(ctx, idx, z1 + z2, U)
    assert rel(lhs, rhs) < 1e-11


# ---------------------------------------------------------------------------
# heat equation


def test_heat_equation_reference_point():
    ctx = EllipticContext(1j)
    assert heat_residual_phi(ctx, 0.3, 0.21) < 1e-5


def test_heat_equation_random_points(ctx, rng):
    z, u = ids.draw(ctx, rng, 50, 2, [(1, 1)], margin=0.15)
    assert max(heat_residual_phi(ctx, a, b) for a, b in zip(z, u)) < 1e-5


def test_heat_equation_second_order(ctx):
    r = [heat_residual_phi(ctx, 0.3, 0.21, h) for h in (4e-3, 2e-3)]
    assert 3.5 < r[0] / r[1] < 4.5


# ---------------------------------------------------------------------------
# named identities


def test_addition_formula(ctx, rng):
    assert ids.fay(ctx, rng, 100) < 1e-11


@pytest.mark.parametrize("name", list(ids.DEGENERATIONS))
def test_degenerations(ctx, rng, name):
    assert ids.DEGENERATIONS[name](ctx, rng, 100) < 1e-10


@pytest.mark.parametrize("fn", [ids.rho_relation, ids.rho_relation_two_points])
def test_rho_relations_fail_with_printed_sign(ctx, rng, fn):
    assert fn(ctx, rng, 20, sign=1.0) > 0.1


def test_quasi_periodicity_table(ctx, rng):
    table = ids.quasi_periodicity(ctx, rng, 100)
    assert len(table) == 8
    assert max(table.values()) < 1e-11


def test_parity_table(ctx, rng):
    par = ids.parity(ctx, rng, 50)
    assert par["E1 odd"] < 1e-12 and par["E1 even"] > 0.1
    assert max(par[k] for k in ("phi symmetric", "phi(-z,-u)", "f(-z,-u)", "rho even")) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("name", list(ids.BASIS_FORMULAS))
def test_basis_addition_formulas(ctx, rng, n, name):
    assert ids.BASIS_FORMULAS[name](ctx, rng, 50, n) < 1e-11


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("name", list(ids.FOURIER))
def test_finite_fourier_transform(ctx, rng, n, name):
    assert ids.FOURIER[name](ctx, rng, 50, n) < 1e-10


@settings(max_examples=40, deadline=None)
@given(
    st.complex_numbers(max_magnitude=0.4, allow_nan=False, allow_infinity=False),
    st.complex_numbers(max_magnitude=0.4, allow_nan=False, allow_infinity=False),
    st.complex_numbers(max_magnitude=0.4, allow_nan=False, allow_infinity=False),
    st.complex_numbers(max_magnitude=0.4, allow_nan=False, allow_infinity=False),
)
def test_addition_formula_property(z1, z2, u1, u2):
    ctx = EllipticContext(1j)
    args = [z1, z2, u1, u2, z1 - z2, u1 + u2]
    if min(abs(a) for a in args) < 0.05:
        return
    phi = lambda z, u: kronecker_phi(ctx, z, u)
    lhs = phi(z1, u1) * phi(z2, u2)
    rhs = phi(z1, u1 + u2) * phi(z2 - z1, u2) + phi(z2, u1 + u2) * phi(z1 - z2, u1)
    assert abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs)) < 1e-10
