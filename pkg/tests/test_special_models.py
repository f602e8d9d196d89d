"""Calogero-Moser, Gaudin, top, multispin, mixed and interacting-tops models."""

import numpy as np
import pytest

from ellgaudin.elliptic import EllipticContext, eisenstein1, eisenstein2
from ellgaudin.lax import build_lax, sample_points
from ellgaudin.special_models import (
    check_rank_one,
    cm_hamiltonian,
    cm_lax,
    cm_lax_residual,
    cm_trace_generator,
    cm_trace_offset,
    gaudin_bracket_flow,
    gaudin_coeffs,
    gaudin_eom_h0,
    gaudin_hamiltonians,
    gaudin_lax_residual,
    gl_flow,
    interacting_tops,
    mixed_hamiltonian,
    mixed_lax_residual,
    multispin_eom_h0,
    multispin_eom_h1a,
    multispin_hamiltonians,
    multispin_lax,
    multispin_lax_residual,
    r3_sides,
    rank_one_spins,
    rk4_path,
    scheme_arrow_residuals,
    spin_cm_eom,
    spin_cm_hamiltonian,
    spin_cm_lax,
    spin_cm_lax_residual,
    top_lax_residual,
    top_pair,
    top_rhs,
    tops_hamiltonian,
)
from ellgaudin.state import default_marked_points, random_state
from ellgaudin.torus import build_basis, coeff, from_coeffs, to_coeffs
from conftest import make_spec

Q3 = np.array([0.2 + 0.3j, 0.5 + 0.1j, 0.7 + 0.6j])


def cnormal(rng, *shape):
    return 0.5 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@pytest.fixture
def zs(ctx):
    return sample_points(make_spec(1, 1, 1, ctx.tau), 8)


def test_cm_single_particle(ctx):
    pair = cm_lax(ctx, [0.4 + 0.2j], [0.7], 0.5)
    z = 0.31 + 0.17j
    assert abs(pair.l(z)[0, 0] - 0.7 - 0.5 * eisenstein1(ctx, z)) < 1e-14
    assert np.abs(pair.m(z)).max() == 0


def test_cm_lax_equation(ctx, rng, zs):
    assert cm_lax_residual(ctx, Q3, cnormal(rng, 3), 0.6 + 0.2j, zs) < 1e-9


def test_cm_trace_reproduces_hamiltonian(ctx, rng):
    nu = 0.6 + 0.2j
    z = 0.31 + 0.17j
    diffs = []
    for q, p in ((Q3, cnormal(rng, 3)), (Q3 + 0.05, cnormal(rng, 3))):
        gen = cm_trace_generator(ctx, q, p, nu, z)
        diffs.append(gen - cm_hamiltonian(ctx, q, p, nu))
        assert abs(gen - cm_trace_offset(ctx, 3, nu, z) - cm_hamiltonian(ctx, q, p, nu)) < 1e-12
    assert abs(diffs[0] - diffs[1]) < 1e-12


def test_spin_cm_with_constant_spins_is_cm(ctx, rng, zs):
    nu = 0.6 + 0.2j
    p = cnormal(rng, 3)
    a, b = spin_cm_lax(ctx, Q3, p, np.full((3, 3), nu)), cm_lax(ctx, Q3, p, nu)
    for z in zs:
        assert np.abs(a.l(z) - b.l(z)).max() < 1e-13


def test_spin_cm_lax_equation(ctx, rng, zs):
    s = cnormal(rng, 3, 3)
    p = cnormal(rng, 3)
    assert spin_cm_lax_residual(ctx, Q3, p, s, zs) < 1e-9
    assert spin_cm_lax_residual(ctx, Q3, p, s, zs, pure=True) > 1e-3
    np.fill_diagonal(s, 0.4)
    assert spin_cm_lax_residual(ctx, Q3, p, s, zs, pure=True) < 1e-9


def test_spin_cm_eom_matches_brackets(ctx, rng):
    s, p = cnormal(rng, 3, 3), cnormal(rng, 3)
    ham = lambda q, pp, sp: spin_cm_hamiltonian(ctx, q, pp, sp[0])
    dq, dp, ds = gl_flow(ham, Q3, p, s[None])
    got = spin_cm_eom(ctx, Q3, p, s, exact=True)
    for x, y in zip(got, (dq, dp, ds[0])):
        assert np.abs(x - y).max() < 1e-10


def test_gaudin_lax_equations(ctx, rng):
    marks = default_marked_points(2, ctx.tau)
    spec = make_spec(2, 1, 2, ctx.tau)
    zsg = sample_points(spec, 8)
    spins = cnormal(rng, 2, 2, 2)
    assert gaudin_lax_residual(ctx, 2, marks, spins, "h0", zsg) < 1e-9
    for a in range(2):
        assert gaudin_lax_residual(ctx, 2, marks, spins, "h1a", zsg, a) < 1e-9


def test_gaudin_eom_matches_brackets(ctx, rng):
    marks = default_marked_points(2, ctx.tau)
    spins = cnormal(rng, 2, 2, 2)
    basis = build_basis(2)
    ham = lambda c: gaudin_hamiltonians(ctx, 2, marks, from_coeffs(basis, c.reshape(2, 2, 2)))[0]
    oracle = gaudin_bracket_flow(2, gaudin_coeffs(2, spins), ham)
    got = to_coeffs(basis, gaudin_eom_h0(ctx, 2, marks, spins))
    assert np.abs(got - oracle).max() < 1e-10


def test_top_single_coefficient_is_static(ctx):
    s = 0.7 * build_basis(3).t((1, 2))
    assert np.abs(top_rhs(ctx, 3, s)).max() < 1e-13


def test_top_lax_equation(ctx, rng, zs):
    assert top_lax_residual(ctx, 3, cnormal(rng, 3, 3), zs) < 1e-9


def test_top_energy_in_coefficients(ctx, rng):
    s = cnormal(rng, 2, 2)
    basis = build_basis(2)
    c = to_coeffs(basis, s)
    ref = 0
    for a in basis.nonzero_indices:
        w = (a[0] + a[1] * ctx.tau) / 2
        # tr(T_alpha T_-alpha) = N
        ref += -0.5 * eisenstein2(ctx, w) * c[a] * coeff(c, (-a[0], -a[1]), 2) * 2
    assert abs(top_pair(ctx, 2, s).h - ref) < 1e-12


def test_top_rank_one_spectrum_preserved(ctx, rng):
    # eigenvalue power sums; the double zero eigenvalue is defective, so
    # eigenvalues themselves are only accurate to sqrt(eps)
    s0 = np.outer(cnormal(rng, 3), cnormal(rng, 3))
    s1 = rk4_path(lambda y: top_rhs(ctx, 3, y), s0, 0.1, 1e-4)[-1]
    for k in (1, 2, 3):
        ref = np.trace(np.linalg.matrix_power(s0, k))
        assert abs(np.trace(np.linalg.matrix_power(s1, k)) - ref) / abs(ref) < 1e-9
    sv = np.linalg.svd(s1, compute_uv=False)
    assert sv[1] / sv[0] < 1e-9


def test_multispin_single_pole_is_spin_cm(ctx, rng, zs):
    s, p = cnormal(rng, 3, 3), cnormal(rng, 3)
    a = multispin_lax(ctx, (0,), Q3, p, s[None]).l
    b = spin_cm_lax(ctx, Q3, p, s).l
    for z in zs:
        assert np.abs(a(z) - b(z)).max() < 1e-13


def test_multispin_matches_general_model(ctx):
    spec = make_spec(1, 3, 2, ctx.tau)
    st = random_state(spec, 0)
    gen = build_lax(spec, st)
    ms = multispin_lax(ctx, spec.marked_points, st.q, st.p, st.spins[..., 0, 0]).l
    for z in sample_points(spec, 5):
        assert np.abs(gen(z) - ms(z)).max() < 1e-12


def test_multispin_lax_equations(ctx):
    spec = make_spec(1, 3, 2, ctx.tau)
    zsm = sample_points(spec, 8)
    marks = spec.marked_points
    st = random_state(spec, 1)
    st_c = random_state(spec, 1, constrained=True, constant=0.2)
    s, s_c = st.spins[..., 0, 0], st_c.spins[..., 0, 0]
    assert multispin_lax_residual(ctx, marks, st.q, st.p, s, zsm) < 1e-9
    assert multispin_lax_residual(ctx, marks, st.q, st.p, s, zsm, "h1a", 1) < 1e-9
    assert multispin_lax_residual(ctx, marks, st_c.q, st_c.p, s_c, zsm, pure=True) < 1e-9
    assert multispin_lax_residual(ctx, marks, st_c.q, st_c.p, s_c, zsm, "h1a", 0, pure=True) < 1e-9


def test_multispin_eom_matches_brackets(ctx, rng):
    marks = default_marked_points(2, ctx.tau)
    s, p = cnormal(rng, 2, 3, 3), cnormal(rng, 3)
    oracle = gl_flow(lambda q, pp, sp: multispin_hamiltonians(ctx, marks, q, pp, sp)[0], Q3, p, s)
    for x, y in zip(multispin_eom_h0(ctx, marks, Q3, p, s), oracle):
        assert np.abs(x - y).max() < 1e-10
    oracle = gl_flow(lambda q, pp, sp: multispin_hamiltonians(ctx, marks, q, pp, sp)[1][1], Q3, p, s)
    for x, y in zip(multispin_eom_h1a(ctx, marks, Q3, p, s, 1), oracle):
        assert np.abs(x - y).max() < 1e-10


def test_mixed_lax_equation(ctx):
    spec = make_spec(2, 2, 1, ctx.tau)
    st = random_state(spec, 0, constrained=True)
    assert mixed_lax_residual(ctx, 2, st.q, st.p, st.spins[0], sample_points(spec, 8)) < 1e-9


@pytest.mark.parametrize("n", [2, 3])
def test_rank_one_coefficient_relation(rng, n):
    lhs, rhs = r3_sides(n, cnormal(rng, 3, n), cnormal(rng, 3, n))
    assert np.abs(lhs - rhs).max() < 1e-11


def test_tops_hamiltonian(ctx, rng):
    xi, eta = cnormal(rng, 2, 2), cnormal(rng, 2, 2)
    q, p = Q3[:2], cnormal(rng, 2)
    ref = mixed_hamiltonian(ctx, 2, q, p, rank_one_spins(xi, eta))
    assert abs(tops_hamiltonian(ctx, 2, q, p, xi, eta) - ref) < 1e-10
    model = interacting_tops(ctx, 2, q, p, xi, eta)
    assert abs(model.h - ref) < 1e-10
    assert model.dspins.shape == (2, 2, 2, 2)


def test_single_top_hamiltonian(ctx, rng):
    xi, eta = cnormal(rng, 1, 2), cnormal(rng, 1, 2)
    p = cnormal(rng, 1)
    spin = rank_one_spins(xi, eta)[0, 0]
    got = tops_hamiltonian(ctx, 2, Q3[:1], p, xi, eta)
    assert abs(got - p[0] ** 2 / 2 - top_pair(ctx, 2, spin).h / 2) < 1e-12


def test_rank_condition_enforced(rng):
    with pytest.raises(ValueError):
        check_rank_one(cnormal(rng, 2, 2, 2, 2))
    check_rank_one(rank_one_spins(cnormal(rng, 2, 2), cnormal(rng, 2, 2)))


@pytest.mark.parametrize("tau", [1j, 0.3 + 0.8j])
def test_scheme_arrows(tau):
    res = scheme_arrow_residuals(seed=0, tau=tau)
    assert len(res) == 7
    assert max(res.values()) < 1e-11, res


def test_cm_rejects_pole():
    from ellgaudin.errors import PoleProximity
    ctx = EllipticContext(1j)
    with pytest.raises(PoleProximity):
        cm_lax(ctx, Q3, np.zeros(3), 0.5).l(1e-9)
