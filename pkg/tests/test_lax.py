"""Lax matrix, M-matrices, Hamiltonians and equations of motion of the general model."""

import numpy as np
import pytest

from ellgaudin.brackets import bracket_flow
from ellgaudin.errors import PoleProximity
from ellgaudin.lax import (
    _hamiltonians,
    build_lax,
    build_m0,
    build_m1a,
    eom_h0,
    eom_h0_coeffs,
    eom_h1a,
    eom_h1a_coeffs,
    hamiltonians,
    hamiltonians_via_trace,
    lax_derivative,
    lax_residual_h0,
    lax_residual_h1a,
    lax_residue,
    quasi_periodicity_factors,
    sample_points,
    unwanted_h0,
)
from ellgaudin.state import blocks_to_full, random_state, zero_spin_state
from conftest import make_spec

SHAPES = [(2, 2, 2), (2, 3, 2), (3, 2, 1), (1, 3, 2)]


def rel(a, b):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max() / max(1.0, np.abs(np.asarray(b)).max()))


@pytest.fixture
def zero_state(spec222):
    q = random_state(spec222, 0).q
    return zero_spin_state(spec222, q, np.array([0.3 + 0.1j, -0.7j]))


def test_zero_spins_lax_is_momenta(spec222, zero_state):
    ref = np.kron(np.diag(zero_state.p), np.eye(2))
    for z in sample_points(spec222, 4):
        assert np.abs(build_lax(spec222, zero_state)(z) - ref).max() < 1e-15
        assert np.abs(build_m0(spec222, zero_state)(z)).max() == 0
        assert np.abs(build_m1a(spec222, zero_state, 1)(z)).max() == 0


def test_zero_spins_hamiltonians_and_eom(spec222, zero_state):
    h = hamiltonians(spec222, zero_state)
    assert abs(h.h0 - np.sum(zero_state.p**2) / 2) < 1e-15
    assert max(abs(x) for x in h.h1 + h.h2) == 0
    t = eom_h0(spec222, zero_state)
    assert np.array_equal(t.dq, zero_state.p)
    assert np.abs(t.dp).max() == 0 and np.abs(t.dspins).max() == 0
    t = eom_h1a(spec222, zero_state, 0)
    assert np.abs(t.flat()).max() == 0


def test_zero_spins_lax_residuals(spec222, zero_state):
    zs = sample_points(spec222, 3)
    assert lax_residual_h0(spec222, zero_state, zs) < 1e-15
    assert lax_residual_h1a(spec222, zero_state, 1, zs) < 1e-15


def test_lax_rejects_pole(spec222):
    st = random_state(spec222, 0)
    with pytest.raises(PoleProximity):
        build_lax(spec222, st)(spec222.marked_points[1] + 1e-9)


@pytest.mark.parametrize("shape", SHAPES)
def test_residue_recovers_spins(shape):
    spec = make_spec(*shape)
    st = random_state(spec, 1)
    for a in range(spec.n_poles):
        res, spread = lax_residue(spec, st, a)
        assert spread < 1e-8
        assert rel(res, blocks_to_full(st.spins[a])) < 1e-8


@pytest.mark.parametrize("shape", SHAPES)
def test_quasi_periodicity(shape):
    spec = make_spec(*shape)
    st = random_state(spec, 2, constrained=True)
    lax = build_lax(spec, st)
    g1, gt = quasi_periodicity_factors(spec, st)
    for z in sample_points(spec, 4):
        assert rel(lax(z + 1), g1 @ lax(z) @ np.linalg.inv(g1)) < 1e-9
        assert rel(lax(z + spec.tau), gt @ lax(z) @ np.linalg.inv(gt)) < 1e-9


def test_m1a_is_pole_part_of_lax():
    # sum_a N M_{1,a} + L - P = 0 since the pole parts of L exhaust L - P
    spec = make_spec(2, 2, 2)
    st = random_state(spec, 4)
    pz = np.kron(np.diag(st.p), np.eye(2))
    for z in sample_points(spec, 3):
        total = sum(2 * build_m1a(spec, st, a)(z) for a in range(2)) + build_lax(spec, st)(z) - pz
        assert np.abs(total).max() < 1e-12


def test_h2_is_quadratic_casimir(spec222):
    st = random_state(spec222, 3)
    h = hamiltonians(spec222, st)
    for a in range(2):
        s = st.residue(a)
        assert abs(h.h2[a] - np.trace(s @ s) / 4) < 1e-12


@pytest.mark.parametrize("shape", SHAPES)
def test_sum_of_h1_vanishes_on_constraints(shape):
    spec = make_spec(*shape)
    st = random_state(spec, 5, constrained=True)
    assert abs(sum(hamiltonians(spec, st).h1)) < 1e-10


@pytest.mark.parametrize("shape", [(2, 2, 2), (2, 3, 2)])
def test_hamiltonians_via_trace(shape):
    spec = make_spec(*shape)
    st = random_state(spec, 6, constrained=True)
    ref = hamiltonians(spec, st)
    got, spread = hamiltonians_via_trace(spec, st)
    assert spread < 1e-8
    assert abs(got.h0 - ref.h0) < 1e-8
    assert rel(got.h1, ref.h1) < 1e-8
    assert rel(got.h2, ref.h2) < 1e-8


def test_trace_expansion_zero_spins(spec222, zero_state):
    got, spread = hamiltonians_via_trace(spec222, zero_state)
    assert spread < 1e-12
    assert abs(got.h0 - np.sum(zero_state.p**2) / 2) < 1e-12


def _vs_brackets(spec, st, flow, a=0):
    if flow == "h0":
        ham = lambda q, p, c: _hamiltonians(spec, q, p, c).h0
        ana = eom_h0_coeffs(spec, st.q, st.p, st.coeffs)
    else:
        ham = lambda q, p, c: _hamiltonians(spec, q, p, c).h1[a]
        ana = eom_h1a_coeffs(spec, st.q, st.p, st.coeffs, a)
    ora = bracket_flow(spec, st, ham)
    return max(rel(x, y) for x, y in zip(ana, ora))


@pytest.mark.parametrize("flow,a", [("h0", 0), ("h1a", 0), ("h1a", 1)])
def test_eom_matches_bracket_oracle(spec222, flow, a):
    st = random_state(spec222, 7)
    assert _vs_brackets(spec222, st, flow, a) < 1e-9


def test_h0_preserves_total_diagonal_traces(spec222):
    st = random_state(spec222, 8)
    ds = eom_h0(spec222, st).dspins
    assert np.abs(np.einsum("akkrr->k", ds)).max() < 1e-11


def test_h1a_velocity_single_pole():
    spec = make_spec(2, 3, 1)
    st = random_state(spec, 0)
    assert np.abs(eom_h1a(spec, st, 0).dq - np.einsum("kkrr->k", st.spins[0]) / 2).max() < 1e-15


@pytest.mark.parametrize("shape", SHAPES)
@pytest.mark.parametrize("seed", [0, 1])
def test_lax_equations_with_unwanted_terms(shape, seed):
    spec = make_spec(*shape)
    st = random_state(spec, seed)
    zs = sample_points(spec, 10, seed)
    assert lax_residual_h0(spec, st, zs) < 1e-9
    for a in range(spec.n_poles):
        assert lax_residual_h1a(spec, st, a, zs) < 1e-9


@pytest.mark.parametrize("shape", SHAPES)
def test_pure_lax_equations_on_constraints(shape):
    spec = make_spec(*shape)
    st = random_state(spec, 3, constrained=True, constant=0.4)
    zs = sample_points(spec, 10, 3)
    assert lax_residual_h0(spec, st, zs, pure=True) < 1e-9
    for a in range(spec.n_poles):
        assert lax_residual_h1a(spec, st, a, zs, pure=True) < 1e-9


def test_pure_lax_equation_fails_off_constraints(spec222):
    st = random_state(spec222, 0)
    zs = sample_points(spec222, 10)
    assert lax_residual_h0(spec222, st, zs, pure=True) > 1e-3
    assert lax_residual_h1a(spec222, st, 0, zs, pure=True) > 1e-3


def test_unwanted_term_sign(spec222):
    # the opposite overall sign of the h0 unwanted term does not close the equation
    st = random_state(spec222, 0)
    lax = build_lax(spec222, st)
    m0 = build_m0(spec222, st)
    dl = lax_derivative(spec222, st, eom_h0(spec222, st))
    worst = {}
    for sign in (-1.0, 1.0):
        extra = unwanted_h0(spec222, st, sign)
        worst[sign] = max(
            np.linalg.norm(dl(z) - (lax(z) @ m0(z) - m0(z) @ lax(z)) - extra(z)) / np.linalg.norm(dl(z))
            for z in sample_points(spec222, 5))
    assert worst[-1.0] < 1e-9 and worst[1.0] > 1e-3
