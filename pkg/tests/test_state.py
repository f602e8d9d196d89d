"""Model specification, phase-space state, constraints and spin brackets."""

import itertools

import numpy as np
import pytest

from ellgaudin.state import (
    ModelSpec,
    PhaseState,
    blocks_to_full,
    casimirs,
    constraint_residual,
    dump_json,
    full_to_blocks,
    load_json,
    poisson_structure_constant,
    random_state,
    spin_bracket_tensor,
    zero_spin_state,
)
from conftest import make_spec


def test_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec(2, 2, 2, (0.1, 0.1 + 1), 1j)
    with pytest.raises(ValueError):
        ModelSpec(2, 2, 1, (0,), -1j)
    with pytest.raises(ValueError):
        ModelSpec(2, 2, 2, (0,), 1j)
    with pytest.raises(ValueError):
        ModelSpec(0, 2, 1, (0,), 1j)


def test_state_shape_checked(spec222):
    st = random_state(spec222, 0)
    with pytest.raises(ValueError):
        st.check(make_spec(2, 3, 2))
    with pytest.raises(ValueError):
        PhaseState(st.q, st.p, st.spins[0])


def test_blocks_round_trip(spec222):
    st = random_state(spec222, 3)
    full = blocks_to_full(st.spins[1])
    assert full.shape == (4, 4)
    assert np.array_equal(full_to_blocks(full, 2), st.spins[1])
    # block (i, j) sits at rows i*N.., columns j*N..
    assert np.array_equal(full[0:2, 2:4], st.spins[1, 0, 1])


def test_constraint_residual_traceless_is_zero(spec222):
    st = random_state(spec222, 0)
    spins = st.spins.copy()
    for a in range(2):
        for k in range(2):
            spins[a, k, k] -= np.trace(spins[a, k, k]) / 2 * np.eye(2)
    assert np.abs(constraint_residual(spec222, st.replace(spins=spins))).max() < 1e-15


def test_constraint_residual_detects_violation():
    spec = make_spec(2, 3, 1)
    spins = np.zeros((1, 3, 3, 2, 2), dtype=complex)
    for k in range(3):
        spins[0, k, k] = (k + 1) * np.eye(2)
    st = PhaseState(random_state(spec, 0).q, np.zeros(3), spins)
    assert np.allclose(constraint_residual(spec, st), [-1, 0, 1])


@pytest.mark.parametrize("shape", [(2, 2, 2), (2, 3, 2), (3, 2, 1)])
def test_constrained_sampler(shape):
    spec = make_spec(*shape)
    for seed in range(3):
        st = random_state(spec, seed, constrained=True, constant=0.3)
        assert np.abs(constraint_residual(spec, st)).max() < 1e-12


def test_sampler_deterministic(spec222):
    a, b = random_state(spec222, 5), random_state(spec222, 5)
    assert np.array_equal(a.q, b.q) and np.array_equal(a.spins, b.spins)
    assert not np.array_equal(a.q, random_state(spec222, 6).q)


def test_rank_one_sampler():
    spec = make_spec(2, 3, 1)
    st = random_state(spec, 2, rank_one=True, constrained=True)
    sv = np.linalg.svd(st.residue(0), compute_uv=False)
    assert sv[1] / sv[0] < 1e-12
    assert np.abs(constraint_residual(spec, st)).max() < 1e-12
    with pytest.raises(ValueError):
        random_state(make_spec(2, 2, 2), 0, rank_one=True)


def test_casimirs(spec222, rng):
    st = zero_spin_state(spec222, random_state(spec222, 0).q, np.zeros(2))
    assert np.abs(casimirs(spec222, st, 0, 4)).max() == 0
    ident = np.zeros_like(st.spins)
    ident[0] = full_to_blocks(np.eye(4), 2)
    assert np.allclose(casimirs(spec222, st.replace(spins=ident), 0, 3), [4, 4, 4])
    st = random_state(spec222, 1)
    ev = np.linalg.eigvals(st.residue(1))
    ref = [np.sum(ev**k) for k in range(1, 5)]
    assert np.abs(casimirs(spec222, st, 1, 4) - ref).max() < 1e-10
    with pytest.raises(IndexError):
        casimirs(spec222, st, 2, 2)


def test_json_round_trip(spec222):
    st = random_state(spec222, 9)
    spec2, st2 = load_json(dump_json(spec222, st))
    assert spec2 == spec222
    assert np.array_equal(st2.q, st.q)
    assert np.array_equal(st2.p, st.p)
    assert np.array_equal(st2.spins, st.spins)


def test_bracket_basic_cases():
    spec = make_spec(2, 2, 2)
    assert poisson_structure_constant(spec, (0, 1, 0, (1, 0)), (1, 0, 1, (0, 1))) == {}
    assert poisson_structure_constant(spec, (0, 0, 0, (0, 0)), (0, 0, 0, (0, 0))) == {}


def _evaluate(form, coef):
    return sum(v * coef[a, i, j, g[0], g[1]] for (i, j, a, g), v in form.items())


def test_bracket_antisymmetry():
    spec = make_spec(2, 2, 1)
    coef = random_state(spec, 0).coeffs
    idx = list(itertools.product(range(2), range(2), range(1), [(0, 0), (1, 0), (0, 1), (1, 1)]))
    for x in idx:
        for y in idx:
            xy = _evaluate(poisson_structure_constant(spec, x, y), coef)
            yx = _evaluate(poisson_structure_constant(spec, y, x), coef)
            assert abs(xy + yx) < 1e-14


@pytest.mark.parametrize("shape", [(2, 1, 1), (2, 2, 1)])
def test_bracket_jacobi(shape):
    spec = make_spec(*shape)
    b = spin_bracket_tensor(spec)
    # {{x,y},z} = B[x,y,w] B[w,z,v] s_v, summed cyclically
    t = np.einsum("xyw,wzv->xyzv", b, b)
    jac = t + np.transpose(t, (1, 2, 0, 3)) + np.transpose(t, (2, 0, 1, 3))
    assert np.abs(jac).max() < 1e-12
