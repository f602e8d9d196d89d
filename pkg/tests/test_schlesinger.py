"""Monodromy-preserving equations in tau and z_a, and the Painleve-Calogero case."""

import numpy as np
import pytest

from ellgaudin.elliptic import EllipticContext
from ellgaudin.lax import sample_points
from ellgaudin.schlesinger import (
    heat_convergence,
    monodromy_residual_tau,
    monodromy_residual_za,
    painleve_cm_residual,
    tau_path,
    translation_residual,
)
from ellgaudin.state import random_state, zero_spin_state
from conftest import make_spec

Q2 = np.array([0.2 + 0.3j, 0.6 + 0.5j])


@pytest.fixture
def zs(spec222):
    return sample_points(spec222, 4)


def test_zero_spins_trivial(spec222, zs):
    st = zero_spin_state(spec222, random_state(spec222, 0).q, np.array([0.3, 0.1j]))
    assert monodromy_residual_tau(spec222, st, zs) < 1e-15
    assert monodromy_residual_za(spec222, st, 1, zs) < 1e-15


@pytest.mark.parametrize("shape", [(2, 2, 2), (2, 3, 2), (3, 2, 1)])
def test_tau_equation(shape):
    spec = make_spec(*shape)
    zs = sample_points(spec, 4)
    st = random_state(spec, 1)
    st_c = random_state(spec, 1, constrained=True, constant=0.2)
    assert monodromy_residual_tau(spec, st, zs) < 1e-5
    assert monodromy_residual_tau(spec, st_c, zs, pure=True) < 1e-5


@pytest.mark.parametrize("shape", [(2, 2, 2), (2, 3, 2)])
def test_za_equation(shape):
    spec = make_spec(*shape)
    zs = sample_points(spec, 4)
    st = random_state(spec, 2)
    st_c = random_state(spec, 2, constrained=True)
    for a in range(spec.n_poles):
        assert monodromy_residual_za(spec, st, a, zs) < 1e-5
        assert monodromy_residual_za(spec, st_c, a, zs, pure=True) < 1e-5


def test_tau_residual_is_second_order(spec222, zs):
    st = random_state(spec222, 0, constrained=True)
    r = [monodromy_residual_tau(spec222, st, zs, pure=True, h=h) for h in (4e-3, 2e-3)]
    assert 3.5 < r[0] / r[1] < 4.5


def test_heat_term_is_load_bearing(spec222, zs):
    st = random_state(spec222, 0, constrained=True)
    assert monodromy_residual_tau(spec222, st, zs, pure=True, ablate=True) > 1e-2
    assert monodromy_residual_za(spec222, st, 0, zs, pure=True, ablate=True) > 1e-2


def test_unit_scale_fails_for_n2(spec222, zs):
    st = random_state(spec222, 0, constrained=True)
    assert monodromy_residual_tau(spec222, st, zs, pure=True, m_scale=1.0) > 1e-2


def test_unit_scale_is_exact_for_n1():
    spec = make_spec(1, 3, 2)
    st = random_state(spec, 0, constrained=True)
    assert monodromy_residual_tau(spec, st, sample_points(spec, 4), pure=True, m_scale=1.0) < 1e-5


def test_single_pole_translation():
    spec = make_spec(2, 2, 1)
    st = random_state(spec, 3)
    assert translation_residual(spec, st, sample_points(spec, 4)) < 1e-9
    with pytest.raises(ValueError):
        translation_residual(make_spec(2, 2, 2), random_state(make_spec(2, 2, 2), 0), [0.3])


def test_painleve_calogero(ctx, rng):
    zs = sample_points(make_spec(1, 1, 1, ctx.tau), 4)
    p = rng.normal(size=2) + 1j * rng.normal(size=2)
    nu = 0.5 + 0.2j
    assert painleve_cm_residual(ctx, Q2, p, nu, zs) < 1e-5
    assert painleve_cm_residual(ctx, Q2[:1], p[:1], nu, zs) < 1e-5
    assert painleve_cm_residual(ctx, Q2, p, 0.0, zs) < 1e-9
    assert painleve_cm_residual(ctx, Q2, p, nu, zs, ablate=True) > 1e-2
    # without the scalar rho term in M the equation does not close
    assert painleve_cm_residual(ctx, Q2, p, nu, zs, scalar=False) > 1e-3


def test_heat_convergence_ratios():
    ctx = EllipticContext(1j)
    for n in (None, 2):
        conv = heat_convergence(ctx, 0.3 + 0.1j, 0.21 - 0.05j, n)
        assert all(3.5 < r < 4.5 for r in conv.ratios)
        assert conv.residuals[-1] < 1e-5


@pytest.mark.slow
def test_tau_path(spec222):
    st = random_state(spec222, 0, constrained=True, scale=0.3)
    path = tau_path(spec222, st, sample_points(spec222, 3), steps=5, pure=True)
    assert len(path.residuals) == 6
    assert max(path.residuals) < 1e-5
    assert abs(path.taus[-1] - spec222.tau - 5e-3j) < 1e-15
