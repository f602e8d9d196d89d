"""Baxter-Belavin R-matrix, its expansions and the R-matrix form of the Lax pair."""

import numpy as np
import pytest

from ellgaudin.elliptic import kronecker_phi, weierstrass_p
from ellgaudin.lax import build_lax, eom_h0, eom_h1a, hamiltonians, sample_points
from ellgaudin.rmatrix import (
    RMatrixKernel,
    baxter_belavin,
    classical_parts,
    embed,
    heat_residual_r,
    identity_samples,
    printed_trace_residuals,
    ptrace,
    rlax_build,
    rlax_eom_h0,
    rlax_eom_h1a,
    rlax_hamiltonians,
    rlax_residuals,
    rtop_inertia,
    swap12,
    trace_residuals,
    unitarity_residuals,
    unitarity_scalar,
    verify_axioms,
    verify_degenerations,
)
from ellgaudin.special_models import top_inertia
from ellgaudin.state import random_state, zero_spin_state
from ellgaudin.torus import build_basis, from_coeffs, permutation_operator, to_coeffs
from conftest import make_spec

Z, X = 0.41 + 0.2j, 0.22 - 0.1j


def rel(a, b):
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


def test_tensor_helpers(rng):
    n = 2
    a = rng.normal(size=(n, n))
    b = rng.normal(size=(n, n))
    ab = np.kron(a, b)
    assert np.allclose(swap12(ab, n), np.kron(b, a))
    assert np.allclose(ptrace(ab, n, 1), np.trace(a) * b)
    assert np.allclose(ptrace(ab, n, 2), np.trace(b) * a)
    assert np.allclose(embed(ab, 1, 3, n), np.kron(np.kron(a, np.eye(n)), b))
    # tr_12(A_1 B_2 P_12) = tr(AB)
    assert abs(np.trace(ab @ permutation_operator(n)) - np.trace(a @ b)) < 1e-12


def test_scalar_kernel_is_kronecker_function(ctx):
    k = baxter_belavin(ctx, 1)
    assert abs(k(Z, X)[0, 0] - kronecker_phi(ctx, X, Z)) < 1e-14


@pytest.mark.parametrize("n", [2, 3])
def test_axioms_and_identities(ctx, n):
    kernel = baxter_belavin(ctx, n)
    samples = identity_samples(2, seed=1)
    records = verify_axioms(kernel, samples) + verify_degenerations(kernel, samples)
    failed = [r for r in records if not r["pass"]]
    assert not failed, failed
    names = {r["name"] for r in records}
    assert {"AYBE", "QYBE", "Fourier symmetry", "unitarity", "CYBE", "half CYBE"} <= names
    assert len(verify_degenerations(kernel, samples)) >= 9
    for r in records:
        assert set(r) == {"name", "N", "samples", "max_residual", "pass"}


@pytest.mark.parametrize("n", [2, 3])
def test_unitarity_uses_full_spectral_argument(ctx, n):
    kernel = baxter_belavin(ctx, n)
    res = unitarity_residuals(kernel, Z, X)
    assert res["wp(z)"] < 1e-12
    assert res["wp(z/N)"] > 0.1
    s, dev = unitarity_scalar(kernel, Z, X)
    assert dev < 1e-12
    assert abs(s - weierstrass_p(ctx, Z) + weierstrass_p(ctx, X)) < 1e-11


@pytest.mark.parametrize("n", [2, 3])
def test_traces_of_normalised_kernel(ctx, n):
    kernel = baxter_belavin(ctx, n)
    assert max(trace_residuals(kernel, Z, X).values()) < 1e-12
    printed = printed_trace_residuals(kernel, Z, X)
    assert printed["tr1 R"] > 0.1 and printed["tr1 m"] > 0.1


@pytest.mark.parametrize("n", [2, 3])
def test_classical_parts_match_limits(ctx, n):
    parts = classical_parts(baxter_belavin(ctx, n), X)
    assert max(parts.r_check, parts.m_check, parts.f0_check) < 1e-6
    assert rel(parts.r, -swap12(classical_parts(baxter_belavin(ctx, n), -X).r, n)) < 1e-10


def test_generic_kernel_runs_through_checks(ctx):
    # the same kernel without closed forms exercises the numerical limits
    bb = baxter_belavin(ctx, 2)
    plain = RMatrixKernel(bb.eval, 2, ctx)
    smp = identity_samples(1, seed=2)
    worst = max(r["max_residual"] for r in verify_degenerations(plain, smp))
    assert worst < 1e-7
    assert rel(plain.r_matrix(X), bb.r_matrix(X)) < 1e-9


@pytest.mark.parametrize("n", [2, 3])
def test_heat_equation(ctx, n):
    assert heat_residual_r(ctx, n, Z, X) < 1e-5
    r = [heat_residual_r(ctx, n, Z, X, h) for h in (4e-3, 2e-3)]
    assert 3.5 < r[0] / r[1] < 4.5


@pytest.mark.parametrize("n", [2, 3])
def test_top_inertia_from_m0(ctx, rng, n):
    kernel = baxter_belavin(ctx, n)
    s = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    s -= np.trace(s) / n * np.eye(n)
    basis = build_basis(n)
    js = from_coeffs(basis, to_coeffs(basis, s) * top_inertia(ctx, n))
    assert rel(rtop_inertia(kernel, s), js / n) < 1e-12
    assert rel(rtop_inertia(kernel, np.eye(n)), ctx.wp_shift / n * np.eye(n)) < 1e-12


def test_zero_spins(spec222):
    kernel = baxter_belavin(spec222.ctx, 2)
    st = zero_spin_state(spec222, random_state(spec222, 0).q, np.array([0.4, -0.2j]))
    for z in sample_points(spec222, 3):
        assert np.abs(rlax_build(spec222, st, kernel)(z) - np.kron(np.diag(st.p), np.eye(2))).max() < 1e-15
    h = rlax_hamiltonians(spec222, st, kernel)
    assert abs(h.h0 - np.sum(st.p**2) / 2) < 1e-15
    assert max(abs(v) for v in h.h1 + h.h2) == 0


@pytest.mark.parametrize("shape", [(2, 2, 2), (3, 2, 1)])
def test_rform_matches_elliptic_form(shape):
    spec = make_spec(*shape)
    kernel = baxter_belavin(spec.ctx, spec.n_inner)
    st = random_state(spec, 1)
    for z in sample_points(spec, 4):
        assert rel(rlax_build(spec, st, kernel)(z), build_lax(spec, st)(z)) < 1e-9
    a, b = rlax_hamiltonians(spec, st, kernel), hamiltonians(spec, st)
    assert abs(a.h0 - b.h0) < 1e-9
    assert rel(np.array(a.h1), np.array(b.h1)) < 1e-9
    assert rel(np.array(a.h2), np.array(b.h2)) < 1e-9
    pairs = [(rlax_eom_h0(spec, st, kernel), eom_h0(spec, st))]
    pairs += [(rlax_eom_h1a(spec, st, kernel, a), eom_h1a(spec, st, a)) for a in range(spec.n_poles)]
    for x, y in pairs:
        assert rel(x.flat(), y.flat()) < 1e-9


def test_rform_h2_is_quadratic_casimir(spec222):
    st = random_state(spec222, 2)
    h = rlax_hamiltonians(spec222, st, baxter_belavin(spec222.ctx, 2))
    for a in range(2):
        assert abs(h.h2[a] - np.trace(st.residue(a) @ st.residue(a)) / 4) < 1e-12


def test_rform_lax_equations(spec222):
    kernel = baxter_belavin(spec222.ctx, 2)
    zs = sample_points(spec222, 5)
    st = random_state(spec222, 3)
    st_c = random_state(spec222, 3, constrained=True, constant=0.1)
    assert rlax_residuals(spec222, st, kernel, "h0", zs) < 1e-9
    assert rlax_residuals(spec222, st_c, kernel, "h0", zs, pure=True) < 1e-9
    assert rlax_residuals(spec222, st, kernel, "h0", zs, pure=True) > 1e-3
    for a in range(2):
        assert rlax_residuals(spec222, st, kernel, "h1a", zs, a=a) < 1e-9
        assert rlax_residuals(spec222, st_c, kernel, "h1a", zs, a=a, pure=True) < 1e-9
    with pytest.raises(ValueError):
        rlax_residuals(spec222, st, kernel, "h2", zs)
