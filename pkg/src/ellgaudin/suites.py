"""Verification suites: named residual checks with tolerances and equation anchors.

A suite is a function ``(spec, seeds, flow) -> list[Check]``.  Checks are
evaluated lazily by ``run_checks`` so that timing covers only the residual
computation.  ``expect="above"`` marks a negative control, which passes when
the residual exceeds the threshold.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .brackets import bracket_flow
from .elliptic import heat_residual_phi
from .flows import Flow, integrate_flow
from .identities import (
    BASIS_FORMULAS,
    DEGENERATIONS,
    FOURIER,
    fay,
    parity,
    quasi_periodicity,
    torus_checks,
)
from .lax import (
    _hamiltonians,
    build_lax,
    eom_h0,
    eom_h0_coeffs,
    eom_h1a,
    eom_h1a_coeffs,
    hamiltonians,
    hamiltonians_via_trace,
    lax_residual_h0,
    lax_residual_h1a,
    lax_residue,
    quasi_periodicity_factors,
    sample_points,
)
from .rmatrix import (
    baxter_belavin,
    identity_samples,
    rlax_build,
    rlax_eom_h0,
    rlax_eom_h1a,
    rlax_hamiltonians,
    rlax_residuals,
    verify_axioms,
    verify_degenerations,
)
from .schlesinger import (
    heat_convergence,
    monodromy_residual_tau,
    monodromy_residual_za,
    painleve_cm_residual,
    tau_path,
    translation_residual,
)
from .special_models import (
    cm_lax_residual,
    gaudin_lax_residual,
    mixed_hamiltonian,
    mixed_lax_residual,
    multispin_lax_residual,
    r3_sides,
    rank_one_spins,
    scheme_arrow_residuals,
    spin_cm_lax_residual,
    top_lax_residual,
    tops_hamiltonian,
)
from .state import ModelSpec, default_marked_points, random_state

SUITE_NAMES = (
    "elliptic-identities",
    "torus-basis",
    "general-lax",
    "special-models",
    "rmatrix",
    "schlesinger",
    "degenerations",
    "flows",
)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    anchor: str
    params: dict
    tolerance: float
    fn: Callable[[], float] = field(repr=False, compare=False)
    expect: str = "below"


@dataclass(frozen=True)
class FlowSettings:
    which: str = "h0"
    t_end: float = 1.0
    dt: float = 1e-3


def run_checks(checks) -> list[dict]:
    """Evaluate checks; a raised exception becomes a failing entry."""
    out = []
    for c in checks:
        t0 = time.perf_counter()
        try:
            res = float(c.fn())
            err = None
        except Exception as exc:  # reported, not raised
            res, err = float("nan"), f"{type(exc).__name__}: {exc}"
        ms = (time.perf_counter() - t0) * 1e3
        if c.expect == "below":
            ok = bool(res < c.tolerance)
        else:
            ok = bool(res > c.tolerance)
        entry = {
            "suite": c.suite,
            "name": c.name,
            "paper_anchor": c.anchor,
            "params": c.params,
            "max_residual": res,
            "tolerance": c.tolerance,
            "pass": ok,
            "wall_time_ms": ms,
        }
        if c.expect != "below":
            entry["params"] = {**c.params, "expect": c.expect}
        if err is not None:
            entry["error"] = err
        out.append(entry)
    return out


def _tau(spec: ModelSpec):
    return [spec.tau.real, spec.tau.imag]


def _rel_vec(a, b) -> float:
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


# ---------------------------------------------------------------------------
# elliptic-identities


_DEGENERATION_ANCHORS = {
    "cross derivative": "derdif",
    "same-z derivative": "a974",
    "diffsign": "diffsign",
    "same-z product": "a975",
    "same-u product": "a976",
    "rho relation two points": "sigma1",
    "E1 square": "Ep",
    "rho relation": "sigma2",
}
_BASIS_ANCHORS = {
    "formula f": "formulaf",
    "formula Phi": "formulaPhi",
    "marked-point product": "formulaPhi",
    "formula E": "formulaEf",
    "formula Ef": "formulaEf",
}


def elliptic_suite(spec: ModelSpec, seeds, flow=None, count: int = 100) -> list[Check]:
    ctx = spec.ctx
    out = []

    def add(name, anchor, seed, fn, tol=1e-10, **extra):
        params = {"tau": _tau(spec), "seed": seed, "points": count, **extra}
        out.append(Check("elliptic-identities", name, anchor, params, tol, fn))

    for s in seeds:
        rng = lambda s=s, k=0: np.random.default_rng([s, k])
        add(f"addition formula seed={s}", "Fay", s, lambda r=rng(s, 1): fay(ctx, r, count), 1e-11)
        for k, (name, fn) in enumerate(DEGENERATIONS.items()):
            add(f"{name} seed={s}", _DEGENERATION_ANCHORS[name], s,
                lambda fn=fn, r=rng(s, 10 + k): fn(ctx, r, count))
        qp = {}

        def quasi(key, r=rng(s, 2), qp=qp):
            if not qp:
                qp.update(quasi_periodicity(ctx, r, count))
            return qp[key]

        for key in ("E1(z+1)", "E1(z+tau)", "E2(z+1)", "E2(z+tau)", "phi(z+1,u)", "phi(z+tau,u)",
                    "f(z+1,u)", "f(z+tau,u)"):
            add(f"quasi-periodicity {key} seed={s}", "percond", s, lambda key=key: quasi(key), 1e-11)
        add(f"E1 odd seed={s}", "Elimits", s, lambda r=rng(s, 3): parity(ctx, r, count)["E1 odd"], 1e-12)
        for n in (2, 3):
            for k, (name, fn) in enumerate(BASIS_FORMULAS.items()):
                add(f"{name} N={n} seed={s}", _BASIS_ANCHORS[name], s,
                    lambda fn=fn, n=n, r=rng(s, 100 * n + k): fn(ctx, r, count, n), N=n)
            for k, (name, fn) in enumerate(FOURIER.items()):
                add(f"{name} N={n} seed={s}", "Appendix", s,
                    lambda fn=fn, n=n, r=rng(s, 200 * n + k): fn(ctx, r, count, n), N=n)

        def heat(r=rng(s, 4)):
            from .identities import draw
            z, u = draw(ctx, r, 50, 2, [(1, 1)], margin=0.15)
            return max(heat_residual_phi(ctx, zz, uu) for zz, uu in zip(z, u))

        add(f"heat equation phi seed={s}", "a142", s, heat, 1e-5, points=50)
    return out


# ---------------------------------------------------------------------------
# torus-basis


_TORUS_ANCHORS = {
    "T0 identity": "a971",
    "T definition": "a971",
    "generators": "a972",
    "Q^N = 1": "a972",
    "Lambda^N = 1": "a972",
    "product": "Tcond",
    "kappa shift": "Tcond",
    "kappa negation": "Tcond",
    "trace pairing": "TrT",
    "commutator": "braketsT",
    "commutator sine form": "braketsT",
    "permutation square": "TrT",
    "permutation swap": "TrT",
    "coefficient round trip": "TrT",
    "identity coefficient": "TrT",
}


def torus_suite(spec: ModelSpec, seeds, flow=None) -> list[Check]:
    out = []
    for s in seeds:
        for n in (1, 2, 3, 4):
            cache = {}

            def get(key, n=n, s=s, cache=cache):
                if not cache:
                    cache.update(torus_checks(n, s))
                return cache[key]

            for key, anchor in _TORUS_ANCHORS.items():
                out.append(Check("torus-basis", f"{key} N={n} seed={s}", anchor, {"N": n, "seed": s},
                                 1e-12, lambda key=key, get=get: get(key)))
    return out


# ---------------------------------------------------------------------------
# general-lax


def _bracket_mismatch(spec, st, flow: str, a: int = 0) -> float:
    if flow == "h0":
        ham = lambda q, p, c: _hamiltonians(spec, q, p, c).h0
        ana = eom_h0_coeffs(spec, st.q, st.p, st.coeffs)
    else:
        ham = lambda q, p, c: _hamiltonians(spec, q, p, c).h1[a]
        ana = eom_h1a_coeffs(spec, st.q, st.p, st.coeffs, a)
    ora = bracket_flow(spec, st, ham)
    return max(_rel_vec(x, y) for x, y in zip(ana, ora))


def _ham_mismatch(spec, st) -> float:
    ref = hamiltonians(spec, st)
    got, _ = hamiltonians_via_trace(spec, st)
    pairs = [(got.h0, ref.h0)] + list(zip(got.h1, ref.h1)) + list(zip(got.h2, ref.h2))
    return max(abs(x - y) / max(1.0, abs(y)) for x, y in pairs)


def _quasi_mismatch(spec, st, zs) -> float:
    lax = build_lax(spec, st)
    g1, gt = quasi_periodicity_factors(spec, st)
    worst = 0.0
    for z in zs:
        lz = lax(z)
        for shifted, g in ((lax(z + 1), g1), (lax(z + spec.tau), gt)):
            ref = g @ lz @ np.linalg.inv(g)
            worst = max(worst, float(np.linalg.norm(shifted - ref) / max(1.0, np.linalg.norm(ref))))
    return worst


def _residue_mismatch(spec, st, a) -> float:
    from .state import blocks_to_full
    res, spread = lax_residue(spec, st, a)
    ref = blocks_to_full(st.spins[a])
    return max(spread, float(np.max(np.abs(res - ref)) / max(1.0, float(np.max(np.abs(ref))))))


def general_lax_suite(spec: ModelSpec, seeds, flow=None) -> list[Check]:
    out = []
    base = {"N": spec.n_inner, "M": spec.m_blocks, "n": spec.n_poles, "tau": _tau(spec)}

    def add(name, anchor, s, fn, tol=1e-9, **extra):
        out.append(Check("general-lax", f"{name} seed={s}", anchor, {**base, "seed": s, **extra}, tol, fn))

    for s in seeds:
        st_u = random_state(spec, s)
        st_c = random_state(spec, s, constrained=True)
        zs = sample_points(spec, 10, s)
        add("h0 Lax with unwanted term", "nonLax", s, lambda: lax_residual_h0(spec, st_u, zs))
        add("h0 pure Lax on constraints", "nonLax", s, lambda: lax_residual_h0(spec, st_c, zs, pure=True))
        add("h0 EOM vs brackets", "qp", s, lambda: _bracket_mismatch(spec, st_u, "h0"))
        for a in range(spec.n_poles):
            add(f"h1a({a}) Lax with unwanted term", "nonLaxh1a", s,
                lambda a=a: lax_residual_h1a(spec, st_u, a, zs))
            add(f"h1a({a}) pure Lax on constraints", "nonLaxh1a", s,
                lambda a=a: lax_residual_h1a(spec, st_c, a, zs, pure=True))
            add(f"h1a({a}) EOM vs brackets", "qpa", s, lambda a=a: _bracket_mismatch(spec, st_u, "h1a", a))
            add(f"residue at z_{a}", "a423", s, lambda a=a: _residue_mismatch(spec, st_u, a), 1e-8)
        add("Hamiltonians vs trace expansion", "a45", s, lambda: _ham_mismatch(spec, st_c), 1e-8)
        add("sum of H1 on constraints", "a49", s, lambda: abs(sum(hamiltonians(spec, st_c).h1)), 1e-10)
        add("quasi-periodicity", "a421", s, lambda: _quasi_mismatch(spec, st_c, zs))
    return out


# ---------------------------------------------------------------------------
# special-models


def _cnormal(rng, shape, scale=0.5):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def special_suite(spec: ModelSpec, seeds, flow=None) -> list[Check]:
    ctx = spec.ctx
    tau = spec.tau
    out = []

    def add(name, anchor, s, fn, tol=1e-9, **extra):
        out.append(Check("special-models", f"{name} seed={s}", anchor,
                         {"tau": _tau(spec), "seed": s, **extra}, tol, fn))

    for s in seeds:
        rng = np.random.default_rng([s, 7])
        marks2 = default_marked_points(2, tau)
        s3 = ModelSpec(1, 3, 1, (0,), tau)
        st3 = random_state(s3, s)
        zs3 = sample_points(s3, 10, s)
        nu = complex(*rng.uniform(0.3, 0.9, 2))
        spins3 = st3.spins[0, :, :, 0, 0]
        add("Calogero-Moser Lax equation", "q0001", s,
            lambda: cm_lax_residual(ctx, st3.q, st3.p, nu, zs3), M=3)
        add("spin Calogero Lax with unwanted term", "a35", s,
            lambda: spin_cm_lax_residual(ctx, st3.q, st3.p, spins3, zs3), M=3)

        sg = ModelSpec(2, 1, 2, marks2, tau)
        stg = random_state(sg, s)
        zsg = sample_points(sg, 10, s)
        gspins = stg.spins[:, 0, 0]
        add("Gaudin h0 Lax equation", "fries1", s,
            lambda: gaudin_lax_residual(ctx, 2, marks2, gspins, "h0", zsg), N=2, n=2)
        for a in range(2):
            add(f"Gaudin h1a({a}) Lax equation", "fries2", s,
                lambda a=a: gaudin_lax_residual(ctx, 2, marks2, gspins, "h1a", zsg, a), N=2, n=2)
        top_spin = _cnormal(rng, (3, 3))
        add("top Lax equation", "McD1", s, lambda: top_lax_residual(ctx, 3, top_spin, zsg), N=3)

        sm = ModelSpec(1, 3, 2, marks2, tau)
        stm = random_state(sm, s)
        stm_c = random_state(sm, s, constrained=True)
        zsm = sample_points(sm, 10, s)
        ms = lambda st: st.spins[..., 0, 0]
        add("multispin h0 Lax with unwanted term", "nonLax", s,
            lambda: multispin_lax_residual(ctx, marks2, stm.q, stm.p, ms(stm), zsm), M=3, n=2)
        add("multispin h0 pure Lax on constraints", "MSCMrest", s,
            lambda: multispin_lax_residual(ctx, marks2, stm_c.q, stm_c.p, ms(stm_c), zsm, pure=True),
            M=3, n=2)
        add("multispin h1a(0) pure Lax on constraints", "MSCMrest", s,
            lambda: multispin_lax_residual(ctx, marks2, stm_c.q, stm_c.p, ms(stm_c), zsm, "h1a", 0,
                                           pure=True), M=3, n=2)

        sx = ModelSpec(2, 2, 1, (0,), tau)
        stx = random_state(sx, s, constrained=True)
        zsx = sample_points(sx, 10, s)
        add("mixed model Lax equation", "Hamburger", s,
            lambda: mixed_lax_residual(ctx, 2, stx.q, stx.p, stx.spins[0], zsx), N=2, M=2)
        xi, eta = _cnormal(rng, (2, 2)), _cnormal(rng, (2, 2))

        def r3():
            lhs, rhs = r3_sides(2, xi, eta)
            return _rel_vec(lhs, rhs)

        add("rank-one coefficient relation", "r3", s, r3, 1e-11, N=2)
        add("interacting tops Hamiltonian", "Hamburger", s,
            lambda: abs(tops_hamiltonian(ctx, 2, stx.q, stx.p, xi, eta)
                        - mixed_hamiltonian(ctx, 2, stx.q, stx.p, rank_one_spins(xi, eta)))
            / max(1.0, abs(mixed_hamiltonian(ctx, 2, stx.q, stx.p, rank_one_spins(xi, eta)))),
            1e-10, N=2, M=2)
    return out


# ---------------------------------------------------------------------------
# rmatrix


_RMATRIX_ANCHORS = {
    "AYBE": "AYB",
    "QYBE": "qYB",
    "Fourier symmetry": "w33",
    "unitarity": "unitarity",
    "CYBE": "CYB",
}


def _rmatrix_anchor(name: str) -> str:
    if name in _RMATRIX_ANCHORS:
        return _RMATRIX_ANCHORS[name]
    if name.startswith("skew"):
        return "serRz"
    if name.startswith("trace"):
        return "traceR"
    if name.startswith("series"):
        return "serRx" if "R^z(x)" in name else "serRz"
    if name.startswith("derivative"):
        return "serRx"
    return "AYBE"


def _rform_agreement(spec, st, kernel, zs) -> float:
    a, b = rlax_build(spec, st, kernel), build_lax(spec, st)
    return max(_rel_vec(a(z), b(z)) for z in zs)


def _rform_hams(spec, st, kernel) -> float:
    a, b = rlax_hamiltonians(spec, st, kernel), hamiltonians(spec, st)
    pairs = [(a.h0, b.h0)] + list(zip(a.h1, b.h1)) + list(zip(a.h2, b.h2))
    return max(abs(x - y) / max(1.0, abs(y)) for x, y in pairs)


def _rform_eoms(spec, st, kernel) -> float:
    worst = 0.0
    pairs = [(rlax_eom_h0(spec, st, kernel), eom_h0(spec, st))]
    pairs += [(rlax_eom_h1a(spec, st, kernel, a), eom_h1a(spec, st, a)) for a in range(spec.n_poles)]
    for x, y in pairs:
        for u, v in ((x.dq, y.dq), (x.dp, y.dp), (x.dspins, y.dspins)):
            worst = max(worst, _rel_vec(u, v))
    return worst


def rmatrix_suite(spec: ModelSpec, seeds, flow=None, samples: int = 3) -> list[Check]:
    ctx = spec.ctx
    out = []
    for s in seeds:
        for n in (2, 3):
            cache = {}

            def records(n=n, s=s, cache=cache):
                if not cache:
                    kernel = baxter_belavin(ctx, n)
                    smp = identity_samples(samples, s)
                    for r in verify_axioms(kernel, smp) + verify_degenerations(kernel, smp):
                        cache[r["name"]] = r["max_residual"]
                return cache

            names = [r["name"] for r in _record_names()]
            for name in names:
                out.append(Check("rmatrix", f"{name} N={n} seed={s}", _rmatrix_anchor(name),
                                 {"N": n, "tau": _tau(spec), "seed": s, "samples": samples}, 1e-9,
                                 lambda name=name, records=records: records()[name]))
        kernel = baxter_belavin(ctx, spec.n_inner)
        st_u = random_state(spec, s)
        st_c = random_state(spec, s, constrained=True)
        zs = sample_points(spec, 5, s)
        base = {"N": spec.n_inner, "M": spec.m_blocks, "n": spec.n_poles, "tau": _tau(spec), "seed": s}

        def add(name, anchor, fn):
            out.append(Check("rmatrix", f"{name} seed={s}", anchor, base, 1e-9, fn))

        add("R-form Lax matrix vs elliptic", "nerL", lambda: _rform_agreement(spec, st_u, kernel, zs))
        add("R-form Hamiltonians vs elliptic", "RH0", lambda: _rform_hams(spec, st_u, kernel))
        add("R-form EOM vs elliptic", "eqmRq0", lambda: _rform_eoms(spec, st_u, kernel))
        add("R-form h0 Lax with unwanted term", "nonLax22",
            lambda: rlax_residuals(spec, st_u, kernel, "h0", zs))
        add("R-form h0 pure Lax on constraints", "Rconstr",
            lambda: rlax_residuals(spec, st_c, kernel, "h0", zs, pure=True))
        for a in range(spec.n_poles):
            add(f"R-form h1a({a}) Lax with unwanted term", "nonLaxh1a22",
                lambda a=a: rlax_residuals(spec, st_u, kernel, "h1a", zs, a=a))
            add(f"R-form h1a({a}) pure Lax on constraints", "Rconstr",
                lambda a=a: rlax_residuals(spec, st_c, kernel, "h1a", zs, a=a, pure=True))
    return out


_NAME_CACHE: list = []


def _record_names():
    """Record names of the axiom and identity reports (computed once, N = 2)."""
    if not _NAME_CACHE:
        from .elliptic import EllipticContext
        kernel = baxter_belavin(EllipticContext(1j), 2)
        smp = identity_samples(1, 0)
        _NAME_CACHE.extend(verify_axioms(kernel, smp) + verify_degenerations(kernel, smp))
    return _NAME_CACHE


# ---------------------------------------------------------------------------
# schlesinger


def _order(residuals) -> float:
    """Deviation of the observed convergence order from 2."""
    r = np.asarray(residuals)
    return float(np.max(np.abs(np.log2(r[:-1] / r[1:]) - 2)))


def schlesinger_suite(spec: ModelSpec, seeds, flow=None) -> list[Check]:
    ctx = spec.ctx
    out = []
    base = {"N": spec.n_inner, "M": spec.m_blocks, "n": spec.n_poles, "tau": _tau(spec)}

    def add(name, anchor, s, fn, tol=1e-5, expect="below", **extra):
        out.append(Check("schlesinger", f"{name} seed={s}", anchor, {**base, "seed": s, **extra},
                         tol, fn, expect))

    for s in seeds:
        z, u = 0.3, 0.21
        phi_heat = {}
        r_heat = {}

        def hp(key, cache=phi_heat):
            if not cache:
                hc = heat_convergence(ctx, z, u)
                cache.update(res=hc.residuals[-1], order=_order(hc.residuals))
            return cache[key]

        def hr(key, cache=r_heat):
            if not cache:
                hc = heat_convergence(ctx, 0.23 + 0.11j, 0.31 - 0.07j, n=2)
                cache.update(res=hc.residuals[-1], order=_order(hc.residuals))
            return cache[key]

        add("heat equation phi", "a142", s, lambda: hp("res"))
        add("heat equation phi second order", "a142", s, lambda: hp("order"), 0.25)
        add("heat equation R", "a143", s, lambda: hr("res"), N=2)
        add("heat equation R second order", "a143", s, lambda: hr("order"), 0.25, N=2)

        st_c = random_state(spec, s, constrained=True)
        st_u = random_state(spec, s)
        zs = sample_points(spec, 3, s)
        add("tau monodromy pure on constraints", "nonLax7", s,
            lambda: monodromy_residual_tau(spec, st_c, zs, pure=True))
        add("tau monodromy with unwanted term", "nonLax7", s, lambda: monodromy_residual_tau(spec, st_u, zs))
        add("tau monodromy without d_z M (negative control)", "nonLax7", s,
            lambda: monodromy_residual_tau(spec, st_c, zs, pure=True, ablate=True), 1e-2, "above")
        for a in range(spec.n_poles):
            add(f"z_{a} monodromy pure on constraints", "nonLaxh1a7", s,
                lambda a=a: monodromy_residual_za(spec, st_c, a, zs, pure=True))
            add(f"z_{a} monodromy with unwanted term", "nonLaxh1a7", s,
                lambda a=a: monodromy_residual_za(spec, st_u, a, zs))
            add(f"z_{a} monodromy without d_z M (negative control)", "nonLaxh1a7", s,
                lambda a=a: monodromy_residual_za(spec, st_c, a, zs, pure=True, ablate=True), 1e-2, "above")
        add("tau path residual", "nonLax7", s,
            lambda: max(tau_path(spec, st_c, zs, pure=True).residuals), steps=5, dtau=[0.0, 1e-3])

        s1 = ModelSpec(spec.n_inner, spec.m_blocks, 1, (0,), spec.tau)
        st1 = random_state(s1, s)
        add("single pole translation", "w451", s,
            lambda: translation_residual(s1, st1, sample_points(s1, 3, s)), 1e-9, n_override=1)

        rng = np.random.default_rng([s, 11])
        q = rng.uniform(0.1, 0.9, 2) + rng.uniform(0.1, 0.9, 2) * spec.tau
        p = _cnormal(rng, 2)
        nu = 0.6 + 0.2j
        zcm = sample_points(ModelSpec(1, 2, 1, (0,), spec.tau), 3, s)
        add("Painleve-Calogero", "w45", s, lambda: painleve_cm_residual(ctx, q, p, nu, zcm), M=2)
        add("Painleve-Calogero nu = 0", "w45", s, lambda: painleve_cm_residual(ctx, q, p, 0.0, zcm),
            1e-9, M=2)
        add("Painleve-Calogero without d_z M (negative control)", "w45", s,
            lambda: painleve_cm_residual(ctx, q, p, nu, zcm, ablate=True), 1e-2, "above", M=2)
    return out


# ---------------------------------------------------------------------------
# degenerations


_ARROW_ANCHORS = {
    "general(M=1)->gaudin": "BigMac",
    "general(N=1)->multispin": "MSCMrest",
    "general(n=1)->mixed": "Hamburger",
    "gaudin(n=1)->top": "McD0",
    "multispin(n=1)->spin_cm": "a36",
    "mixed(rank1)->interacting_tops": "r3",
    "spin_cm(S=nu)->cm": "a24",
}


def degenerations_suite(spec: ModelSpec, seeds, flow=None) -> list[Check]:
    out = []
    for s in seeds:
        cache = {}

        def get(key, s=s, cache=cache):
            if not cache:
                cache.update(scheme_arrow_residuals(s, 5, spec.tau))
            return cache[key]

        for key, anchor in _ARROW_ANCHORS.items():
            out.append(Check("degenerations", f"{key} seed={s}", anchor,
                             {"tau": _tau(spec), "seed": s, "z_samples": 5}, 1e-11,
                             lambda key=key, get=get: get(key)))
    return out


# ---------------------------------------------------------------------------
# flows


def flow_run(spec: ModelSpec, seed: int, settings: FlowSettings, dt: float | None = None):
    st = random_state(spec, seed, constrained=True, scale=0.1)
    return integrate_flow(spec, st, Flow.parse(settings.which), settings.t_end,
                          settings.dt if dt is None else dt, record_every=10)


def drift_summary(traj) -> dict:
    d = traj.drift()
    return {
        "H0_drift": d["H0"],
        "H1_drifts": [d[k] for k in sorted(d) if k.startswith("H1_")],
        "casimir_drifts": [d[k] for k in sorted(d) if k.startswith("casimir_")],
        "specpoly_drifts": [d[k] for k in sorted(d) if k.startswith("charpoly_")],
    }


def flows_suite(spec: ModelSpec, seeds, flow: FlowSettings | None = None) -> list[Check]:
    settings = flow or FlowSettings()
    out = []
    for s in seeds:
        runs = {}

        def summary(half: bool, s=s, runs=runs):
            if half not in runs:
                dt = settings.dt / 2 if half else settings.dt
                runs[half] = drift_summary(flow_run(spec, s, settings, dt))
            return runs[half]

        def worst(half, key):
            v = summary(half)[key]
            return float(np.max(v)) if np.size(v) else 0.0

        params = {"N": spec.n_inner, "M": spec.m_blocks, "n": spec.n_poles, "tau": _tau(spec), "seed": s,
                  "flow": settings.which, "t_end": settings.t_end, "dt": settings.dt}
        for key, anchor in (("H0_drift", "H0"), ("H1_drifts", "a46"), ("casimir_drifts", "a47"),
                            ("specpoly_drifts", "a45")):
            out.append(Check("flows", f"{key} seed={s}", anchor, params, 1e-8,
                             lambda key=key: worst(False, key)))

        def ratio():
            a = max(worst(False, k) for k in ("H0_drift", "H1_drifts", "casimir_drifts", "specpoly_drifts"))
            b = max(worst(True, k) for k in ("H0_drift", "H1_drifts", "casimir_drifts", "specpoly_drifts"))
            # drifts at roundoff carry no convergence information
            return 1.0 / max(a / max(b, 1e-300), 1e-300) if a > 1e-11 else 0.0

        out.append(Check("flows", f"dt halving inverse drift ratio seed={s}", "H0", params, 0.1, ratio))
    return out


SUITES: dict[str, Callable] = {
    "elliptic-identities": elliptic_suite,
    "torus-basis": torus_suite,
    "general-lax": general_lax_suite,
    "special-models": special_suite,
    "rmatrix": rmatrix_suite,
    "schlesinger": schlesinger_suite,
    "degenerations": degenerations_suite,
    "flows": flows_suite,
}


def build_checks(suites, spec: ModelSpec, seeds, flow: FlowSettings | None = None) -> list[Check]:
    out = []
    for name in suites:
        out.extend(SUITES[name](spec, list(seeds), flow))
    return out


__all__ = [
    "Check",
    "FlowSettings",
    "SUITES",
    "SUITE_NAMES",
    "build_checks",
    "drift_summary",
    "flow_run",
    "run_checks",
]
