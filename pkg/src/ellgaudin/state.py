"""Model specification, phase-space points and the spin Poisson structure.

Indices are 0-based throughout: blocks i, j in range(M), marked points a in
range(n), characteristics alpha in range(N) x range(N).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .elliptic import EllipticContext, lattice_distance
from .torus import TorusBasis, build_basis, kappa, lift_sign, to_coeffs

# positions are kept this far (in lattice distance) from every pole of the
# phi_alpha(., omega_alpha + q_ij / N) family
POSITION_MARGIN = 0.04


@dataclass(frozen=True)
class ModelSpec:
    n_inner: int
    m_blocks: int
    n_poles: int
    marked_points: tuple
    tau: complex = 1j
    trunc: int = 30
    pole_eps: float = 1e-6
    fd_step: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "marked_points", tuple(complex(z) for z in self.marked_points))
        object.__setattr__(self, "tau", complex(self.tau))
        if min(self.n_inner, self.m_blocks, self.n_poles) < 1:
            raise ValueError("N, M and n must be positive")
        if len(self.marked_points) != self.n_poles:
            raise ValueError(f"expected {self.n_poles} marked points, got {len(self.marked_points)}")
        if not self.tau.imag > 0:
            raise ValueError("Im(tau) must be positive")
        zs = np.array(self.marked_points)
        for a in range(self.n_poles):
            for b in range(a + 1, self.n_poles):
                if lattice_distance(self.ctx, zs[a] - zs[b]) < self.pole_eps:
                    raise ValueError(f"marked points z_{a} and z_{b} coincide modulo the lattice")

    @cached_property
    def ctx(self) -> EllipticContext:
        return EllipticContext(self.tau, self.trunc, self.pole_eps, self.fd_step)

    @cached_property
    def basis(self) -> TorusBasis:
        return build_basis(self.n_inner)

    @property
    def size(self) -> int:
        return self.n_inner * self.m_blocks

    def with_marked_points(self, points) -> "ModelSpec":
        return ModelSpec(self.n_inner, self.m_blocks, self.n_poles, tuple(points), self.tau,
                         self.trunc, self.pole_eps, self.fd_step)

    def with_tau(self, tau) -> "ModelSpec":
        return ModelSpec(self.n_inner, self.m_blocks, self.n_poles, self.marked_points, tau,
                         self.trunc, self.pole_eps, self.fd_step)

    def to_dict(self) -> dict:
        return {
            "N": self.n_inner,
            "M": self.m_blocks,
            "n": self.n_poles,
            "tau": [self.tau.real, self.tau.imag],
            "marked_points": [[z.real, z.imag] for z in self.marked_points],
        }

    @classmethod
    def from_dict(cls, d: dict, **kwargs) -> "ModelSpec":
        return cls(int(d["N"]), int(d["M"]), int(d["n"]),
                   tuple(complex(*z) for z in d["marked_points"]), complex(*d["tau"]), **kwargs)


def blocks_to_full(blocks: np.ndarray) -> np.ndarray:
    """(..., M, M, N, N) block grid -> (..., NM, NM) with E_ij (x) block ordering."""
    *lead, m, _, n, _ = blocks.shape
    return np.swapaxes(blocks, -3, -2).reshape(*lead, m * n, m * n)


def full_to_blocks(full: np.ndarray, n: int) -> np.ndarray:
    *lead, s, _ = full.shape
    m = s // n
    return np.swapaxes(full.reshape(*lead, m, n, m, n), -3, -2)


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Unreduced phase-space point: positions, momenta and residue blocks S^{ij,a}."""

    q: np.ndarray
    p: np.ndarray
    spins: np.ndarray  # (n, M, M, N, N)

    def __post_init__(self):
        for name in ("q", "p", "spins"):
            arr = np.array(getattr(self, name), dtype=complex)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.q.shape != self.p.shape or self.q.ndim != 1:
            raise ValueError("q and p must be 1-d arrays of equal length")
        if self.spins.ndim != 5 or self.spins.shape[1:3] != (self.q.size,) * 2:
            raise ValueError(f"spins must have shape (n, M, M, N, N), got {self.spins.shape}")

    @property
    def dims(self) -> tuple[int, int, int]:
        n, m, _, nn, _ = self.spins.shape
        return nn, m, n

    @cached_property
    def coeffs(self) -> np.ndarray:
        """S^{ij,a}_alpha on representatives, shape (n, M, M, N, N)."""
        return to_coeffs(build_basis(self.dims[0]), self.spins)

    def residue(self, a: int) -> np.ndarray:
        return blocks_to_full(self.spins[a])

    def replace(self, q=None, p=None, spins=None) -> "PhaseState":
        return PhaseState(self.q if q is None else q, self.p if p is None else p,
                          self.spins if spins is None else spins)

    def check(self, spec: ModelSpec) -> None:
        if self.dims != (spec.n_inner, spec.m_blocks, spec.n_poles):
            raise ValueError(f"state dims {self.dims} do not match spec "
                             f"{(spec.n_inner, spec.m_blocks, spec.n_poles)}")
        bad = position_clearance(spec, self.q)
        if bad < spec.pole_eps:
            raise ValueError("positions put a phi_alpha argument on a pole")

    def to_dict(self) -> dict:
        def pairs(arr):
            flat = np.asarray(arr).ravel()
            return [[float(x.real), float(x.imag)] for x in flat]

        return {"q": pairs(self.q), "p": pairs(self.p), "spins": pairs(self.spins),
                "spins_shape": list(self.spins.shape)}

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseState":
        def arr(pairs):
            a = np.asarray(pairs, dtype=float)
            return a[:, 0] + 1j * a[:, 1]

        return cls(arr(d["q"]), arr(d["p"]), arr(d["spins"]).reshape(d["spins_shape"]))


def dump_json(spec: ModelSpec, state: PhaseState) -> str:
    return json.dumps({"model": spec.to_dict(), "state": state.to_dict()})


def load_json(text: str) -> tuple[ModelSpec, PhaseState]:
    d = json.loads(text)
    return ModelSpec.from_dict(d["model"]), PhaseState.from_dict(d["state"])


def position_clearance(spec: ModelSpec, q) -> float:
    """Smallest lattice distance of omega_alpha + q_ij/N over i != j and all alpha."""
    n = spec.n_inner
    q = np.asarray(q, dtype=complex)
    m = q.size
    if m < 2:
        return np.inf
    a = np.arange(n)
    om = ((a[:, None] + a[None, :] * spec.tau) / n).ravel()
    diffs = (q[:, None] - q[None, :])[~np.eye(m, dtype=bool)] / n
    return float(lattice_distance(spec.ctx, om[:, None] + diffs[None, :]).min())


# ---------------------------------------------------------------------------
# constraints and Casimirs


def trace_coeffs(state: PhaseState) -> np.ndarray:
    """S^{kk,a}_{0,0} = tr(S^{kk,a})/N, shape (n, M)."""
    n_inner = state.dims[0]
    return np.einsum("akkrr->ak", state.spins) / n_inner


def constraint_residual(spec: ModelSpec, state: PhaseState) -> np.ndarray:
    """c_k = sum_a S^{kk,a}_00 minus its mean over k."""
    totals = trace_coeffs(state).sum(axis=0)
    return totals - totals.mean()


def constraint_constant(state: PhaseState) -> complex:
    return complex(trace_coeffs(state).sum(axis=0).mean())


def casimirs(spec: ModelSpec, state: PhaseState, a: int, k_max: int) -> np.ndarray:
    if not 0 <= a < spec.n_poles:
        raise IndexError(f"marked point index {a} out of range(0, {spec.n_poles})")
    s = state.residue(a)
    out = []
    power = np.eye(s.shape[0], dtype=complex)
    for _ in range(k_max):
        power = power @ s
        out.append(np.trace(power))
    return np.array(out)


# ---------------------------------------------------------------------------
# Poisson structure of the spin coefficients


def poisson_structure_constant(spec: ModelSpec, x: Sequence, y: Sequence) -> dict:
    """{S^{ij,a}_alpha, S^{km,b}_beta} as a linear form in the spin coefficients.

    ``x = (i, j, a, alpha)`` and ``y = (k, m, b, beta)`` with alpha, beta
    pairs.  Returns {(i', j', a', gamma): coefficient} with gamma reduced to a
    representative and the lift sign folded into the coefficient.
    """
    i, j, a, al = x
    k, m, b, be = y
    n = spec.n_inner
    out: dict = {}
    if a != b:
        return out
    g = (al[0] + be[0], al[1] + be[1])
    rep = (g[0] % n, g[1] % n)
    sgn = lift_sign(*g, n)

    def add(key, val):
        out[key] = out.get(key, 0) + val
        if abs(out[key]) < 1e-15:
            del out[key]

    if i == m:
        add((k, j, a, rep), sgn * kappa(al, be, n) / n)
    if k == j:
        add((i, m, a, rep), -sgn * kappa(be, al, n) / n)
    return out


def spin_bracket_tensor(spec: ModelSpec) -> np.ndarray:
    """Dense structure-constant tensor B[x, y, z] with {s_x, s_y} = sum_z B s_z.

    Coordinates are flattened over (a, i, j, alpha1, alpha2) in C order.
    """
    n, m, npole = spec.n_inner, spec.m_blocks, spec.n_poles
    shape = (npole, m, m, n, n)
    size = int(np.prod(shape))
    tensor = np.zeros((size, size, size), dtype=complex)
    coords = list(np.ndindex(*shape))
    for xi, (a, i, j, a1, a2) in enumerate(coords):
        for yi, (b, k, l, b1, b2) in enumerate(coords):
            if a != b:
                continue
            for (i2, j2, a3, g), val in poisson_structure_constant(
                    spec, (i, j, a, (a1, a2)), (k, l, b, (b1, b2))).items():
                tensor[xi, yi, np.ravel_multi_index((a3, i2, j2, *g), shape)] += val
    return tensor


# ---------------------------------------------------------------------------
# sampling


def _sample_positions(spec: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    m = spec.m_blocks
    for _ in range(10_000):
        q = rng.uniform(0.1, 0.9, m) + rng.uniform(0.1, 0.9, m) * spec.tau
        if position_clearance(spec, q) > POSITION_MARGIN:
            return q
    raise RuntimeError("could not place positions away from poles")


def _cnormal(rng, shape, scale=0.5):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_state(spec: ModelSpec, seed: int, constrained: bool = False, rank_one: bool = False,
                 constant: complex = 0.0, scale: float = 0.5) -> PhaseState:
    """Reproducible random state.

    With ``constrained`` the moment map sum_a S^{kk,a}_00 is set to ``constant``
    for every k by shifting S^{kk,n-1} by a multiple of the identity (or, for
    rank-one data, by projecting eta^k so the state stays rank one).
    ``scale`` is the standard deviation of the real and imaginary parts of
    momenta and spin entries; small values keep complex flows inside the cell.
    """
    if rank_one and spec.n_poles != 1:
        raise ValueError("rank_one sampling is only defined for a single marked point (n=1)")
    rng = np.random.default_rng(seed)
    n, m, npole = spec.n_inner, spec.m_blocks, spec.n_poles
    q = _sample_positions(spec, rng)
    p = _cnormal(rng, m, scale)
    if rank_one:
        xi = _cnormal(rng, (m, n), np.sqrt(scale))
        eta = _cnormal(rng, (m, n), np.sqrt(scale))
        if constrained:
            for k in range(m):
                excess = eta[k] @ xi[k] - constant * n
                eta[k] = eta[k] - excess * np.conj(xi[k]) / (np.conj(xi[k]) @ xi[k])
        spins = np.einsum("ir,js->ijrs", xi, eta)[None]
    else:
        spins = _cnormal(rng, (npole, m, m, n, n), scale)
        if constrained:
            totals = np.einsum("akkrr->k", spins) / n
            for k in range(m):
                spins[-1, k, k] -= (totals[k] - constant) * np.eye(n)
    return PhaseState(q, p, spins)


def zero_spin_state(spec: ModelSpec, q, p) -> PhaseState:
    n, m, npole = spec.n_inner, spec.m_blocks, spec.n_poles
    return PhaseState(q, p, np.zeros((npole, m, m, n, n), dtype=complex))


def default_marked_points(n_poles: int, tau: complex) -> tuple:
    """Deterministic, well separated marked points inside the fundamental cell."""
    base = [0.0, 0.37 + 0.29 * tau, 0.71 + 0.58 * tau, 0.19 + 0.77 * tau]
    if n_poles > len(base):
        return tuple((k / n_poles) * (0.93 + 0.61 * tau) for k in range(n_poles))
    return tuple(base[:n_poles])


@dataclass
class Tangent:
    """Velocity of a phase-space point (dq, dp, dspins)."""

    dq: np.ndarray
    dp: np.ndarray
    dspins: np.ndarray
    extra: dict = field(default_factory=dict)

    def scaled(self, c) -> "Tangent":
        return Tangent(c * self.dq, c * self.dp, c * self.dspins)

    def flat(self) -> np.ndarray:
        return np.concatenate([self.dq.ravel(), self.dp.ravel(), self.dspins.ravel()])
