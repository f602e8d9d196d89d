"""Finite Heisenberg group basis T_alpha of Mat(N, C).

``T_alpha = exp(pi i alpha1 alpha2 / N) Q^alpha1 Lambda^alpha2`` is defined here
for every integer pair alpha, not only representatives 0..N-1.  Shifting an
index by N changes T_alpha by a sign, so relations such as
``T_alpha T_beta = kappa_{alpha,beta} T_{alpha+beta}`` and
``T_{-alpha} = T_alpha^{-1}`` are exact when alpha+beta and -alpha are formed in
Z x Z.  Coefficients follow the same rule: ``A_gamma = tr(A T_{-gamma}) / N``
picks up the same sign as ``T_gamma``, so products ``A_gamma T_gamma`` never
depend on the lift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np


@dataclass(frozen=True)
class TorusBasis:
    n_order: int
    q: np.ndarray = field(repr=False)
    lam: np.ndarray = field(repr=False)
    t_matrices: np.ndarray = field(repr=False)  # [a1, a2, row, col], representatives

    @property
    def indices(self) -> list[tuple[int, int]]:
        n = self.n_order
        return [(a1, a2) for a1 in range(n) for a2 in range(n)]

    @property
    def nonzero_indices(self) -> list[tuple[int, int]]:
        return self.indices[1:]

    def t(self, alpha) -> np.ndarray:
        """T_alpha for any integer pair (lift-aware)."""
        a1, a2 = alpha
        n = self.n_order
        return lift_sign(a1, a2, n) * self.t_matrices[a1 % n, a2 % n]


def lift_sign(a1: int, a2: int, n: int) -> int:
    """T_(a1,a2) = lift_sign * T_(a1 mod n, a2 mod n)."""
    k1, r1 = divmod(a1, n)
    k2, r2 = divmod(a2, n)
    return -1 if (k1 * r2 + k2 * r1 + n * k1 * k2) % 2 else 1


@lru_cache(maxsize=None)
def build_basis(n: int) -> TorusBasis:
    if n < 1:
        raise ValueError("N must be >= 1")
    # rows/cols labelled 1..N in the defining formulas
    k = np.arange(1, n + 1)
    q = np.diag(np.exp(2j * np.pi * k / n))
    lam = np.zeros((n, n), dtype=complex)
    for j in range(n):
        lam[j, (j + 1) % n] = 1.0
    t = np.empty((n, n, n, n), dtype=complex)
    for a1, a2 in product(range(n), repeat=2):
        t[a1, a2] = (
            np.exp(1j * np.pi * a1 * a2 / n)
            * np.linalg.matrix_power(q, a1)
            @ np.linalg.matrix_power(lam, a2)
        )
    for arr in (q, lam, t):
        arr.flags.writeable = False
    return TorusBasis(n, q, lam, t)


def kappa(alpha, beta, n: int) -> complex:
    """kappa_{alpha,beta} = exp(pi i / N (alpha2 beta1 - alpha1 beta2))."""
    return np.exp(1j * np.pi / n * (alpha[1] * beta[0] - alpha[0] * beta[1]))


@lru_cache(maxsize=None)
def kappa_table(n: int) -> np.ndarray:
    """kappa[a1, a2, b1, b2] on representatives."""
    a = np.arange(n)
    a1, a2, b1, b2 = np.meshgrid(a, a, a, a, indexing="ij")
    return np.exp(1j * np.pi / n * (a2 * b1 - a1 * b2))


@lru_cache(maxsize=None)
def permutation_operator(n: int) -> np.ndarray:
    """P_12 = (1/N) sum_alpha T_alpha (x) T_{-alpha}, an N^2 x N^2 matrix."""
    basis = build_basis(n)
    p = np.zeros((n * n, n * n), dtype=complex)
    for a in basis.indices:
        p += np.kron(basis.t(a), basis.t((-a[0], -a[1])))
    p /= n
    p.flags.writeable = False
    return p


def to_coeffs(basis: TorusBasis, a: np.ndarray) -> np.ndarray:
    """Coefficient table A[a1, a2] = tr(A T_{-alpha}) / N; accepts a stack (..., N, N)."""
    a = np.asarray(a, dtype=complex)
    n = basis.n_order
    if a.shape[-2:] != (n, n):
        raise ValueError(f"expected trailing shape ({n}, {n}), got {a.shape}")
    # T_{-alpha} = T_alpha^{-1} = T_alpha^dagger (unitary)
    inv = np.conj(np.swapaxes(basis.t_matrices, -1, -2))
    return np.einsum("...rs,absr->...ab", a, inv) / n


def from_coeffs(basis: TorusBasis, table: np.ndarray) -> np.ndarray:
    table = np.asarray(table, dtype=complex)
    n = basis.n_order
    if table.shape[-2:] != (n, n):
        raise ValueError(f"expected coefficient table with trailing shape ({n}, {n})")
    return np.einsum("...ab,abrs->...rs", table, basis.t_matrices)


def coeff(table: np.ndarray, alpha, n: int):
    """Coefficient at an arbitrary integer index, lift sign applied."""
    a1, a2 = alpha
    return lift_sign(a1, a2, n) * table[..., a1 % n, a2 % n]


@lru_cache(maxsize=None)
def shifted_index_tables(n: int):
    """Representatives and lift signs for alpha - beta, alpha + beta and -alpha.

    Returns dict of integer arrays indexed [a1, a2, b1, b2] (or [a1, a2]).
    """
    r = np.arange(n)
    a1, a2, b1, b2 = np.meshgrid(r, r, r, r, indexing="ij")
    out = {}
    for name, g1, g2 in (("minus", a1 - b1, a2 - b2), ("plus", a1 + b1, a2 + b2)):
        sign = np.vectorize(lambda x, y: lift_sign(int(x), int(y), n))(g1, g2)
        out[name] = (g1 % n, g2 % n, sign)
    m1, m2 = np.meshgrid(r, r, indexing="ij")
    sign = np.vectorize(lambda x, y: lift_sign(int(x), int(y), n))(-m1, -m2)
    out["neg"] = ((-m1) % n, (-m2) % n, sign)
    for v in out.values():
        for arr in v:
            arr.flags.writeable = False
    return out


def negate_coeffs(table: np.ndarray, n: int) -> np.ndarray:
    """Table of A_{-alpha} indexed by alpha (lift sign applied)."""
    m1, m2, sign = shifted_index_tables(n)["neg"]
    return sign * table[..., m1, m2]
