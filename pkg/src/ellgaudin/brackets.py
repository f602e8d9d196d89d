"""Brute-force Hamiltonian vector fields from the Poisson structure constants.

Used as an independent oracle for the hand-written equations of motion:
the spin part is sum_Y dH/dS_Y {S_Y, S_X}, the canonical part uses
{p_i, q_j} = delta_ij, and the flow is dx/dt = {H, x}.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .state import ModelSpec, PhaseState, spin_bracket_tensor

# eighth-order central difference weights for offsets 1..4
_FD8 = np.array([4 / 5, -1 / 5, 4 / 105, -1 / 280])


def _gradient_quadratic(func, x0: np.ndarray) -> np.ndarray:
    """Exact gradient of a polynomial of degree <= 2 by unit central differences."""
    g = np.zeros(x0.size, dtype=complex)
    flat = x0.ravel()
    for k in range(flat.size):
        e = np.zeros_like(flat)
        e[k] = 1.0
        g[k] = (func((flat + e).reshape(x0.shape)) - func((flat - e).reshape(x0.shape))) / 2
    return g


def _gradient_smooth(func, x0: np.ndarray, h: float) -> np.ndarray:
    g = np.zeros(x0.size, dtype=complex)
    for k in range(x0.size):
        acc = 0j
        for j, w in enumerate(_FD8, start=1):
            e = np.zeros_like(x0)
            e[k] = j * h
            acc += w * (func(x0 + e) - func(x0 - e))
        g[k] = acc / h
    return g


def bracket_flow(spec: ModelSpec, state: PhaseState,
                 hamiltonian: Callable[[np.ndarray, np.ndarray, np.ndarray], complex],
                 h: float = 1e-3):
    """(dq, dp, dcoef) of the flow generated by ``hamiltonian(q, p, coef)``.

    The Hamiltonian must be at most quadratic in the spin coefficients.
    """
    q, p, coef = state.q.copy(), state.p.copy(), state.coeffs.copy()
    tensor = spin_bracket_tensor(spec)
    g_s = _gradient_quadratic(lambda c: hamiltonian(q, p, c), coef)
    dcoef = np.einsum("y,yxz,z->x", g_s, tensor, coef.ravel()).reshape(coef.shape)
    dq = _gradient_smooth(lambda pp: hamiltonian(q, pp, coef), p, h)
    dp = -_gradient_smooth(lambda qq: hamiltonian(qq, p, coef), q, h)
    return dq, dp, dcoef
