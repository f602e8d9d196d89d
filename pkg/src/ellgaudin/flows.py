"""Fixed-step RK4 integration of the H0 and H_{1,a} flows with drift monitoring."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import EllipticError, IntegrationAborted
from .lax import build_lax, eom_h0_coeffs, eom_h1a_coeffs, hamiltonians
from .state import ModelSpec, PhaseState, casimirs, position_clearance
from .torus import from_coeffs, to_coeffs


@dataclass(frozen=True)
class Flow:
    """``kind`` is "h0" or "h1a"; ``a`` selects the marked point for h1a."""

    kind: str
    a: int = 0

    def __post_init__(self):
        if self.kind not in ("h0", "h1a"):
            raise ValueError(f"unknown flow {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "Flow":
        text = text.strip()
        if text == "h0":
            return cls("h0")
        if text.startswith("h1a"):
            return cls("h1a", int(text[3:].strip("()[]:") or 0))
        raise ValueError(f"cannot parse flow {text!r}")

    def label(self) -> str:
        return "h0" if self.kind == "h0" else f"h1a({self.a})"


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    conserved: dict  # name -> array over recorded times
    probe: complex
    extra: dict = field(default_factory=dict)

    def drift(self) -> dict:
        """max_t |Q(t) - Q(0)| / |Q(0)| (absolute when |Q(0)| < 1e-8)."""
        out = {}
        for name, vals in self.conserved.items():
            ref = abs(vals[0])
            out[name] = float(np.max(np.abs(vals - vals[0])) / (ref if ref > 1e-8 else 1.0))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        m = self.states[0].q.size
        names = sorted(self.conserved)
        header = ["t"]
        for v in ("q", "p"):
            for i in range(m):
                header += [f"{v}{i}_re", f"{v}{i}_im"]
        for nme in names:
            header += [f"{nme}_re", f"{nme}_im"]
        w.writerow(header)
        for k, t in enumerate(self.times):
            row = [repr(float(t))]
            st = self.states[k]
            for arr in (st.q, st.p):
                for x in arr:
                    row += [repr(float(x.real)), repr(float(x.imag))]
            for nme in names:
                x = self.conserved[nme][k]
                row += [repr(float(x.real)), repr(float(x.imag))]
            w.writerow(row)
        return buf.getvalue()


def default_probe(spec: ModelSpec) -> complex:
    return 0.1731 + 0.4127 * spec.tau


def conserved_quantities(spec: ModelSpec, state: PhaseState, probe: complex) -> dict:
    out = {}
    hams = hamiltonians(spec, state)
    out["H0"] = hams.h0
    for b, v in enumerate(hams.h1):
        out[f"H1_{b}"] = v
    size = spec.size
    for a in range(spec.n_poles):
        for k, v in enumerate(casimirs(spec, state, a, size), start=1):
            out[f"casimir_{a}_{k}"] = v
    lz = build_lax(spec, state)(probe)
    for k in (2, 3):
        out[f"trL{k}"] = np.trace(np.linalg.matrix_power(lz, k))
    for k, c in enumerate(np.poly(lz)[1:], start=1):
        out[f"charpoly_{k}"] = c
    return out


def _vector_field(spec: ModelSpec, flow: Flow):
    if flow.kind == "h0":
        return lambda q, p, c: eom_h0_coeffs(spec, q, p, c)
    return lambda q, p, c: eom_h1a_coeffs(spec, q, p, c, flow.a)


def integrate_flow(spec: ModelSpec, state0: PhaseState, flow: Flow, t_end: float, dt: float,
                   record_every: int = 1, probe: complex | None = None) -> Trajectory:
    """Classical RK4; raises IntegrationAborted if a position nears a pole."""
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    state0.check(spec)
    probe = default_probe(spec) if probe is None else probe
    raw_field = _vector_field(spec, flow)

    def field_fn(qq, pp, cc, t):
        try:
            return raw_field(qq, pp, cc)
        except EllipticError as exc:
            raise IntegrationAborted(t, str(exc)) from exc

    basis = spec.basis
    q, p, c = state0.q.copy(), state0.p.copy(), to_coeffs(basis, state0.spins)
    steps = int(round(t_end / dt))
    times, states = [0.0], [state0]
    cons = {k: [v] for k, v in conserved_quantities(spec, state0, probe).items()}
    clearance = position_clearance(spec, q)

    for step in range(1, steps + 1):
        t = step * dt
        k1 = field_fn(q, p, c, t - dt)
        stages = [k1]
        for frac in (0.5, 0.5, 1.0):
            prev = stages[-1]
            qs = q + frac * dt * prev[0]
            if position_clearance(spec, qs) < spec.pole_eps:
                raise IntegrationAborted(t - dt, "RK stage entered a pole-exclusion zone")
            stages.append(field_fn(qs, p + frac * dt * prev[1], c + frac * dt * prev[2], t - dt))
        k1, k2, k3, k4 = stages
        q = q + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        p = p + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        c = c + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p)) and np.all(np.isfinite(c))):
            raise IntegrationAborted(t, "non-finite state")
        clear_now = position_clearance(spec, q)
        clearance = min(clearance, clear_now)
        if clear_now < spec.pole_eps:
            raise IntegrationAborted(t, "positions entered a pole-exclusion zone")
        if step % record_every == 0 or step == steps:
            st = PhaseState(q, p, from_coeffs(basis, c))
            times.append(t)
            states.append(st)
            for k, v in conserved_quantities(spec, st, probe).items():
                cons[k].append(v)
    return Trajectory(np.array(times), states, {k: np.array(v) for k, v in cons.items()}, probe,
                      {"min_clearance": clearance, "flow": flow.label(), "dt": dt})
