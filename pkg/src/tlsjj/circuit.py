"""RF-SQUID circuit parameters to resonator frequency and TLS coupling.

Energies are angular frequencies (rad/us) and the phase is the reduced
``phi = 2 e Phi / hbar``.  The linearized resonator is

    U(phi) = -E_J cos(phi) + E_L (phi + phi_ex)^2 / 2
    omega_c = sqrt(8 E_C (E_L + E_J cos phi_s))
    g = E_J j_x sin(phi_s) sqrt(4 E_C / omega_c)

with ``phi_s`` the selected minimum of U.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateCircuitError

PHASE_TOL = 1e-12


@dataclass(frozen=True)
class CircuitParams:
    E_J: float
    E_L: float
    E_C: float
    phi_ex: float = 0.0

    def __post_init__(self):
        for name in ("E_J", "E_L", "E_C"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive, got {value}")
        if not math.isfinite(self.phi_ex):
            raise ValueError("phi_ex must be finite")


@dataclass(frozen=True)
class TlsPolarization:
    j_x: float

    def __post_init__(self):
        if not abs(self.j_x) <= 1.0:
            raise ValueError(f"|j_x| must be <= 1, got {self.j_x}")


def _force(phi, c: CircuitParams):
    return c.E_L * (phi + c.phi_ex) + c.E_J * math.sin(phi)


def _curvature(phi, c: CircuitParams):
    return c.E_L + c.E_J * math.cos(phi)


def _newton(c: CircuitParams, lo: float, hi: float, max_iter: int = 60):
    phi = -c.phi_ex
    for _ in range(max_iter):
        slope = _curvature(phi, c)
        if slope <= 0:
            return None
        step = _force(phi, c) / slope
        phi -= step
        if not lo <= phi <= hi:
            return None
        if abs(step) < PHASE_TOL:
            return phi
    return None


def solve_phase_shift(circuit: CircuitParams) -> float:
    """Stable flux minimum ``phi_s`` closest to the bare-inductor point ``-phi_ex``.

    Every stationary point satisfies ``E_L |phi + phi_ex| <= E_J``, so the
    search is confined to that bracket.  With ``E_L > E_J`` the root is
    unique and Newton from ``-phi_ex`` normally converges; otherwise (or on
    Newton failure) sign changes on a grid are refined by bisection.
    """
    c = circuit
    half = c.E_J / c.E_L
    lo, hi = -c.phi_ex - half, -c.phi_ex + half
    if c.E_L > c.E_J:
        phi = _newton(c, lo, hi)
        if phi is not None:
            return phi
    n = max(64, int(64 * half))
    grid = np.linspace(lo, hi, n + 1)
    vals = np.array([_force(p, c) for p in grid])
    roots = []
    for k in range(n):
        if vals[k] == 0.0:
            roots.append(float(grid[k]))
        elif vals[k] * vals[k + 1] < 0:
            roots.append(brentq(_force, grid[k], grid[k + 1], args=(c,), xtol=PHASE_TOL, rtol=4 * np.finfo(float).eps))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    stable = [r for r in roots if _curvature(r, c) > 0]
    if not stable:
        raise DegenerateCircuitError(
            f"no stable flux minimum for E_J={c.E_J}, E_L={c.E_L}, phi_ex={c.phi_ex}"
        )
    return min(stable, key=lambda r: abs(r + c.phi_ex))


def resonator_frequency(circuit: CircuitParams) -> float:
    phi_s = solve_phase_shift(circuit)
    stiffness = _curvature(phi_s, circuit)
    if stiffness <= 0:
        raise DegenerateCircuitError("flux minimum is not stable")
    return math.sqrt(8.0 * circuit.E_C * stiffness)


def coupling_constant(circuit: CircuitParams, pol: TlsPolarization) -> float:
    phi_s = solve_phase_shift(circuit)
    omega_c = resonator_frequency(circuit)
    phi_zpf = math.sqrt(4.0 * circuit.E_C / omega_c)
    return circuit.E_J * pol.j_x * math.sin(phi_s) * phi_zpf
