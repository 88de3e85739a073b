"""Resonator-based readout of the TLS's.

Covers the stationary quadrature signal of a strongly damped resonator, the
choice of measurement phase, the photon-number / TLS-correlation identity,
regression-theorem extraction of decay rates, and the dispersive pull.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import algebra, solver
from .algebra import DensityMatrix
from .effective import dispersive_params
from .errors import InvalidRegimeError
from .model import SystemModel, resonator_op, tls_op

TRANSIENT_KAPPA_TIMES = 5.0
FIT_FLOOR = 1e-3
FIT_RESIDUAL_WARN = 0.10


@dataclass(frozen=True, eq=False)
class QuadratureSignal:
    offset: float
    tls_weights: np.ndarray  # rows (w_x, w_y) per TLS

    def __call__(self, sx, sy) -> float:
        sx, sy = np.asarray(sx, dtype=float), np.asarray(sy, dtype=float)
        return float(self.offset + self.tls_weights[:, 0] @ sx + self.tls_weights[:, 1] @ sy)


def _denominator(model: SystemModel) -> float:
    denom = model.resonator.kappa**2 + model.resonator.delta_c**2
    if denom == 0:
        raise InvalidRegimeError("kappa = delta_c = 0: quadrature signal undefined")
    return denom


def quadrature_weights(model: SystemModel) -> QuadratureSignal:
    denom = _denominator(model)
    kappa, dc = model.resonator.kappa, model.resonator.delta_c
    gs = np.array([t.g_n for t in model.tls])
    weights = np.column_stack([-gs * dc / denom, -gs * kappa / denom])
    weights.setflags(write=False)
    return QuadratureSignal(-2.0 * model.drive.epsilon0 * dc / denom, weights)


def quadrature_signal(model: SystemModel, spin_expectations) -> float:
    """Stationary ``<a + a^dag>`` from per-TLS ``(<sigma_x>, <sigma_y>)`` pairs."""
    pairs = np.asarray(spin_expectations, dtype=float).reshape(model.n_tls, 2)
    return quadrature_weights(model)(pairs[:, 0], pairs[:, 1])


def weights_independent(model: SystemModel, tol: float = 1e-9) -> bool:
    """True when every pair of weight rows is linearly independent."""
    w = quadrature_weights(model).tls_weights
    for n in range(len(w)):
        for m in range(n + 1, len(w)):
            cross = w[n, 0] * w[m, 1] - w[n, 1] * w[m, 0]
            if abs(cross) <= tol * (np.linalg.norm(w[n]) * np.linalg.norm(w[m]) + 1e-300):
                return False
    return True


def measurement_phase(g1: float, kappa: float, delta_c: float) -> float:
    """``arg(-i g1 / (kappa + i delta_c))`` in (-pi, pi]."""
    if g1 == 0:
        raise ValueError("measurement phase is undefined for g1 = 0")
    if kappa == 0 and delta_c == 0:
        raise InvalidRegimeError("kappa = delta_c = 0: measurement phase undefined")
    phase = float(np.angle(-1j * g1 / complex(kappa, delta_c)))
    return math.pi if phase <= -math.pi else phase


def rotated_quadrature(amplitude: complex, phase: float) -> float:
    """``<a e^{-i phase} + a^dag e^{i phase}>`` for a field amplitude ``<a>``."""
    return 2.0 * float(np.real(amplitude * np.exp(-1j * phase)))


@dataclass(frozen=True, eq=False)
class CorrelationRecord:
    times: np.ndarray
    C: np.ndarray
    M: np.ndarray
    photon: np.ndarray
    predicted: np.ndarray


@dataclass(frozen=True, eq=False)
class CorrelationCheck:
    record: CorrelationRecord
    residual: float
    scale: float
    window_start: float
    trajectory: solver.Trajectory = field(repr=False)

    @property
    def relative_residual(self) -> float:
        return self.residual / self.scale if self.scale > 0 else 0.0


def photon_correlation_check(model: SystemModel, rho0: DensityMatrix, t_grid,
                             method: str = "rk4", max_dt: float | None = None) -> CorrelationCheck:
    """Compare ``<a^dag a>(t)`` of the full model with the adiabatic identity

        <a^dag a> = (g^2 C + g eps0 M + eps0^2) / (kappa^2 + Delta_c^2)

    where ``C = <s+ s->`` and ``M = <s+ + s->`` of the single TLS.  The
    residual is the largest absolute mismatch after ``5 / kappa``.
    """
    if model.n_tls != 1:
        raise ValueError("the correlation identity is stated for a single TLS")
    kappa = model.resonator.kappa
    if not kappa > 0:
        raise InvalidRegimeError("correlation identity needs kappa > 0")
    g = model.tls[0].g_n
    if kappa < 3 * abs(g):
        warnings.warn(f"kappa/g = {kappa / abs(g):.2f} < 3: adiabatic identity is unreliable",
                      RuntimeWarning, stacklevel=2)
    sp = tls_op(model, 0, "plus")
    a = resonator_op(model, "a")
    obs = {"photon": a.dag() @ a, "C": sp @ sp.dag(), "M": sp + sp.dag()}
    traj = solver.evolve(rho0, model, t_grid, method, observables=obs, store_states=False,
                         max_dt=max_dt)
    photon = traj.expectations["photon"].real
    C = traj.expectations["C"].real
    M = traj.expectations["M"].real
    eps = model.drive.epsilon0
    predicted = (g**2 * C + g * eps * M + eps**2) / _denominator(model)
    times = np.asarray(t_grid, dtype=float)
    start = TRANSIENT_KAPPA_TIMES / kappa
    mask = times >= start
    if not np.any(mask):
        raise ValueError(f"time grid ends before the transient window {start:.3g} us")
    residual = float(np.max(np.abs(photon[mask] - predicted[mask])))
    scale = float(np.max(np.abs(photon[mask])))
    record = CorrelationRecord(times, C, M, photon, predicted)
    return CorrelationCheck(record, residual, scale, start, traj)


@dataclass(frozen=True)
class RegressionFit:
    rate: float
    frequency: float
    fit_residual: float
    points: int
    warnings: tuple[str, ...] = ()


def fit_complex_exponential(taus, signal) -> RegressionFit:
    """Log-linear fit of ``c0 exp((i w - r) tau)`` over the window where
    ``|signal|`` stays above ``1e-3`` of its initial magnitude."""
    taus = np.asarray(taus, dtype=float)
    signal = np.asarray(signal, dtype=complex)
    amp = np.abs(signal)
    notes = []
    if amp[0] == 0:
        return RegressionFit(math.nan, math.nan, math.inf, 0, ("zero initial correlation",))
    above = amp > FIT_FLOOR * amp[0]
    stop = int(np.argmin(above)) if not above.all() else above.size
    if stop < 3:
        return RegressionFit(math.nan, math.nan, math.inf, stop, ("too few points above floor",))
    t, s = taus[:stop], signal[:stop]
    slope, intercept = np.polyfit(t, np.log(np.abs(s)), 1)
    freq, phase0 = np.polyfit(t, np.unwrap(np.angle(s)), 1)
    model = np.exp(intercept + slope * t + 1j * (phase0 + freq * t))
    resid = float(np.max(np.abs(model - s)) / amp[0])
    if resid > FIT_RESIDUAL_WARN:
        notes.append(f"non-exponential signal: fit residual {resid:.2%}")
    return RegressionFit(float(-slope), float(freq), resid, stop, tuple(notes))


def regression_extract(L_eff: solver.Liouvillian, rho_ss: DensityMatrix, taus,
                       slot: int | None = None, method: str = "rk4") -> RegressionFit:
    """Decay rate and frequency of ``<sigma_+(tau) sigma_-(0)>`` for one TLS.

    ``slot`` defaults to the first two-level subsystem of the space.
    """
    tag = L_eff.space_tag
    if slot is None:
        slot = next(k for k, d in enumerate(tag) if d == 2)
    sp = algebra.embed(algebra.pauli("plus"), slot, tag)
    corr = solver.two_time_correlation(L_eff, rho_ss, sp, sp.dag(), taus, method)
    fit = fit_complex_exponential(taus, corr)
    stationarity = np.linalg.norm(L_eff.apply(rho_ss))
    if stationarity > 1e-6 * max(1.0, L_eff.frequency_scale):
        fit = RegressionFit(fit.rate, fit.frequency, fit.fit_residual, fit.points,
                            fit.warnings + ("rho_ss is not stationary under L_eff",))
    return fit


@dataclass(frozen=True)
class ReadoutPull:
    chi: float
    excited: float
    ground: float


def dispersive_readout_shift(model: SystemModel, n: int) -> ReadoutPull:
    """Resonator detunings ``Delta_c +/- g_n^2 / Delta_nc`` for TLS ``n``
    excited / in the ground state."""
    params = dispersive_params(model)
    chi = model.tls[n].g_n**2 / params.delta_nc[n]
    dc = model.resonator.delta_c
    return ReadoutPull(float(chi), float(dc + chi), float(dc - chi))
