"""Effective TLS-only models obtained by eliminating the resonator.

Two regimes are covered:

* dispersive (high-Q) -- the resonator is far detuned, ``g_n << |Delta_nc|``,
  and a unitary frame change removes the linear TLS-resonator coupling;
* bad cavity (strongly damped) -- the resonator field adiabatically follows
  the TLS's, ``<a> = -(i eps0 + i sum g_n <s_n->) / (kappa + i Delta_c)``.

Both produce a Hamiltonian and amplitude-damping rates on the 2^N TLS space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import algebra
from .algebra import OperatorMatrix
from .errors import InvalidRegimeError, ResonantInputError
from .model import LindbladTerm, SystemModel, resonator_op, tls_op

DEFAULT_THRESHOLDS = {"dispersive_ratio": 0.1, "badcavity_ratio": 0.5}


@dataclass(frozen=True, eq=False)
class EffectiveDispersive:
    labels: tuple[str, ...]
    delta_nc: np.ndarray
    delta_bar: np.ndarray
    omega_x: np.ndarray
    induced_decay: np.ndarray
    lam: np.ndarray

    @property
    def n_tls(self) -> int:
        return len(self.labels)

    def coupling(self, n: int, m: int) -> complex:
        return complex(self.lam[n, m])

    def decoherence_rates(self) -> np.ndarray:
        return self.induced_decay


@dataclass(frozen=True, eq=False)
class EffectiveBadCavity:
    labels: tuple[str, ...]
    delta_bar: np.ndarray
    omega: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    lam: np.ndarray

    @property
    def n_tls(self) -> int:
        return len(self.labels)

    def coupling(self, n: int, m: int) -> complex:
        return complex(self.lam[n, m])

    def decoherence_rates(self) -> np.ndarray:
        return self.gamma2


def _readonly(x, dtype=float):
    arr = np.array(x, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _model_arrays(model: SystemModel):
    deltas = np.array([t.delta_n for t in model.tls])
    gs = np.array([t.g_n for t in model.tls])
    return deltas, gs


def dispersive_params(model: SystemModel) -> EffectiveDispersive:
    deltas, gs = _model_arrays(model)
    dc, eps = model.resonator.delta_c, model.drive.epsilon0
    dnc = deltas - dc
    for t, d in zip(model.tls, dnc):
        if d == 0.0:
            raise ResonantInputError(f"TLS {t.label!r} is resonant with the resonator (Delta_nc = 0)")
    if eps != 0.0 and dc == 0.0:
        raise ResonantInputError("drive is on while the resonator is resonant with it (Delta_c = 0)")
    drive_factor = 1.0 - 2.0 * eps / dc if eps != 0.0 else 1.0
    delta_bar = deltas + gs**2 / dnc * drive_factor
    omega_x = 2.0 * eps * gs / dnc
    induced = (gs / dnc) ** 2 * model.resonator.kappa
    lam = np.outer(gs, gs) * (dnc[:, None] + dnc[None, :]) / (2.0 * np.outer(dnc, dnc))
    np.fill_diagonal(lam, 0.0)
    return EffectiveDispersive(
        tuple(t.label for t in model.tls), _readonly(dnc), _readonly(delta_bar),
        _readonly(omega_x), _readonly(induced), _readonly(lam),
    )


def badcavity_params(model: SystemModel) -> EffectiveBadCavity:
    kappa, dc, eps = model.resonator.kappa, model.resonator.delta_c, model.drive.epsilon0
    if not kappa > 0:
        raise InvalidRegimeError("bad-cavity elimination needs kappa > 0")
    deltas, gs = _model_arrays(model)
    denom = kappa**2 + dc**2
    z = kappa + 1j * dc
    delta_bar = deltas - dc * gs**2 / denom
    omega = -1j * gs * eps / z
    gamma2 = gs**2 * kappa / denom
    gamma1 = 2.0 * gamma2
    # formula on the upper triangle, conjugate below: lam[n, m] = conj(lam[m, n])
    upper = np.triu(-1j * np.outer(gs, gs) / z, k=1)
    lam = upper + upper.conj().T
    return EffectiveBadCavity(
        tuple(t.label for t in model.tls), _readonly(delta_bar), _readonly(omega, complex),
        _readonly(gamma1), _readonly(gamma2), _readonly(lam, complex),
    )


def _tls_space(n: int) -> tuple[int, ...]:
    return (2,) * n


def _tls_pauli(n_tls: int, n: int, which: str) -> OperatorMatrix:
    return algebra.embed(algebra.pauli(which), n, _tls_space(n_tls))


def interaction_hamiltonian(params) -> OperatorMatrix:
    """Pairwise exchange part alone (the term that generates iSWAP)."""
    N = params.n_tls
    h = np.zeros((2**N, 2**N), dtype=complex)
    for n in range(N):
        for m in range(n + 1, N):
            lam = params.coupling(n, m)
            hop = (_tls_pauli(N, n, "plus") @ _tls_pauli(N, m, "minus")).data
            h += lam * hop + np.conj(lam) * hop.conj().T
    return OperatorMatrix(h, _tls_space(N))


def detuning_hamiltonian(params) -> OperatorMatrix:
    N = params.n_tls
    h = sum(0.5 * params.delta_bar[n] * _tls_pauli(N, n, "z").data for n in range(N))
    return OperatorMatrix(h, _tls_space(N))


def drive_hamiltonian(params) -> OperatorMatrix:
    N = params.n_tls
    h = np.zeros((2**N, 2**N), dtype=complex)
    for n in range(N):
        if isinstance(params, EffectiveDispersive):
            h += 0.5 * params.omega_x[n] * _tls_pauli(N, n, "x").data
        else:
            sp = _tls_pauli(N, n, "plus").data
            h += params.omega[n] * sp + np.conj(params.omega[n]) * sp.conj().T
    return OperatorMatrix(h, _tls_space(N))


def build_effective_hamiltonian(params: EffectiveDispersive | EffectiveBadCavity) -> OperatorMatrix:
    """TLS-space Hamiltonian of either regime.

    The dispersive single-qubit drive enters as ``(Omega_nx / 2) sigma_x``
    while the bad-cavity one enters as ``Omega_n sigma_+ + h.c.`` with no
    factor 1/2; each follows its own derivation.
    """
    h = (detuning_hamiltonian(params).data + drive_hamiltonian(params).data
         + interaction_hamiltonian(params).data)
    return OperatorMatrix(0.5 * (h + h.conj().T), _tls_space(params.n_tls))


def build_effective_lindblad(params: EffectiveDispersive | EffectiveBadCavity) -> list[LindbladTerm]:
    rates = params.induced_decay if isinstance(params, EffectiveDispersive) else params.gamma1
    return [LindbladTerm(_tls_pauli(params.n_tls, n, "minus"), float(r))
            for n, r in enumerate(rates)]


def dispersive_unitary(model: SystemModel) -> OperatorMatrix:
    """Frame change ``D * prod_n T_n`` that removes the linear coupling.

    ``D = exp(-eps0 (a - a^dag) / Delta_c)`` and
    ``T_n = exp(-g_n (a^dag s_n- - s_n+ a) / Delta_nc)`` in roster order.
    """
    params = dispersive_params(model)
    a = resonator_op(model, "a")
    u = algebra.identity(model.space_tag)
    eps = model.drive.epsilon0
    if eps != 0.0:
        u = algebra.matrix_exp(a - a.dag(), -eps / model.resonator.delta_c)
    for n, t in enumerate(model.tls):
        sm = tls_op(model, n, "minus")
        gen = a.dag() @ sm - sm.dag() @ a
        u = u @ algebra.matrix_exp(gen, -t.g_n / params.delta_nc[n])
    return u


def residual_coupling(model: SystemModel) -> OperatorMatrix:
    """Stark shift plus amplitude coupling left over after the frame change."""
    params = dispersive_params(model)
    a = resonator_op(model, "a")
    num = (a.dag() @ a).data
    quad = (a + a.dag()).data
    eps, dc = model.drive.epsilon0, model.resonator.delta_c
    h = np.zeros((model.dim, model.dim), dtype=complex)
    for n, t in enumerate(model.tls):
        dnc = params.delta_nc[n]
        bracket = num
        if eps != 0.0:
            bracket = num + eps * (dc - 2.0 * dnc) / (2.0 * dnc * dc) * quad
        h += (t.g_n**2 / dnc) * (tls_op(model, n, "z").data @ bracket)
    return OperatorMatrix(h, model.space_tag)


def adiabatic_cavity_amplitude(model: SystemModel, spin_minus, epsilon0: float | None = None) -> complex:
    """Cavity amplitude slaved to the TLS coherences ``<sigma_n->``."""
    kappa = model.resonator.kappa
    if not kappa > 0:
        raise InvalidRegimeError("adiabatic elimination needs kappa > 0")
    eps = model.drive.epsilon0 if epsilon0 is None else epsilon0
    gs = np.array([t.g_n for t in model.tls])
    source = 1j * eps + 1j * np.dot(gs, np.asarray(spin_minus, dtype=complex))
    return complex(-source / (kappa + 1j * model.resonator.delta_c))


@dataclass(frozen=True)
class ValidityReport:
    regime: str
    ratios: dict
    thresholds: dict
    verdicts: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def validity_report(model: SystemModel, regime: str, thresholds: dict | None = None) -> ValidityReport:
    th = dict(DEFAULT_THRESHOLDS)
    th.update(thresholds or {})
    deltas, gs = _model_arrays(model)
    kappa = model.resonator.kappa
    if regime == "dispersive":
        dnc = np.abs(deltas - model.resonator.delta_c)
        with np.errstate(divide="ignore", invalid="ignore"):
            g_ratio = np.where(dnc > 0, np.abs(gs) / dnc, math.inf)
            k_ratio = np.where(dnc > 0, kappa / dnc, math.inf if kappa > 0 else 0.0)
        ratios = {"g_over_delta_nc": float(np.max(g_ratio)),
                  "kappa_over_delta_nc": float(np.max(k_ratio))}
        limit = th["dispersive_ratio"]
    elif regime == "bad_cavity":
        ratio = float(np.max(np.abs(gs))) / kappa if kappa > 0 else math.inf
        ratios = {"g_over_kappa": ratio}
        limit = th["badcavity_ratio"]
    else:
        raise ValueError(f"unknown regime {regime!r}")
    verdicts = {name: value <= limit for name, value in ratios.items()}
    return ValidityReport(regime, ratios, {k: th[k] for k in th}, verdicts)
