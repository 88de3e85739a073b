"""Gate synthesis, fidelities, Lie closure and decoherence budgets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import algebra, solver
from .algebra import OperatorMatrix
from .effective import (EffectiveBadCavity, EffectiveDispersive, build_effective_hamiltonian,
                        build_effective_lindblad, detuning_hamiltonian, dispersive_params,
                        dispersive_unitary, drive_hamiltonian, interaction_hamiltonian)
from .errors import GateError
from .model import LindbladTerm, Schedule, SystemModel
from .solver import Liouvillian

DETUNING_TOL = 1e-3
UNITARY_TOL = 1e-8
CLOSURE_TOL = 1e-8

ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=complex)


@dataclass(frozen=True)
class GateReport:
    target: str
    duration: float
    fidelity_unitary: float
    fidelity_open: float
    ops_budget: float

    def __post_init__(self):
        for name in ("fidelity_unitary", "fidelity_open"):
            value = getattr(self, name)
            if not -1e-12 <= value <= 1 + 1e-12:
                raise ValueError(f"{name}={value} outside [0, 1]")
        if self.fidelity_open > self.fidelity_unitary + 1e-9:
            raise ValueError("open-system fidelity exceeds the unitary fidelity")


@dataclass(frozen=True)
class LieClosureResult:
    dimension: int
    generations: int
    basis_norms: tuple[float, ...]
    closed: bool


@dataclass(frozen=True)
class IswapSchedule:
    duration: float
    pair: tuple[int, int]
    z_phases: tuple[float, float]


def phase_gate(phase: float) -> np.ndarray:
    """Single-qubit z phase ``diag(e^{i phase}, 1)`` in the (e, g) basis."""
    return np.diag([np.exp(1j * phase), 1.0])


def iswap_schedule(params, pair: tuple[int, int], include_detuning: bool = False,
                   detuning_tol: float = DETUNING_TOL) -> IswapSchedule:
    """Duration and z phases turning the exchange term into an iSWAP.

    ``exp(-i H_int t*) = (P(phi_n) (x) P(phi_m)) iSWAP`` on the pair, with
    ``P(phi) = diag(e^{i phi}, 1)``.  With ``include_detuning`` the phases
    also absorb the common ``delta_bar`` precession over ``t*``.
    """
    n, m = pair
    lam = params.coupling(n, m)
    if lam == 0:
        raise GateError(f"pair {pair} has zero coupling")
    mismatch = abs(params.delta_bar[n] - params.delta_bar[m])
    if mismatch > detuning_tol * abs(lam):
        raise GateError(
            f"effective detunings differ by {mismatch:.3e} rad/us; iSWAP requires an echo"
        )
    duration = math.pi / (2.0 * abs(lam))
    theta = float(np.angle(lam))
    phases = [math.pi + theta, math.pi - theta]
    if include_detuning:
        phases = [phases[0] - params.delta_bar[n] * duration,
                  phases[1] - params.delta_bar[m] * duration]
    wrapped = tuple(float(np.angle(np.exp(1j * p))) for p in phases)
    return IswapSchedule(duration, (n, m), wrapped)


def iswap_target(sched: IswapSchedule, n_tls: int = 2) -> OperatorMatrix:
    """``(P (x) P) iSWAP`` on the scheduled pair, identity elsewhere."""
    if n_tls != 2 or sched.pair not in ((0, 1), (1, 0)):
        raise GateError("iSWAP targets are built for two-TLS registers only")
    n, _ = sched.pair
    phases = sched.z_phases if n == 0 else sched.z_phases[::-1]
    gate = np.kron(phase_gate(phases[0]), phase_gate(phases[1])) @ ISWAP
    return OperatorMatrix(gate, (2, 2))


@dataclass(frozen=True)
class Rotation:
    segment: SystemModel
    duration: float
    axis: str
    rate: float


def single_qubit_rotation(model: SystemModel, n: int, axis: str, angle: float) -> Rotation:
    """Segment and duration rotating TLS ``n`` by ``angle`` about ``axis``.

    ``x`` uses the drive-induced Rabi term of the dispersive model as
    configured; ``z`` switches the drive off and uses ``delta_bar``.
    Negative ``angle / rate`` is wrapped by the 4 pi spinor period.
    """
    if axis == "x":
        segment = model
        rate = float(dispersive_params(model).omega_x[n])
    elif axis == "z":
        segment = model.replace(epsilon0=0.0)
        rate = float(dispersive_params(segment).delta_bar[n])
    else:
        raise ValueError(f"axis must be 'x' or 'z', got {axis!r}")
    if angle == 0:
        return Rotation(segment, 0.0, axis, rate)
    if rate == 0:
        raise GateError(f"{axis}-rotation of TLS {n} unreachable: rate is zero")
    duration = angle / rate
    if duration < 0:
        duration += 4 * math.pi / abs(rate)
    return Rotation(segment, duration, axis, rate)


def gate_fidelity_unitary(actual: OperatorMatrix, target: OperatorMatrix) -> float:
    """Phase-insensitive overlap ``|Tr(target^dag actual)| / d``."""
    for name, u in (("actual", actual), ("target", target)):
        if not algebra.is_unitary(u, UNITARY_TOL):
            raise GateError(f"{name} operator is not unitary")
    if actual.dim != target.dim:
        raise GateError("dimension mismatch")
    return float(abs(np.trace(target.data.conj().T @ actual.data)) / actual.dim)


_AXIS_STATES = [
    np.array([1, 0]), np.array([0, 1]),
    np.array([1, 1]) / math.sqrt(2), np.array([1, -1]) / math.sqrt(2),
    np.array([1, 1j]) / math.sqrt(2), np.array([1, -1j]) / math.sqrt(2),
]


def axis_product_states(n_qubits: int):
    for combo in itertools.product(_AXIS_STATES, repeat=n_qubits):
        psi = combo[0].astype(complex)
        for v in combo[1:]:
            psi = np.kron(psi, v)
        yield psi


def schedule_superoperator(schedule: Schedule, terms: Sequence[LindbladTerm] = ()) -> np.ndarray:
    total = None
    for seg, duration in schedule.segments:
        liou = seg if isinstance(seg, Liouvillian) else Liouvillian(seg, terms)
        step = solver.superoperator_propagator(liou, duration)
        total = step if total is None else step @ total
    return total


def gate_fidelity_open(schedule: Schedule, terms: Sequence[LindbladTerm],
                       target: OperatorMatrix, method: str = "axis") -> float:
    """Mean fidelity of the Lindblad-propagated gate against ``target``.

    ``axis`` averages ``<psi| V^dag rho_out V |psi>`` over the 6^N product
    axis states; ``process`` returns the average gate fidelity
    ``(d F_e + 1) / (d + 1)`` from the entanglement fidelity.
    """
    d = target.dim
    sup = schedule_superoperator(schedule, terms)
    v = target.data
    if method == "process":
        ideal = np.kron(v, v.conj())
        f_e = float(np.real(np.trace(ideal.conj().T @ sup))) / d**2
        return (d * f_e + 1) / (d + 1)
    if method != "axis":
        raise ValueError(f"unknown method {method!r}")
    n_qubits = int(round(math.log2(d)))
    fids = []
    for psi in axis_product_states(n_qubits):
        rho_out = (sup @ np.outer(psi, psi.conj()).reshape(-1)).reshape(d, d)
        phi = v @ psi
        fids.append(float(np.real(phi.conj() @ rho_out @ phi)))
    return float(np.mean(fids))


def average_state_fidelity(actual: OperatorMatrix, target: OperatorMatrix) -> float:
    """Closed-system counterpart of :func:`gate_fidelity_open` (axis average)."""
    n_qubits = int(round(math.log2(actual.dim)))
    fids = [abs(np.vdot(target.data @ psi, actual.data @ psi)) ** 2
            for psi in axis_product_states(n_qubits)]
    return float(np.mean(fids))


def universality_closure(generators: Sequence[OperatorMatrix], max_generations: int = 20,
                         tol: float = CLOSURE_TOL) -> LieClosureResult:
    """Real dimension of the Lie algebra spanned by nested ``i[A, B]``."""
    if not generators:
        return LieClosureResult(0, 0, (), True)
    d = generators[0].dim
    eye = np.eye(d)
    basis: list[np.ndarray] = []
    mats: list[np.ndarray] = []
    norms: list[float] = []

    def as_real(x):
        return np.concatenate([x.real.ravel(), x.imag.ravel()])

    def add(x) -> bool:
        x = x - np.trace(x) / d * eye
        x = 0.5 * (x + x.conj().T)
        nrm = np.linalg.norm(x)
        if nrm == 0:
            return False
        v = as_real(x / nrm)
        for _ in range(2):
            for b in basis:
                v = v - np.dot(b, v) * b
        resid = np.linalg.norm(v)
        if resid <= tol:
            return False
        v = v / resid
        basis.append(v)
        half = v.size // 2
        mats.append((v[:half] + 1j * v[half:]).reshape(d, d))
        norms.append(float(resid * nrm))
        return True

    new = [m for g in generators if add(g.data) for m in mats[-1:]]
    generations = 0
    closed = not new
    while new and generations < max_generations:
        generations += 1
        fresh = []
        for a in list(mats):
            for b in new:
                if add(1j * (a @ b - b @ a)):
                    fresh.append(mats[-1])
        new = fresh
        closed = not new
    return LieClosureResult(len(basis), generations, tuple(norms), closed)


def effective_generators(params) -> tuple[OperatorMatrix, OperatorMatrix]:
    """The two control Hamiltonians: detuning + exchange, and the drive term."""
    h1 = detuning_hamiltonian(params) + interaction_hamiltonian(params)
    return h1, drive_hamiltonian(params)


def decoherence_budget(params) -> dict[tuple[int, int], float]:
    """Two-qubit operations per decoherence time, ``|lambda_nm| / max rate``."""
    rate = float(np.max(params.decoherence_rates()))
    out = {}
    for n in range(params.n_tls):
        for m in range(n + 1, params.n_tls):
            lam = abs(params.coupling(n, m))
            out[(n, m)] = math.inf if rate == 0 else lam / rate
    return out


def drive_free(params):
    """Copy of ``params`` with the single-qubit drive terms zeroed."""
    if isinstance(params, EffectiveDispersive):
        return EffectiveDispersive(params.labels, params.delta_nc, params.delta_bar,
                                   np.zeros_like(params.omega_x), params.induced_decay, params.lam)
    return EffectiveBadCavity(params.labels, params.delta_bar, np.zeros_like(params.omega),
                              params.gamma1, params.gamma2, params.lam)


def iswap_report(params, pair: tuple[int, int] = (0, 1), method: str = "axis") -> GateReport:
    """iSWAP on the effective model: closed and open fidelities plus budget.

    The drive is assumed off during the gate, so the single-qubit drive
    terms are removed before propagation.
    """
    params = drive_free(params)
    sched = iswap_schedule(params, pair, include_detuning=True)
    target = iswap_target(sched, params.n_tls)
    h = build_effective_hamiltonian(params)
    actual = solver.unitary_propagator(h, sched.duration)
    f_unitary = gate_fidelity_unitary(actual, target)
    f_open = gate_fidelity_open(Schedule.constant(h, sched.duration),
                                build_effective_lindblad(params), target, method)
    budget = decoherence_budget(params)[tuple(sorted(pair))]
    return GateReport("iswap", sched.duration, f_unitary, f_open, budget)


def full_model_gate_fidelity(model: SystemModel, duration: float, target: OperatorMatrix,
                             framed: bool = True) -> float:
    """Overlap of the closed full-model evolution with a TLS-space target.

    The full unitary is optionally conjugated by the dispersive frame change
    and then restricted to the resonator vacuum block; leakage out of that
    block lowers the overlap.
    """
    from .model import build_hamiltonian

    closed = model.replace(kappa=0.0)
    u = solver.unitary_propagator(build_hamiltonian(closed), duration).data
    if framed:
        frame = dispersive_unitary(closed).data
        u = frame @ u @ frame.conj().T
    nt = 2 ** model.n_tls
    block = u[:nt, :nt]  # resonator slot 0 is outermost: vacuum is the first nt indices
    return float(abs(np.trace(target.data.conj().T @ block)) / nt)
