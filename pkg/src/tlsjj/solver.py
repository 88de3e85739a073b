"""Lindblad propagation, steady states and two-time correlations."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.integrate import solve_ivp

from . import _kernels, algebra
from .algebra import DensityMatrix, OperatorMatrix
from .errors import DimensionError, IntegratorError, SteadyStateError
from .model import (LindbladTerm, Schedule, SystemModel, build_collapse_operators,
                    build_hamiltonian)

DENSE_MAX_DIM = 64
SVD_MAX_DIM = 50
STEPS_PER_PERIOD = 100
TRACE_DRIFT_FAIL = 1e-6
ADAPTIVE_RTOL = 1e-10
ADAPTIVE_ATOL = 1e-12


class Liouvillian:
    """Generator ``L[rho] = -i[H, rho] + sum_k r_k D[c_k] rho``.

    The matrix-free :meth:`apply` is always available; :attr:`matrix` is the
    row-major superoperator (``vec(rho) = rho.reshape(-1)``) and is built on
    first use.
    """

    def __init__(self, hamiltonian: OperatorMatrix, terms: Sequence[LindbladTerm] = ()):
        for t in terms:
            if t.collapse.dim != hamiltonian.dim:
                raise DimensionError(
                    f"collapse operator dim {t.collapse.dim} != Hamiltonian dim {hamiltonian.dim}"
                )
        self.hamiltonian = hamiltonian
        self.terms = tuple(terms)
        self._packed = _kernels.pack_terms(
            hamiltonian.data, [(t.collapse.data, t.rate) for t in self.terms]
        )

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def space_tag(self) -> tuple[int, ...]:
        return self.hamiltonian.space_tag

    @property
    def packed(self):
        return self._packed

    def apply(self, rho) -> np.ndarray:
        x = rho.data if isinstance(rho, OperatorMatrix) else np.asarray(rho)
        heff, heff_dag, cops, cops_dag, rates = self._packed
        out = -1j * (heff @ x - x @ heff_dag)
        for k in range(len(rates)):
            out += rates[k] * (cops[k] @ x @ cops_dag[k])
        return out

    @cached_property
    def matrix(self) -> np.ndarray:
        d = self.dim
        eye = np.eye(d)
        h = self.hamiltonian.data
        mat = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for t in self.terms:
            c = t.collapse.data
            cdc = c.conj().T @ c
            mat += t.rate * (np.kron(c, c.conj())
                             - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T))
        return mat

    @cached_property
    def frequency_scale(self) -> float:
        """Upper estimate of the fastest rate in the generator (rad/us)."""
        w = np.linalg.eigvalsh(self.hamiltonian.data)
        spread = float(w[-1] - w[0])
        diss = sum(t.rate * np.linalg.norm(t.collapse.data, 2) ** 2 for t in self.terms)
        return max(spread, float(diss))

    def is_zero(self) -> bool:
        return not np.any(self.hamiltonian.data) and all(t.rate == 0 for t in self.terms)


def build_liouvillian(H: OperatorMatrix, terms: Sequence[LindbladTerm] = ()) -> Liouvillian:
    return Liouvillian(H, terms)


def model_liouvillian(model: SystemModel, extra_terms: Sequence[LindbladTerm] = ()) -> Liouvillian:
    return Liouvillian(build_hamiltonian(model),
                       list(build_collapse_operators(model)) + list(extra_terms))


@dataclass
class Trajectory:
    times: np.ndarray
    states: list | None = None
    expectations: dict = field(default_factory=dict)
    max_trace_drift: float = 0.0
    min_eigenvalue: float = math.inf

    def expect(self, op: OperatorMatrix) -> np.ndarray:
        if self.states is None:
            raise ValueError("trajectory was recorded without states")
        return np.array([algebra.expectation(s, op) for s in self.states])


# -- propagation -----------------------------------------------------------

def _segment_generator(segment, extra_terms) -> tuple[Liouvillian, float]:
    if isinstance(segment, Liouvillian):
        return segment, 0.0
    if isinstance(segment, SystemModel):
        return model_liouvillian(segment, extra_terms), segment.timescale()
    if isinstance(segment, OperatorMatrix):
        return Liouvillian(segment, extra_terms), 0.0
    raise TypeError(f"unsupported schedule segment {type(segment).__name__}")


def _max_step(liou: Liouvillian, bare_scale: float, max_dt: float | None) -> float:
    scale = max(liou.frequency_scale, bare_scale)
    dt = math.inf if scale == 0 else 2 * math.pi / (STEPS_PER_PERIOD * scale)
    if max_dt is not None:
        dt = min(dt, max_dt)
    return dt


class _Stepper:
    """Advances a raw d x d array under one Liouvillian."""

    def __init__(self, liou: Liouvillian, dt_max: float, method: str, representation: str):
        self.liou = liou
        self.dt_max = dt_max
        self.method = method
        if representation == "auto":
            representation = "matrix_free"
        if representation == "dense" and liou.dim > DENSE_MAX_DIM:
            raise DimensionError(
                f"dense superoperator disabled above dim {DENSE_MAX_DIM} (got {liou.dim})"
            )
        if representation not in ("dense", "matrix_free"):
            raise ValueError(f"unknown representation {representation!r}")
        self.representation = representation

    def advance(self, x: np.ndarray, span: float) -> np.ndarray:
        if span <= 0:
            return x
        if self.method == "adaptive":
            return self._adaptive(x, span)
        if self.method != "rk4":
            raise ValueError(f"unknown method {self.method!r}")
        nsteps = max(1, math.ceil(span / self.dt_max)) if math.isfinite(self.dt_max) else 1
        dt = span / nsteps
        if self.representation == "dense":
            vec = np.ascontiguousarray(x.reshape(-1), dtype=np.complex128)
            out = _kernels.rk4_super(vec, np.ascontiguousarray(self.liou.matrix), dt, nsteps)
            return out.reshape(x.shape)
        return _kernels.rk4_dense(np.ascontiguousarray(x, dtype=np.complex128),
                                  *self.liou.packed, dt, nsteps)

    def _adaptive(self, x: np.ndarray, span: float) -> np.ndarray:
        d = x.shape[0]
        if self.representation == "dense":
            mat = self.liou.matrix
            fun = lambda _t, y: mat @ y
        else:
            fun = lambda _t, y: self.liou.apply(y.reshape(d, d)).reshape(-1)
        sol = solve_ivp(fun, (0.0, span), x.reshape(-1).astype(complex), method="RK45",
                        rtol=ADAPTIVE_RTOL, atol=ADAPTIVE_ATOL, t_eval=[span])
        if sol.status != 0 or sol.y.shape[1] == 0:
            raise IntegratorError(f"adaptive integration failed: {sol.message}")
        return sol.y[:, -1].reshape(d, d)


def _check_grid(t_grid, total) -> np.ndarray:
    times = np.asarray(t_grid, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("time grid must be a nonempty 1-D sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    if times[0] < 0 or times[-1] > total * (1 + 1e-12):
        raise ValueError(f"time grid outside [0, {total}]")
    return times


def _as_schedule(schedule, t_grid) -> Schedule:
    if isinstance(schedule, Schedule):
        return schedule
    end = float(np.max(t_grid))
    return Schedule.constant(schedule, end if end > 0 else 1.0)


def propagate_raw(
    x0: np.ndarray,
    schedule,
    t_grid,
    method: str = "rk4",
    extra_terms: Sequence[LindbladTerm] = (),
    representation: str = "auto",
    max_dt: float | None = None,
    on_record: Callable[[int, np.ndarray], None] | None = None,
) -> list[np.ndarray] | None:
    """Propagate an arbitrary d x d array (not necessarily a state).

    Parameters switch instantly at segment boundaries and the array is
    carried across unchanged.  Returns the arrays at ``t_grid`` unless
    ``on_record`` is given, in which case each record is handed to it.
    """
    schedule = _as_schedule(schedule, t_grid)
    times = _check_grid(t_grid, schedule.total_duration)
    bounds = schedule.boundaries()
    steppers = []
    for seg, _ in schedule.segments:
        liou, bare = _segment_generator(seg, extra_terms)
        if liou.dim != x0.shape[0]:
            raise DimensionError(f"state dim {x0.shape[0]} != generator dim {liou.dim}")
        steppers.append(_Stepper(liou, _max_step(liou, bare, max_dt), method, representation))

    x = np.array(x0, dtype=complex)
    t = 0.0
    seg = 0
    out = [] if on_record is None else None
    for i, target in enumerate(times):
        while t < target:
            while seg < len(steppers) - 1 and t >= bounds[seg + 1]:
                seg += 1
            t_next = min(target, bounds[seg + 1]) if seg < len(steppers) - 1 else target
            x = steppers[seg].advance(x, t_next - t)
            t = t_next
        if on_record is None:
            out.append(x.copy())
        else:
            on_record(i, x)
    return out


def evolve(
    rho0: DensityMatrix,
    schedule,
    t_grid,
    method: str = "rk4",
    *,
    extra_terms: Sequence[LindbladTerm] = (),
    observables: Mapping[str, OperatorMatrix] | None = None,
    store_states: bool = True,
    representation: str = "auto",
    max_dt: float | None = None,
    check_positivity: bool = True,
) -> Trajectory:
    """Integrate the master equation and record states or expectations.

    ``schedule`` is a :class:`Schedule`, or a single ``SystemModel`` /
    Hamiltonian / :class:`Liouvillian` run until the last grid time.
    ``method`` is ``"rk4"`` (fixed step, at least 100 steps per period of the
    fastest rate) or ``"adaptive"`` (embedded RK45).  Trace drift above
    ``1e-6`` raises :class:`IntegratorError`; the state is never renormalized.
    """
    tr0 = rho0.trace()
    times = np.asarray(t_grid, dtype=float)
    traj = Trajectory(times=times, states=[] if store_states else None)
    observables = dict(observables or {})
    for name in observables:
        traj.expectations[name] = np.zeros(times.size, dtype=complex)

    def record(i, x):
        drift = abs(np.trace(x) - tr0)
        traj.max_trace_drift = max(traj.max_trace_drift, float(drift))
        if drift > TRACE_DRIFT_FAIL:
            raise IntegratorError(f"trace drift {drift:.2e} at t={times[i]}")
        state = DensityMatrix(x, rho0.space_tag)
        if check_positivity:
            traj.min_eigenvalue = min(traj.min_eigenvalue, state.min_eigenvalue())
        for name, op in observables.items():
            traj.expectations[name][i] = algebra.expectation(state, op)
        if store_states:
            traj.states.append(state)

    propagate_raw(rho0.data, schedule, times, method, extra_terms,
                  representation, max_dt, on_record=record)
    return traj


# -- steady state and propagators -----------------------------------------

def steady_state(L: Liouvillian) -> DensityMatrix:
    d = L.dim
    if d <= SVD_MAX_DIM:
        mat = L.matrix
        _, s, vh = np.linalg.svd(mat)
        if s[-1] > 1e-9 * s[0]:
            raise SteadyStateError(f"Liouvillian has no kernel (smallest singular value {s[-1]:.2e})")
        if d > 1 and s[-2] <= 1e-12 * s[0]:
            raise SteadyStateError("Liouvillian kernel is degenerate: steady state is not unique")
        x = vh[-1].conj().reshape(d, d)
        norm = np.linalg.norm(mat)
    else:
        # trace condition replaces the first row: sum_i rho_ii = 1
        mat = scipy.sparse.csr_matrix(_sparse_superop(L))
        rows = mat.tolil()
        rows[0, :] = 0
        rows[0, np.arange(d) * (d + 1)] = 1.0
        rhs = np.zeros(d * d, dtype=complex)
        rhs[0] = 1.0
        vec = scipy.sparse.linalg.spsolve(rows.tocsc(), rhs)
        if not np.all(np.isfinite(vec)):
            raise SteadyStateError("steady-state solve is singular (degenerate kernel?)")
        x = vec.reshape(d, d)
        norm = scipy.sparse.linalg.norm(mat)
    tr = np.trace(x)
    if abs(tr) < 1e-14:
        raise SteadyStateError("kernel element is traceless")
    x = x / tr
    x = 0.5 * (x + x.conj().T)
    resid = np.linalg.norm(L.apply(x))
    if resid > 1e-9 * norm * max(1.0, np.linalg.norm(x)):
        raise SteadyStateError(f"steady-state residual {resid:.2e} too large")
    return DensityMatrix(x, L.space_tag)


def _sparse_superop(L: Liouvillian):
    d = L.dim
    eye = scipy.sparse.identity(d, format="csr")
    h = scipy.sparse.csr_matrix(L.hamiltonian.data)
    mat = -1j * (scipy.sparse.kron(h, eye) - scipy.sparse.kron(eye, h.T))
    for t in L.terms:
        c = scipy.sparse.csr_matrix(t.collapse.data)
        cdc = c.conj().T @ c
        mat = mat + t.rate * (scipy.sparse.kron(c, c.conj())
                              - 0.5 * scipy.sparse.kron(cdc, eye)
                              - 0.5 * scipy.sparse.kron(eye, cdc.T))
    return mat


def unitary_propagator(H: OperatorMatrix, t: float) -> OperatorMatrix:
    return algebra.matrix_exp(H, -1j * t)


def superoperator_propagator(L: Liouvillian, t: float) -> np.ndarray:
    """Exact ``exp(L t)`` as a row-major superoperator (small dims only)."""
    return scipy.linalg.expm(L.matrix * t)


def two_time_correlation(
    L: Liouvillian,
    rho_ss: DensityMatrix,
    A: OperatorMatrix,
    B: OperatorMatrix,
    taus,
    method: str = "rk4",
) -> np.ndarray:
    """``<A(tau) B(0)> = Tr(A exp(L tau)[B rho_ss])`` on a grid of delays."""
    taus = np.asarray(taus, dtype=float)
    x0 = B.data @ rho_ss.data
    out = np.zeros(taus.size, dtype=complex)

    def record(i, x):
        out[i] = np.sum(A.data * x.T)

    propagate_raw(x0, L, taus, method, on_record=record)
    return out
