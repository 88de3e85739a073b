"""Dense operator algebra on tensor-product Hilbert spaces.

Subsystem ordering is fixed: slot 0 is the resonator, slots 1..N are the
TLS's in roster order.  Two-level subsystems use the basis ordering
``(|e>, |g>)`` so that ``sigma_z = diag(1, -1)`` and ``sigma_+ = [[0, 1], [0, 0]]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericalError, StateError

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
POSITIVITY_TOL = 1e-9
NORM_TOL = 1e-12


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense complex operator tagged with its subsystem dimensions."""

    data: np.ndarray
    space_tag: tuple[int, ...]

    def __post_init__(self):
        data = _frozen(self.data)
        tag = tuple(int(d) for d in self.space_tag)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "space_tag", tag)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionError(f"operator must be square, got shape {data.shape}")
        if int(np.prod(tag)) != data.shape[0]:
            raise DimensionError(
                f"space_tag {tag} does not multiply to dimension {data.shape[0]}"
            )
        if not np.all(np.isfinite(data)):
            raise NumericalError("operator has non-finite entries")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def dag(self) -> "OperatorMatrix":
        return OperatorMatrix(self.data.conj().T, self.space_tag)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def is_hermitian(self, tol: float = HERMITIAN_TOL) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T), initial=0.0) <= tol)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, OperatorMatrix):
            if other.space_tag != self.space_tag:
                raise DimensionError(
                    f"space mismatch: {self.space_tag} vs {other.space_tag}"
                )
            return other.data
        raise TypeError(f"cannot combine OperatorMatrix with {type(other).__name__}")

    def __matmul__(self, other):
        if isinstance(other, np.ndarray):
            return self.data @ other
        return OperatorMatrix(self.data @ self._coerce(other), self.space_tag)

    def __add__(self, other):
        return OperatorMatrix(self.data + self._coerce(other), self.space_tag)

    def __sub__(self, other):
        return OperatorMatrix(self.data - self._coerce(other), self.space_tag)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return OperatorMatrix(scalar * self.data, self.space_tag)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return OperatorMatrix(self.data / scalar, self.space_tag)

    def __neg__(self):
        return OperatorMatrix(-self.data, self.space_tag)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim}, space_tag={self.space_tag})"


@dataclass(frozen=True, eq=False, repr=False)
class DensityMatrix(OperatorMatrix):
    """Operator that is expected to be a physical state.

    Construction does not enforce positivity (integrators legitimately
    produce tiny negative eigenvalues); call :meth:`validate` for that.
    """

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def validate(
        self,
        hermitian_tol: float = HERMITIAN_TOL,
        trace_tol: float = TRACE_TOL,
        positivity_tol: float = POSITIVITY_TOL,
    ) -> "DensityMatrix":
        if not self.is_hermitian(hermitian_tol):
            raise StateError("density matrix is not Hermitian")
        if abs(self.trace() - 1.0) > trace_tol:
            raise StateError(f"density matrix trace {self.trace():.3e} differs from 1")
        lo = self.min_eigenvalue()
        if lo < -positivity_tol:
            raise StateError(f"density matrix has negative eigenvalue {lo:.3e}")
        return self


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    space_tag: tuple[int, ...]

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        tag = tuple(int(d) for d in self.space_tag)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "space_tag", tag)
        if int(np.prod(tag)) != amps.size:
            raise DimensionError(f"space_tag {tag} does not match {amps.size} amplitudes")
        if abs(np.linalg.norm(amps) - 1.0) > NORM_TOL:
            raise StateError(f"state norm {np.linalg.norm(amps):.15f} is not 1")

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> DensityMatrix:
        psi = self.amplitudes
        return DensityMatrix(np.outer(psi, psi.conj()), self.space_tag)


# -- elementary operators ---------------------------------------------------

def annihilation(fock_dim: int) -> OperatorMatrix:
    if fock_dim < 2:
        raise DimensionError(f"fock_dim must be >= 2, got {fock_dim}")
    return OperatorMatrix(np.diag(np.sqrt(np.arange(1, fock_dim)), k=1), (fock_dim,))


def creation(fock_dim: int) -> OperatorMatrix:
    return annihilation(fock_dim).dag()


def number(fock_dim: int) -> OperatorMatrix:
    return OperatorMatrix(np.diag(np.arange(fock_dim, dtype=float)), (fock_dim,))


_PAULI = {
    "x": [[0, 1], [1, 0]],
    "y": [[0, -1j], [1j, 0]],
    "z": [[1, 0], [0, -1]],
    "plus": [[0, 1], [0, 0]],
    "minus": [[0, 0], [1, 0]],
    "i": [[1, 0], [0, 1]],
}


def pauli(which: str) -> OperatorMatrix:
    """Return a 2x2 Pauli or ladder matrix: ``x, y, z, plus, minus`` (or ``i``)."""
    try:
        return OperatorMatrix(np.array(_PAULI[which], dtype=complex), (2,))
    except KeyError:
        raise ValueError(f"unknown Pauli label {which!r}") from None


def identity(space_tag: Sequence[int]) -> OperatorMatrix:
    return OperatorMatrix(np.eye(int(np.prod(space_tag))), tuple(space_tag))


def tensor(*ops: OperatorMatrix) -> OperatorMatrix:
    data = reduce(np.kron, (op.data for op in ops))
    tag = sum((op.space_tag for op in ops), ())
    return OperatorMatrix(data, tag)


def embed(op: OperatorMatrix, slot: int, space_tag: Sequence[int]) -> OperatorMatrix:
    """Place a single-subsystem operator into ``slot`` of ``space_tag``."""
    space_tag = tuple(int(d) for d in space_tag)
    if not 0 <= slot < len(space_tag):
        raise DimensionError(f"slot {slot} outside space {space_tag}")
    if op.dim != space_tag[slot]:
        raise DimensionError(
            f"operator dimension {op.dim} does not match slot {slot} of {space_tag}"
        )
    left = int(np.prod(space_tag[:slot]))
    right = int(np.prod(space_tag[slot + 1:]))
    data = np.kron(np.kron(np.eye(left), op.data), np.eye(right))
    return OperatorMatrix(data, space_tag)


def commutator(a: OperatorMatrix, b: OperatorMatrix) -> OperatorMatrix:
    return a @ b - b @ a


def basis_state(levels: Sequence[int], space_tag: Sequence[int]) -> PureState:
    """Product basis state with ``levels[k]`` the index occupied in slot k."""
    if len(levels) != len(space_tag):
        raise DimensionError("one level index per subsystem is required")
    vecs = []
    for lvl, dim in zip(levels, space_tag):
        if not 0 <= lvl < dim:
            raise DimensionError(f"level {lvl} outside subsystem of dimension {dim}")
        v = np.zeros(dim, dtype=complex)
        v[lvl] = 1.0
        vecs.append(v)
    return PureState(reduce(np.kron, vecs), tuple(space_tag))


def product_density(*states: DensityMatrix) -> DensityMatrix:
    op = tensor(*states)
    return DensityMatrix(op.data, op.space_tag)


# -- state functionals ------------------------------------------------------

def _check_same_dim(a, b):
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")


def expectation(state: OperatorMatrix | PureState, op: OperatorMatrix) -> complex:
    _check_same_dim(state, op)
    if isinstance(state, PureState):
        psi = state.amplitudes
        return complex(psi.conj() @ op.data @ psi)
    # Tr(rho op) without forming the product
    return complex(np.sum(state.data * op.data.T))


def partial_trace(state: OperatorMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = sorted(set(int(k) for k in keep))
    dims = state.space_tag
    n = len(dims)
    if not keep:
        raise DimensionError("keep set must be nonempty")
    if keep[0] < 0 or keep[-1] >= n:
        raise DimensionError(f"keep {keep} has slots outside {dims}")
    rho = state.data.reshape(dims + dims)
    row = list(range(n))
    col = [i if i not in keep else i + n for i in range(n)]
    out_idx = keep + [k + n for k in keep]
    reduced = np.einsum(rho, row + col, out_idx)
    kept_tag = tuple(dims[k] for k in keep)
    d = int(np.prod(kept_tag))
    return DensityMatrix(reduced.reshape(d, d), kept_tag)


def trace_distance(a: OperatorMatrix, b: OperatorMatrix) -> float:
    _check_same_dim(a, b)
    diff = a.data - b.data
    diff = 0.5 * (diff + diff.conj().T)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def state_fidelity(rho: OperatorMatrix, psi: PureState | np.ndarray) -> float:
    """Overlap <psi|rho|psi> of a state with a pure target."""
    vec = psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi)
    return float(np.real(vec.conj() @ rho.data @ vec))


# -- exponentials -----------------------------------------------------------

def matrix_exp(op: OperatorMatrix, scale: complex = 1.0) -> OperatorMatrix:
    """Return ``exp(scale * op)``.

    Hermitian ``op`` goes through an eigendecomposition, which keeps
    ``exp(-i H t)`` unitary to rounding; anything else uses Pade
    scaling-and-squaring.
    """
    if op.is_hermitian(1e-14):
        herm = 0.5 * (op.data + op.data.conj().T)
        w, v = np.linalg.eigh(herm)
        data = (v * np.exp(scale * w)) @ v.conj().T
    else:
        data = scipy.linalg.expm(scale * op.data)
    if not np.all(np.isfinite(data)):
        raise NumericalError("matrix exponential overflowed")
    return OperatorMatrix(data, op.space_tag)


def is_unitary(op: OperatorMatrix | np.ndarray, tol: float = 1e-10) -> bool:
    u = op.data if isinstance(op, OperatorMatrix) else np.asarray(op)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol)
