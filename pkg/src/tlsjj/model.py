"""Driven Jaynes-Cummings model of TLS's coupled to a damped resonator.

Everything lives in the frame rotating at the drive frequency, with
frequencies in rad/us and times in us.  ``kappa`` is the field-amplitude
decay rate, so the photon-loss Lindblad term carries rate ``2 * kappa``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import algebra
from .algebra import OperatorMatrix
from .errors import ModelError

MAX_TLS = 8
MAX_HILBERT_DIM = 512


@dataclass(frozen=True)
class TlsSpec:
    label: str
    delta_n: float
    g_n: float

    def __post_init__(self):
        if not (math.isfinite(self.delta_n) and math.isfinite(self.g_n)):
            raise ModelError(f"TLS {self.label!r} has non-finite parameters")


@dataclass(frozen=True)
class ResonatorSpec:
    delta_c: float
    kappa: float
    fock_dim: int = 10

    def __post_init__(self):
        if not math.isfinite(self.delta_c):
            raise ModelError("resonator detuning must be finite")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise ModelError(f"kappa must be >= 0, got {self.kappa}")
        if int(self.fock_dim) != self.fock_dim or self.fock_dim < 2:
            raise ModelError(f"fock_dim must be an integer >= 2, got {self.fock_dim}")


@dataclass(frozen=True)
class DriveSpec:
    epsilon0: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.epsilon0) and self.epsilon0 >= 0):
            raise ModelError(f"epsilon0 must be finite and >= 0, got {self.epsilon0}")


@dataclass(frozen=True)
class SystemModel:
    resonator: ResonatorSpec
    drive: DriveSpec
    tls: tuple[TlsSpec, ...]
    max_dim: int = field(default=MAX_HILBERT_DIM, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tls", tuple(self.tls))
        if not 1 <= len(self.tls) <= MAX_TLS:
            raise ModelError(f"model needs 1..{MAX_TLS} TLS's, got {len(self.tls)}")
        labels = [t.label for t in self.tls]
        if len(set(labels)) != len(labels):
            raise ModelError(f"TLS labels must be unique: {labels}")
        if self.dim > self.max_dim:
            raise ModelError(
                f"Hilbert dimension {self.dim} exceeds budget {self.max_dim}"
            )

    @property
    def n_tls(self) -> int:
        return len(self.tls)

    @property
    def space_tag(self) -> tuple[int, ...]:
        return (self.resonator.fock_dim,) + (2,) * self.n_tls

    @property
    def dim(self) -> int:
        return self.resonator.fock_dim * 2 ** self.n_tls

    def replace(self, **changes) -> "SystemModel":
        """Copy with any of ``delta_c, kappa, fock_dim, epsilon0`` changed,
        or with ``g`` / ``delta`` given as per-TLS sequences."""
        res = self.resonator
        res = ResonatorSpec(
            changes.pop("delta_c", res.delta_c),
            changes.pop("kappa", res.kappa),
            changes.pop("fock_dim", res.fock_dim),
        )
        drive = DriveSpec(changes.pop("epsilon0", self.drive.epsilon0))
        gs = changes.pop("g", [t.g_n for t in self.tls])
        deltas = changes.pop("delta", [t.delta_n for t in self.tls])
        if changes:
            raise TypeError(f"unknown fields {sorted(changes)}")
        tls = tuple(TlsSpec(t.label, d, g) for t, d, g in zip(self.tls, deltas, gs))
        return SystemModel(res, drive, tls, self.max_dim)

    def timescale(self) -> float:
        """Largest bare rate among detunings, couplings, decay and drive."""
        rates = [abs(self.resonator.delta_c), self.resonator.kappa, self.drive.epsilon0]
        for t in self.tls:
            rates += [abs(t.delta_n), abs(t.g_n)]
        return max(rates)


def make_model(
    delta_c: float,
    kappa: float,
    deltas: Sequence[float],
    gs: Sequence[float],
    epsilon0: float = 0.0,
    fock_dim: int = 10,
    labels: Sequence[str] | None = None,
) -> SystemModel:
    """Shorthand constructor used throughout tests and the CLI."""
    if len(deltas) != len(gs):
        raise ModelError("deltas and gs must have equal length")
    labels = labels or [f"tls{k + 1}" for k in range(len(deltas))]
    tls = tuple(TlsSpec(lbl, float(d), float(g)) for lbl, d, g in zip(labels, deltas, gs))
    return SystemModel(ResonatorSpec(float(delta_c), float(kappa), int(fock_dim)),
                       DriveSpec(float(epsilon0)), tls)


@dataclass(frozen=True)
class LindbladTerm:
    collapse: OperatorMatrix
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate >= 0):
            raise ModelError(f"Lindblad rate must be >= 0, got {self.rate}")


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant sequence of ``(segment, duration)`` pairs.

    A segment is normally a :class:`SystemModel`; solver-level code also
    accepts a Hamiltonian ``OperatorMatrix`` or a prebuilt Liouvillian.
    """

    segments: tuple

    def __post_init__(self):
        segs = tuple((s, float(d)) for s, d in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ModelError("schedule needs at least one segment")
        for _, d in segs:
            if not (math.isfinite(d) and d > 0):
                raise ModelError(f"segment durations must be > 0, got {d}")
        first = segs[0][0]
        for s, _ in segs[1:]:
            if isinstance(first, SystemModel) and isinstance(s, SystemModel):
                if s.space_tag != first.space_tag:
                    raise ModelError("segments must share fock_dim and TLS count")
            elif getattr(s, "dim", None) != getattr(first, "dim", None):
                raise ModelError("segments must share the Hilbert dimension")

    @classmethod
    def constant(cls, segment, duration: float) -> "Schedule":
        return cls(((segment, duration),))

    @property
    def total_duration(self) -> float:
        return sum(d for _, d in self.segments)

    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([d for _, d in self.segments])])


# -- operators -------------------------------------------------------------

def resonator_op(model: SystemModel, which: str = "a") -> OperatorMatrix:
    a = algebra.annihilation(model.resonator.fock_dim)
    op = {"a": a, "adag": a.dag(), "n": a.dag() @ a}[which]
    return algebra.embed(op, 0, model.space_tag)


def tls_op(model: SystemModel, n: int, which: str) -> OperatorMatrix:
    """Pauli ``which`` acting on TLS ``n`` (0-based roster index)."""
    return algebra.embed(algebra.pauli(which), n + 1, model.space_tag)


def build_hamiltonian(model: SystemModel) -> OperatorMatrix:
    a = resonator_op(model, "a")
    h = model.resonator.delta_c * (a.dag() @ a).data
    h = h + model.drive.epsilon0 * (a + a.dag()).data
    for n, t in enumerate(model.tls):
        sp = tls_op(model, n, "plus")
        h = h + 0.5 * t.delta_n * tls_op(model, n, "z").data
        h = h + t.g_n * (a @ sp + a.dag() @ sp.dag()).data
    h = 0.5 * (h + h.conj().T)
    return OperatorMatrix(h, model.space_tag)


def excitation_number(model: SystemModel) -> OperatorMatrix:
    op = resonator_op(model, "n")
    for n in range(model.n_tls):
        op = op + 0.5 * (tls_op(model, n, "z") + algebra.identity(model.space_tag))
    return op


def build_collapse_operators(model: SystemModel) -> list[LindbladTerm]:
    return [LindbladTerm(resonator_op(model, "a"), 2.0 * model.resonator.kappa)]


@dataclass(frozen=True)
class TruncationReport:
    mean_photons: float
    required_fock_dim: float
    fock_dim: int
    passed: bool
    unbounded: bool = False


def validate_truncation(model: SystemModel) -> TruncationReport:
    """Compare ``fock_dim`` with the drive-only steady photon estimate."""
    res, eps = model.resonator, model.drive.epsilon0
    denom = abs(complex(res.kappa, res.delta_c))
    if denom == 0.0:
        if eps > 0:
            warnings.warn("kappa = delta_c = 0 with drive on: amplitude is unbounded",
                          RuntimeWarning, stacklevel=2)
            return TruncationReport(math.inf, math.inf, res.fock_dim, False, True)
        nbar = 0.0
    else:
        nbar = (eps / denom) ** 2
    need = nbar + 5.0 * math.sqrt(nbar) + 5.0
    passed = nbar == 0.0 or res.fock_dim >= need
    return TruncationReport(nbar, need, res.fock_dim, passed)
