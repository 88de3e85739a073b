"""Fixed-step RK4 inner loops for the Lindblad equation.

Two implementations share one signature: numba ``@njit`` kernels and plain
numpy loops.  Set ``TLSJJ_DISABLE_NUMBA=1`` to force the numpy path (also
used automatically when numba is missing).  ``BACKEND`` names the active one.

The matrix-free right-hand side uses the non-Hermitian effective Hamiltonian
``heff = H - (i/2) sum_k r_k c_k^dag c_k`` so that

    L[rho] = -i (heff rho - rho heff^dag) + sum_k r_k c_k rho c_k^dag
"""

from __future__ import annotations

import os

import numpy as np


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


def _lindblad_rhs_np(rho, heff, heff_dag, cops, cops_dag, rates):
    out = -1j * (heff @ rho - rho @ heff_dag)
    for k in range(cops.shape[0]):
        out += rates[k] * (cops[k] @ rho @ cops_dag[k])
    return out


def rk4_dense_numpy(rho, heff, heff_dag, cops, cops_dag, rates, dt, nsteps):
    rho = rho.copy()
    half = 0.5 * dt
    for _ in range(nsteps):
        k1 = _lindblad_rhs_np(rho, heff, heff_dag, cops, cops_dag, rates)
        k2 = _lindblad_rhs_np(rho + half * k1, heff, heff_dag, cops, cops_dag, rates)
        k3 = _lindblad_rhs_np(rho + half * k2, heff, heff_dag, cops, cops_dag, rates)
        k4 = _lindblad_rhs_np(rho + dt * k3, heff, heff_dag, cops, cops_dag, rates)
        rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return rho


def rk4_super_numpy(vec, lmat, dt, nsteps):
    vec = vec.copy()
    half = 0.5 * dt
    for _ in range(nsteps):
        k1 = lmat @ vec
        k2 = lmat @ (vec + half * k1)
        k3 = lmat @ (vec + half * k2)
        k4 = lmat @ (vec + dt * k3)
        vec = vec + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return vec


try:
    if _flag("TLSJJ_DISABLE_NUMBA"):
        raise ImportError("numba disabled by TLSJJ_DISABLE_NUMBA")
    from numba import njit
except ImportError:
    njit = None

if njit is not None:

    @njit(cache=True, nogil=True)
    def _lindblad_rhs_nb(rho, heff, heff_dag, cops, cops_dag, rates):
        out = -1j * (heff @ rho - rho @ heff_dag)
        for k in range(cops.shape[0]):
            out += rates[k] * (np.ascontiguousarray(cops[k]) @ rho
                               @ np.ascontiguousarray(cops_dag[k]))
        return out

    @njit(cache=True, nogil=True)
    def rk4_dense_numba(rho, heff, heff_dag, cops, cops_dag, rates, dt, nsteps):
        rho = rho.copy()
        half = 0.5 * dt
        for _ in range(nsteps):
            k1 = _lindblad_rhs_nb(rho, heff, heff_dag, cops, cops_dag, rates)
            k2 = _lindblad_rhs_nb(rho + half * k1, heff, heff_dag, cops, cops_dag, rates)
            k3 = _lindblad_rhs_nb(rho + half * k2, heff, heff_dag, cops, cops_dag, rates)
            k4 = _lindblad_rhs_nb(rho + dt * k3, heff, heff_dag, cops, cops_dag, rates)
            rho = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return rho

    @njit(cache=True, nogil=True)
    def rk4_super_numba(vec, lmat, dt, nsteps):
        vec = vec.copy()
        half = 0.5 * dt
        for _ in range(nsteps):
            k1 = lmat @ vec
            k2 = lmat @ (vec + half * k1)
            k3 = lmat @ (vec + half * k2)
            k4 = lmat @ (vec + dt * k3)
            vec = vec + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return vec

    BACKEND = "numba"
    rk4_dense = rk4_dense_numba
    rk4_super = rk4_super_numba
else:
    BACKEND = "numpy"
    rk4_dense = rk4_dense_numpy
    rk4_super = rk4_super_numpy


def pack_terms(h, terms):
    """Arrays consumed by :func:`rk4_dense` from a Hamiltonian and
    ``(collapse, rate)`` pairs, all as contiguous complex128."""
    d = h.shape[0]
    heff = np.array(h, dtype=np.complex128)
    cops = np.zeros((len(terms), d, d), dtype=np.complex128)
    rates = np.zeros(len(terms), dtype=np.float64)
    for k, (c, r) in enumerate(terms):
        cops[k] = c
        rates[k] = r
        heff -= 0.5j * r * (c.conj().T @ c)
    heff = np.ascontiguousarray(heff)
    heff_dag = np.ascontiguousarray(heff.conj().T)
    cops_dag = np.ascontiguousarray(np.conj(np.transpose(cops, (0, 2, 1))))
    return heff, heff_dag, cops, cops_dag, rates
