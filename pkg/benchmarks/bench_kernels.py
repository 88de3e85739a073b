"""Compare the numba and numpy RK4 kernels on Jaynes-Cummings models.

Usage:  python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]

For each model size the script packs the Lindblad terms once, runs both
kernels from the same initial state, prints the best wall time of each and
checks that the two results agree.  Numba compile time is reported apart.
"""

import argparse
import time

import numpy as np

from tlsjj import _kernels
from tlsjj.algebra import basis_state
from tlsjj.model import build_collapse_operators, build_hamiltonian, make_model

TWO_PI = 2.0 * np.pi
CASES = [  # (fock_dim, n_tls)
    (4, 1),
    (6, 2),
    (8, 2),
    (6, 3),
]


def packed_case(fock_dim, n_tls):
    model = make_model(0.0, TWO_PI * 1.0, [TWO_PI * 20.0] * n_tls, [TWO_PI * 1.0] * n_tls,
                       epsilon0=TWO_PI * 0.5, fock_dim=fock_dim)
    h = build_hamiltonian(model).data
    terms = [(t.collapse.data, t.rate) for t in build_collapse_operators(model)]
    rho = basis_state([0] + [0] * n_tls, model.space_tag).density().data
    return np.ascontiguousarray(rho, dtype=np.complex128), _kernels.pack_terms(h, terms)


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    dt = 1e-4

    has_numba = hasattr(_kernels, "rk4_dense_numba")
    if not has_numba:
        print("numba unavailable or disabled: timing the numpy kernel only")
    else:
        rho, packed = packed_case(*CASES[0])
        t0 = time.perf_counter()
        _kernels.rk4_dense_numba(rho, *packed, dt, 1)
        print(f"numba compile/cache load: {time.perf_counter() - t0:.2f} s")

    print(f"{'dim':>5} {'numpy [s]':>10} {'numba [s]':>10} {'speedup':>8} {'max diff':>10}")
    for fock_dim, n_tls in CASES:
        rho, packed = packed_case(fock_dim, n_tls)
        t_np, out_np = best_time(lambda: _kernels.rk4_dense_numpy(rho, *packed, dt, args.steps),
                                 args.repeat)
        if has_numba:
            t_nb, out_nb = best_time(
                lambda: _kernels.rk4_dense_numba(rho, *packed, dt, args.steps), args.repeat)
            diff = float(np.max(np.abs(out_np - out_nb)))
            print(f"{rho.shape[0]:>5} {t_np:>10.3f} {t_nb:>10.3f} {t_np / t_nb:>8.2f} {diff:>10.1e}")
        else:
            print(f"{rho.shape[0]:>5} {t_np:>10.3f} {'-':>10} {'-':>8} {'-':>10}")


if __name__ == "__main__":
    main()
