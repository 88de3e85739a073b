import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsjj import algebra, solver
from tlsjj.algebra import DensityMatrix, OperatorMatrix
from tlsjj.errors import DimensionError, IntegratorError, SteadyStateError
from tlsjj.model import (LindbladTerm, Schedule, build_hamiltonian, make_model, resonator_op,
                         tls_op)

from conftest import mhz, random_density, random_hermitian


def cavity_liouvillian(fock, delta_c, kappa, eps):
    a = algebra.annihilation(fock)
    h = delta_c * (a.dag() @ a) + eps * (a + a.dag())
    return solver.build_liouvillian(h, [LindbladTerm(a, 2.0 * kappa)]), a


def test_zero_generator():
    liou = solver.build_liouvillian(OperatorMatrix(np.zeros((3, 3)), (3,)))
    assert not np.any(liou.matrix)
    assert liou.is_zero()
    rho0 = DensityMatrix(random_density(np.random.default_rng(1), 3), (3,))
    traj = solver.evolve(rho0, liou, [0.0, 0.5, 2.0])
    for s in traj.states:
        assert np.array_equal(s.data, rho0.data)


def test_qubit_decay_is_exponential():
    gamma = 0.7
    liou = solver.build_liouvillian(0.3 * algebra.pauli("z"),
                                    [LindbladTerm(algebra.pauli("minus"), gamma)])
    rho0 = algebra.basis_state([0], (2,)).density()
    times = np.linspace(0.0, 4.0, 9)
    traj = solver.evolve(rho0, liou, times)
    pe = np.array([s.data[0, 0].real for s in traj.states])
    assert np.allclose(pe, np.exp(-gamma * times), atol=1e-9)


def test_liouvillian_trace_free_and_linear(rng):
    m = make_model(0.4, 0.3, [1.0, -0.5], [0.6, 0.2], epsilon0=0.2, fock_dim=3)
    liou = solver.model_liouvillian(m)
    for _ in range(20):
        rho = random_density(rng, m.dim)
        assert abs(np.trace(liou.apply(rho))) < 1e-12
    r1, r2 = random_density(rng, m.dim), random_density(rng, m.dim)
    alpha, beta = 0.3 - 0.2j, 1.7
    lhs = liou.apply(alpha * r1 + beta * r2)
    rhs = alpha * liou.apply(r1) + beta * liou.apply(r2)
    assert np.max(np.abs(lhs - rhs)) < 1e-12
    # the superoperator matrix agrees with the matrix-free application
    vec = liou.matrix @ r1.reshape(-1)
    assert np.allclose(vec.reshape(m.dim, m.dim), liou.apply(r1), atol=1e-12)


def test_driven_cavity_relaxes_to_coherent_amplitude():
    kappa, dc, eps = 1.0, 0.6, 0.5
    liou, a = cavity_liouvillian(12, dc, kappa, eps)
    rho0 = algebra.basis_state([0], (12,)).density()
    traj = solver.evolve(rho0, liou, [0.0, 15.0], observables={"a": a}, store_states=False)
    assert traj.expectations["a"][-1] == pytest.approx(-1j * eps / (kappa + 1j * dc), abs=1e-6)


def test_vacuum_rabi_oscillation():
    g = mhz(1.0)
    m = make_model(mhz(3.0), 0.0, [mhz(3.0)], [g], fock_dim=4)
    rho0 = algebra.basis_state([0, 0], m.space_tag).density()
    times = np.linspace(0.0, math.pi / g, 41)
    pe = 0.5 * (1 + tls_op(m, 0, "z").data)
    traj = solver.evolve(rho0, m, times, observables={"pe": OperatorMatrix(pe, m.space_tag)},
                         store_states=False)
    assert np.allclose(traj.expectations["pe"].real, np.cos(g * times) ** 2, atol=1e-6)


@pytest.mark.parametrize("method", ["rk4", "adaptive"])
def test_trace_and_positivity_hygiene(method):
    m = make_model(0.5, mhz(1.0), [mhz(2.0)], [mhz(1.0)], epsilon0=mhz(0.5), fock_dim=6)
    rho0 = algebra.basis_state([0, 0], m.space_tag).density()
    traj = solver.evolve(rho0, m, np.linspace(0.0, 1.0, 21), method)
    assert traj.max_trace_drift <= 1e-8
    assert traj.min_eigenvalue >= -1e-7


def test_rk4_and_adaptive_agree():
    m = make_model(0.5, mhz(1.0), [mhz(2.0)], [mhz(1.0)], epsilon0=mhz(0.5), fock_dim=6)
    rho0 = algebra.basis_state([0, 0], m.space_tag).density()
    times = np.linspace(0.0, 1.0, 5)
    a = solver.evolve(rho0, m, times, "rk4")
    b = solver.evolve(rho0, m, times, "adaptive")
    for sa, sb in zip(a.states, b.states):
        assert np.sum(np.abs(sa.data - sb.data)) < 1e-6


def test_dense_and_matrix_free_agree():
    m = make_model(0.5, 0.8, [1.5], [0.9], epsilon0=0.4, fock_dim=5)
    rho0 = algebra.basis_state([0, 0], m.space_tag).density()
    times = np.linspace(0.0, 2.0, 5)
    dense = solver.evolve(rho0, m, times, representation="dense")
    free = solver.evolve(rho0, m, times, representation="matrix_free")
    for sa, sb in zip(dense.states, free.states):
        assert np.max(np.abs(sa.data - sb.data)) < 1e-12


def test_dense_representation_size_guard():
    m = make_model(0.0, 0.0, [0.0, 0.0], [1.0, 1.0], fock_dim=20)
    rho0 = algebra.basis_state([0, 0, 0], m.space_tag).density()
    with pytest.raises(DimensionError):
        solver.evolve(rho0, m, [0.0, 0.1], representation="dense")


def test_two_segment_schedule_matches_single_segment():
    m = make_model(0.5, 0.8, [1.5], [0.9], epsilon0=0.4, fock_dim=5)
    rho0 = algebra.basis_state([0, 0], m.space_tag).density()
    single = solver.evolve(rho0, Schedule.constant(m, 2.0), [0.0, 2.0], max_dt=0.005)
    split = solver.evolve(rho0, Schedule(((m, 0.7), (m, 1.3))), [0.0, 2.0], max_dt=0.005)
    assert np.max(np.abs(single.states[-1].data - split.states[-1].data)) < 1e-10


def test_schedule_switches_parameters():
    m = make_model(0.0, 0.0, [0.0], [1.0], fock_dim=3)
    off = m.replace(g=[0.0])
    rho0 = algebra.basis_state([0, 0], m.space_tag).density()
    t_half = math.pi / 4  # half transfer under g = 1
    traj = solver.evolve(rho0, Schedule(((m, t_half), (off, 1.0))),
                         [0.0, t_half, t_half + 1.0])
    pe = [s.data[0, 0].real for s in traj.states]
    assert pe[1] == pytest.approx(0.5, abs=1e-6)
    assert pe[2] == pytest.approx(pe[1], abs=1e-10)


def test_non_physical_generator_trips_trace_check():
    h = OperatorMatrix(np.array([[0.0, 0.0], [0.0, -1.0j]]), (2,))
    rho0 = DensityMatrix(0.5 * np.eye(2), (2,))
    with pytest.raises(IntegratorError):
        solver.evolve(rho0, h, [0.0, 1.0])


def test_time_grid_validation():
    m = make_model(0.0, 0.0, [0.0], [1.0], fock_dim=2)
    rho0 = algebra.basis_state([0, 0], m.space_tag).density()
    with pytest.raises(ValueError):
        solver.evolve(rho0, m, [0.0, 0.2, 0.1])
    with pytest.raises(ValueError):
        solver.evolve(rho0, Schedule.constant(m, 1.0), [0.0, 2.0])


def test_steady_state_vacuum():
    liou, _ = cavity_liouvillian(6, 0.7, 1.0, 0.0)
    ss = solver.steady_state(liou)
    assert ss.data[0, 0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kappa, dc, eps", [(1.0, 0.0, 0.8), (0.5, 1.2, 0.6), (2.0, -3.0, 2.5)])
def test_steady_state_driven_cavity(kappa, dc, eps):
    liou, a = cavity_liouvillian(30, dc, kappa, eps)
    ss = solver.steady_state(liou)
    alpha = -1j * eps / (kappa + 1j * dc)
    assert algebra.expectation(ss, a) == pytest.approx(alpha, rel=1e-8)
    n_op = a.dag() @ a
    assert algebra.expectation(ss, n_op).real == pytest.approx(abs(alpha) ** 2, rel=1e-8)


def test_steady_state_far_detuned_tls_shift_is_small():
    kappa, eps, g, delta = mhz(1.0), mhz(0.3), mhz(0.5), mhz(20.0)
    m = make_model(0.0, kappa, [delta], [g], epsilon0=eps, fock_dim=6)
    ss = solver.steady_state(solver.model_liouvillian(m))
    alpha0 = -1j * eps / kappa
    alpha = algebra.expectation(ss, resonator_op(m, "a"))
    shift = abs(alpha - alpha0) / abs(alpha0)
    # relative shift is (g/Delta)^2 * Delta/kappa: the ground-state pull g^2/Delta over kappa
    assert shift == pytest.approx((g / delta) ** 2 * delta / kappa, rel=0.05)
    pulled = -1j * eps / (kappa - 1j * g**2 / delta)
    assert abs(alpha - pulled) < 0.1 * abs(alpha - alpha0)


def test_steady_state_rejects_degenerate_kernel():
    m = make_model(0.0, 1.0, [2.0], [0.0], fock_dim=4)
    with pytest.raises(SteadyStateError):
        solver.steady_state(solver.model_liouvillian(m))


def test_steady_state_large_dimension_uses_sparse_path():
    liou, a = cavity_liouvillian(60, 0.5, 1.0, 1.0)
    assert liou.dim > solver.SVD_MAX_DIM
    ss = solver.steady_state(liou)
    assert algebra.expectation(ss, a) == pytest.approx(-1j / (1.0 + 0.5j), rel=1e-8)


def test_correlation_zero_delay_and_damped_oscillator(rng):
    dc, kappa = 1.3, 0.4
    liou, a = cavity_liouvillian(5, dc, kappa, 0.0)
    rho = DensityMatrix(random_density(rng, 5), (5,))
    c0 = solver.two_time_correlation(liou, rho, a.dag(), a, [0.0])
    assert c0[0] == pytest.approx(np.trace(a.dag().data @ a.data @ rho.data))
    one = algebra.basis_state([1], (5,)).density()
    taus = np.linspace(0.0, 3.0, 13)
    corr = solver.two_time_correlation(liou, one, a.dag(), a, taus)
    assert np.allclose(corr, np.exp((1j * dc - kappa) * taus), atol=1e-8)


def test_correlation_decay_matches_injected_rate():
    gamma2 = 0.35
    liou = solver.build_liouvillian(0.8 * algebra.pauli("z"),
                                    [LindbladTerm(algebra.pauli("minus"), 2 * gamma2)])
    plus = algebra.PureState(np.array([1, 1]) / np.sqrt(2), (2,)).density()
    taus = np.linspace(0.0, 6.0, 61)
    sp = algebra.pauli("plus")
    corr = solver.two_time_correlation(liou, plus, sp, sp.dag(), taus)
    rate = -np.polyfit(taus, np.log(np.abs(corr)), 1)[0]
    assert rate == pytest.approx(gamma2, rel=1e-6)


def test_unitary_and_superoperator_propagators(rng):
    h = OperatorMatrix(random_hermitian(rng, 4), (4,))
    u = solver.unitary_propagator(h, 0.7)
    assert algebra.is_unitary(u)
    liou = solver.build_liouvillian(h)
    rho = random_density(rng, 4)
    evolved = (solver.superoperator_propagator(liou, 0.7) @ rho.reshape(-1)).reshape(4, 4)
    assert np.allclose(evolved, u.data @ rho @ u.data.conj().T, atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_rk4_matches_exact_propagator(seed):
    rng = np.random.default_rng(seed)
    h = OperatorMatrix(random_hermitian(rng, 3), (3,))
    c = OperatorMatrix(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)), (3,))
    liou = solver.build_liouvillian(h, [LindbladTerm(c, 0.2)])
    rho0 = DensityMatrix(random_density(rng, 3), (3,))
    traj = solver.evolve(rho0, liou, [0.0, 1.0])
    exact = (solver.superoperator_propagator(liou, 1.0) @ rho0.data.reshape(-1)).reshape(3, 3)
    assert np.max(np.abs(traj.states[-1].data - exact)) < 1e-7
