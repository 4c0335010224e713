import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tdho
from tdho import classical, ermakov


def free_pair(t_end=10.0, n=1001):
    return classical.fundamental_pair(tdho.Constant(0.0), 0.0, tdho.TimeGrid(0, t_end, n), 1e-12)


def test_eta_fixed_point():
    eta = ermakov.solve_eta_ode(tdho.Constant(1.0), 1.0, (1.0, 0.0), tdho.TimeGrid(0, 20, 201))
    assert np.max(np.abs(eta.eta - 1)) < 1e-12


def test_eta_free_closed_form():
    grid = tdho.TimeGrid(0, 10, 1001)
    eta = ermakov.solve_eta_ode(tdho.Constant(0.0), 1.0, (1.0, 0.0), grid, 1e-12)
    assert np.max(np.abs(eta.eta - np.sqrt(1 + grid.times**2))) < 1e-8


def test_eta_ode_matches_pair_construction():
    grid = tdho.TimeGrid(0, 20, 2001)
    pr = tdho.Constant(1.0)
    eta = ermakov.solve_eta_ode(pr, 1.0, (2.0, 0.0), grid, 1e-12)
    # η₀=2, η̇₀=0, Ω=1 ⇔ a=4, c=0, b=1/4
    alg = ermakov.eta_from_pair(classical.fundamental_pair(pr, 0, grid, 1e-12), 4.0, 0.25, 0.0)
    assert alg.Omega == pytest.approx(1.0)
    assert abs(eta.eta.max() - alg.eta.max()) < 1e-7
    assert abs(eta.eta.min() - alg.eta.min()) < 1e-7


def test_eta_from_free_pair():
    pair = free_pair()
    t = pair.traj1.t
    e = ermakov.eta_from_pair(pair, 1.0, 1.0, 0.0)
    assert e.Omega == pytest.approx(1.0)
    assert np.allclose(e.eta, np.sqrt(1 + t * t), atol=1e-9)
    e2 = ermakov.eta_from_pair(pair, 1.0, 1.0, 0.5)
    assert e2.Omega == pytest.approx(math.sqrt(3) / 2)
    assert np.allclose(e2.eta, np.sqrt(1 + t + t * t), atol=1e-9)
    traj = tdho.Trajectory(t, t.copy(), np.ones_like(t))
    assert np.allclose(ermakov.ermakov_invariant_series(e2, traj), 0.5, atol=1e-9)


def test_eta_from_pair_rejects_indefinite():
    with pytest.raises(tdho.DomainError):
        ermakov.eta_from_pair(free_pair(), 1.0, 1.0, 2.0)


def test_initial_data_matches_pair(floquet):
    grid = tdho.TimeGrid(0, 15, 1501)
    a, b, c = 1.7, 0.9, -0.3
    alg = ermakov.eta_from_pair(classical.fundamental_pair(floquet, 0, grid, 1e-12), a, b, c)
    ode = ermakov.solve_eta_ode(floquet, alg.Omega, ermakov.initial_data_from_coefficients(a, c),
                                grid, 1e-12)
    assert np.max(np.abs(ode.eta / alg.eta - 1)) < 1e-8


def test_eta_collapse_raises():
    # Ω = 0 with inward velocity drives η through zero
    with pytest.raises(tdho.CollapseError):
        ermakov.solve_eta_ode(tdho.Constant(0.0), 0.0, (1.0, -1.0), tdho.TimeGrid(0, 2, 21))


def test_eta_dense_output_residual(floquet):
    eta = ermakov.solve_eta_ode(floquet, 1.0, (1.2, 0.1), tdho.TimeGrid(0, 10, 4001), 1e-12)
    assert eta.midpoint_residual() < 1e-8


def test_invariant_examples():
    eta = ermakov.solve_eta_ode(tdho.Constant(1.0), 1.0, (1.0, 0.0), tdho.TimeGrid(0, 5, 51))
    for t in (0.0, 1.3, 4.2):
        s = tdho.ClassicalState(t, math.cos(t), -math.sin(t))
        assert ermakov.ermakov_invariant(eta, s) == pytest.approx(0.5, abs=1e-12)
    assert ermakov.invariant_from_wronskians(1, 1, 0, 1, 0) == 0.5
    assert ermakov.invariant_from_wronskians(1, 1, 0.5, 1, 0) == 0.5


def test_invariant_conserved(profiles):
    grid = tdho.TimeGrid(0, 30, 3001)
    for pr in profiles:
        eta = ermakov.solve_eta_ode(pr, 1.0, (1.0, 0.2), grid, 1e-12)
        traj = classical.integrate_oscillator(pr, tdho.ClassicalState(0, 0.6, -0.3), grid, 1e-12)
        inv = ermakov.ermakov_invariant_series(eta, traj)
        assert np.max(np.abs(inv / inv[0] - 1)) < 1e-7


def test_invariant_from_wronskians_matches_direct(floquet):
    rng = np.random.default_rng(11)
    grid = tdho.TimeGrid(0, 10, 1001)
    pair = classical.fundamental_pair(floquet, 0, grid, 1e-12)
    for _ in range(100):
        a, b = rng.uniform(0.5, 2, size=2)
        c = rng.uniform(-0.9, 0.9) * math.sqrt(a * b)
        eta = ermakov.eta_from_pair(pair, a, b, c)
        s = tdho.ClassicalState(rng.uniform(0, 10), rng.normal(), rng.normal())
        w1, w2 = classical.wronskian_charges(pair, s)
        direct = ermakov.ermakov_invariant(eta, s)
        assert ermakov.invariant_from_wronskians(a, b, c, w1, w2) == pytest.approx(direct,
                                                                                  rel=1e-6)


def test_schwarzian_closed_forms():
    t = np.linspace(-0.5, 0.5, 11)
    assert np.max(np.abs(ermakov.schwarzian(ermakov.mobius_map(2, 1, 1, 3), t))) < 1e-6
    assert np.allclose(ermakov.schwarzian(ermakov.exp_map(), t), -0.5)
    assert np.allclose(ermakov.schwarzian(ermakov.tan_map(), t), 2.0)


def test_schwarzian_sampled_map():
    # τ = arctan t has Schw = −2/(1+t²)²
    pair = free_pair(5.0, 501)
    clock = ermakov.synchronizing_clock(ermakov.eta_from_pair(pair, 1, 1, 0))
    t = np.linspace(0.5, 4.5, 9)
    exact = -2.0 / (1 + t * t) ** 2
    assert np.allclose(ermakov.schwarzian(clock, t), exact, atol=1e-5)


def test_schwarzian_cocycle():
    rng = np.random.default_rng(5)
    maps = [
        (ermakov.tan_map(), ermakov.power_map(0.5)),
        (ermakov.exp_map(), ermakov.tan_map()),
        (ermakov.power_map(3.0), ermakov.exp_map()),
        (ermakov.mobius_map(1, 2, 0.5, 3), ermakov.power_map(1.5)),
    ]
    for f, g in maps:
        fg = f.compose(g)
        t = rng.uniform(0.2, 0.6, size=50)
        lhs = ermakov.schwarzian(fg, t)
        rhs = g.jacobian(t) ** 2 * ermakov.schwarzian(f, g.tau(t)) + ermakov.schwarzian(g, t)
        assert np.max(np.abs(lhs - rhs) / (1 + np.abs(rhs))) < 1e-5


def test_mobius_requires_positive_determinant():
    with pytest.raises(tdho.DomainError):
        ermakov.mobius_map(1, 2, 3, 4)


def test_identity_clock_and_arctan_clock():
    eta = ermakov.solve_eta_ode(tdho.Constant(1.0), 1.0, (1.0, 0.0), tdho.TimeGrid(2, 7, 51))
    clock = ermakov.synchronizing_clock(eta)
    assert np.allclose(clock.tau_nodes, clock.t - 2, atol=1e-13)
    pair = free_pair()
    clock = ermakov.synchronizing_clock(ermakov.eta_from_pair(pair, 1, 1, 0))
    assert np.max(np.abs(clock.tau_nodes - np.arctan(clock.t))) < 1e-8


def test_period_integral_of_clock():
    grid = tdho.TimeGrid(0, 2 * math.pi, 1001)
    pair = classical.fundamental_pair(tdho.Constant(1.0), 0, grid, 1e-12)
    clock = ermakov.synchronizing_clock(ermakov.eta_from_pair(pair, 4, 1, 0))
    assert clock.tau_nodes[-1] == pytest.approx(math.pi, abs=1e-7)


def test_clock_monotone_and_inverse(floquet):
    eta = ermakov.solve_eta_ode(floquet, 1.0, (0.8, 0.3), tdho.TimeGrid(0, 10, 1001), 1e-12)
    clock = ermakov.synchronizing_clock(eta)
    assert np.all(np.diff(clock.tau_nodes) > 0)
    t = np.linspace(0, 10, 333)
    assert np.max(np.abs(clock.inverse(clock.tau(t)) - t)) < 1e-10
    with pytest.raises(tdho.TimeRangeError):
        clock.tau(11.0)


def test_reparametrize_free_particle():
    pair = free_pair()
    eta = ermakov.eta_from_pair(pair, 1, 1, 0)
    clock = ermakov.synchronizing_clock(eta)
    synced = ermakov.reparametrize_trajectory(pair.traj2, eta, clock)
    assert np.max(np.abs(synced.q - np.sin(synced.t))) < 1e-8


def test_reparametrize_identity():
    grid = tdho.TimeGrid(0, 5, 101)
    pr = tdho.Constant(1.0)
    eta = ermakov.solve_eta_ode(pr, 1.0, (1.0, 0.0), grid)
    traj = classical.integrate_oscillator(pr, tdho.ClassicalState(0, 0.3, 0.4), grid)
    synced = ermakov.reparametrize_trajectory(traj, eta, ermakov.synchronizing_clock(eta))
    assert np.allclose(synced.q, traj.q, atol=1e-12)
    assert np.allclose(synced.t, traj.t, atol=1e-12)


def test_reparametrized_floquet_is_harmonic(floquet):
    grid = tdho.TimeGrid(0, 20, 2001)
    eta = ermakov.solve_eta_ode(floquet, 1.0, (1.0, 0.0), grid, 1e-12)
    traj = classical.integrate_oscillator(floquet, tdho.ClassicalState(0, 1.0, 0.0), grid, 1e-12)
    clock = ermakov.synchronizing_clock(eta)
    synced = ermakov.reparametrize_trajectory(traj, eta, clock)
    assert synced.t[-1] > 3 * 2 * math.pi / eta.Omega
    A, phi, resid = ermakov.fit_harmonic(synced.t, synced.q, eta.Omega)
    assert resid < 1e-5 * A


def test_frequency_transform_residuals(floquet):
    eta = ermakov.solve_eta_ode(floquet, 1.0, (1.0, 0.0), tdho.TimeGrid(0, 10, 2001), 1e-12)
    clock = ermakov.synchronizing_clock(eta)
    target = lambda tau: np.full_like(tau, 1.0)  # noqa: E731
    assert ermakov.frequency_transform_residual(floquet, clock, target) < 1e-4
    t = np.linspace(0, 1, 21)
    zero = lambda tau: np.zeros_like(tau)  # noqa: E731
    mob = ermakov.mobius_map(2, 1, 1, 3)
    assert ermakov.frequency_transform_residual(tdho.Constant(0.0), mob, zero, t) < 1e-6
    assert ermakov.frequency_transform_residual(floquet, ermakov.identity_map(),
                                                floquet.omega_sq, t) < 1e-15


def test_sl2_pullback_gives_new_solution(floquet):
    grid = tdho.TimeGrid(0, 10, 4001)
    eta = ermakov.solve_eta_ode(floquet, 1.0, (1.0, 0.0), grid, 1e-12)
    clock = ermakov.synchronizing_clock(eta)
    new = ermakov.sl2_pullback(eta, clock, (1.0, 0.5, 0.0, 1.0))
    assert new.Omega == eta.Omega
    assert new.midpoint_residual() < 1e-6
    traj = classical.integrate_oscillator(floquet, tdho.ClassicalState(0, 0.4, 0.9), grid, 1e-12)
    inv = ermakov.ermakov_invariant_series(new, traj)
    assert np.max(np.abs(inv / inv[0] - 1)) < 1e-5


def test_sl2_rotation_leaves_invariant_unchanged(floquet):
    grid = tdho.TimeGrid(0, 10, 2001)
    eta = ermakov.solve_eta_ode(floquet, 1.0, (1.0, 0.0), grid, 1e-12)
    clock = ermakov.synchronizing_clock(eta)
    th = 0.7
    rot = ermakov.sl2_pullback(eta, clock, (math.cos(th), math.sin(th), -math.sin(th),
                                            math.cos(th)))
    assert np.allclose(rot.eta, eta.eta, rtol=1e-12)
    traj = classical.integrate_oscillator(floquet, tdho.ClassicalState(0, 0.4, 0.9), grid, 1e-12)
    assert np.allclose(ermakov.ermakov_invariant_series(rot, traj),
                       ermakov.ermakov_invariant_series(eta, traj), rtol=1e-10)


def test_sl2_pullback_rejects_non_unimodular(floquet):
    eta = ermakov.solve_eta_ode(floquet, 1.0, (1.0, 0.0), tdho.TimeGrid(0, 1, 11))
    with pytest.raises(tdho.DomainError):
        ermakov.sl2_pullback(eta, ermakov.synchronizing_clock(eta), (2.0, 0, 0, 1.0))


def test_symmetry_residual_examples():
    t = np.linspace(0, 5, 501)
    assert ermakov.symmetry_residual(tdho.Constant(1.0), t, np.cos(t) ** 2) < 1e-4
    # zero up to rounding amplified by the 1/h³ stencil
    assert ermakov.symmetry_residual(tdho.Constant(0.0), t, t) < 1e-8
    # X⁽³⁾ = 6, normalized by max|X⁽³⁾| + 1
    assert ermakov.symmetry_residual(tdho.Constant(0.0), t, t**3) == pytest.approx(6 / 7)


def test_symmetry_residual_pair_products(floquet):
    grid = tdho.TimeGrid(0, 10, 1001)
    pair = classical.fundamental_pair(floquet, 0, grid, 1e-12)
    q1, q2 = pair.traj1.q, pair.traj2.q
    for X in (q1 * q1, q2 * q2, q1 * q2):
        assert ermakov.symmetry_residual(floquet, grid.times, X) < 1e-4
    assert ermakov.symmetry_residual(floquet, grid.times, q1) > 1e-1


def test_symmetry_residual_needs_uniform_grid():
    t = np.array([0, 1, 2, 3, 4, 5, 7.0])
    with pytest.raises(tdho.DomainError):
        ermakov.symmetry_residual(tdho.Constant(1.0), t, t)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(-1.0, 1.0))
def test_invariant_of_eta_itself_is_omega_sq(eta0, etadot0):
    # η itself is not a solution of the linear equation, but q = η cos(Ωτ) is; I = Ω²/2
    pr = tdho.Floquet(1.0, 0.2, 1.0)
    grid = tdho.TimeGrid(0, 4, 401)
    eta = ermakov.solve_eta_ode(pr, 1.0, (eta0, etadot0), grid, 1e-12)
    clock = ermakov.synchronizing_clock(eta)
    q = eta.eta * np.cos(clock.tau_nodes)
    qdot = eta.etadot * np.cos(clock.tau_nodes) - np.sin(clock.tau_nodes) / eta.eta
    inv = ermakov.ermakov_invariant_series(eta, tdho.Trajectory(grid.times, q, qdot))
    assert np.allclose(inv, 0.5, rtol=1e-7)
