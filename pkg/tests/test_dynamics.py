import math

import numpy as np
import pytest
import scipy.linalg
from scipy.integrate import solve_ivp

from qdqkd.dynamics import (IntegrationError, Liouvillian, NumericsSettings, RangeError, TimeGrid,
                            initial_state, propagate, regression_correlators,
                            write_trajectory_csv)
from qdqkd.metrics import brightness, simulate, simulate_photon_stats
from qdqkd.model import SystemSpec, preset
from qdqkd.operators import DensityState, HilbertLayout, dagger, state_violations

SMALL = HilbertLayout(2, 2)


def _quiet(**kw):
    base = dict(gamma_radiative=0.0, gamma_dephasing=0.0, kappa=0.0, cavity_coupling_h=0.0,
                cavity_coupling_v=0.0, rabi_peak=0.0, b_field=0.0, delta_hv=0.0)
    base.update(kw)
    return SystemSpec(**base)


def test_frozen_dynamics():
    lay = SMALL
    psi = (lay.basis_state(1) + lay.basis_state(4, 1, 0) + 1j * lay.basis_state(3, 0, 1)) / math.sqrt(3)
    traj = propagate(DensityState.pure(psi), _quiet(), TimeGrid(5.0, 0.5), lay)
    for rho in traj.states:
        np.testing.assert_allclose(rho, traj.states[0], atol=1e-14)


def test_spontaneous_decay_against_matrix_exponential():
    spec = SystemSpec(rabi_peak=0.0, gamma_dephasing=0.0)
    lay = SMALL
    grid = TimeGrid(400.0, 2.0)
    rho0 = DensityState.pure(lay.basis_state(4))
    traj = propagate(rho0, spec, grid, lay)
    e = traj.expectations
    total = e["pop_4"] + e["n_h"] + e["n_v"]
    assert np.all(np.diff(total) <= 1e-12)
    assert total[-1] < 1e-6

    # independent oracle: dense Liouvillian assembled from the Hamiltonian and jumps
    from qdqkd.model import build_dissipators, hamiltonian_parts
    h, _ = hamiltonian_parts(spec, lay)
    d = lay.total_dim
    eye = np.eye(d)
    lmat = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for rate, o in build_dissipators(spec, lay):
        odo = dagger(o) @ o
        lmat += rate * (2 * np.kron(o, o.conj()) - np.kron(odo, eye) - np.kron(eye, odo.T))
    for t in (10.0, 50.0, 200.0):
        exact = (scipy.linalg.expm(lmat * t) @ rho0.rho.ravel()).reshape(d, d)
        np.testing.assert_allclose(traj.states[traj.index_of(t)], exact, atol=1e-10)


def test_two_level_pi_pulse():
    tau = 2.8
    # pulse area ∫ 2 Ω_h dt = π  ->  peak Ω_h = sqrt(π) / (2 τ) ps⁻¹
    peak_rate = math.sqrt(math.pi) / (2 * tau)
    spec = _quiet(rabi_peak=peak_rate * 658.2119569 / 1000, tau_p=tau)
    lay = SMALL
    grid = TimeGrid(5 * tau, 0.05)
    traj = propagate(initial_state(lay), spec, grid, lay)
    p4 = traj.expectations["pop_4"]
    assert p4.max() > 0.95

    # direct Schrödinger integration of the |1>, |4> pair
    from qdqkd.model import PulseEnvelope, rabi_at
    env = PulseEnvelope.from_spec(spec)

    def rhs(t, c):
        f = complex(rabi_at(t, env))
        return [-1j * np.conj(f) * c[1], -1j * f * c[0]]

    sol = solve_ivp(rhs, (0, grid.t_end), [1 + 0j, 0j], t_eval=grid.times, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(p4, np.abs(sol.y[1]) ** 2, atol=2e-6)


def test_integration_error_on_blow_up():
    spec = preset("resonant")
    with pytest.raises(IntegrationError):
        propagate(initial_state(SMALL), spec, TimeGrid(20.0, 4.0), SMALL, step=4.0)


def test_initial_state_checked():
    bad = DensityState(np.eye(SMALL.total_dim, dtype=complex))
    with pytest.raises(ValueError):
        propagate(bad, preset("resonant"), TimeGrid(1.0, 0.5), SMALL)


def _short_run(name="resonant", lay=SMALL, t_max=24.0, n_t=25, **changes):
    spec = preset(name, **changes)
    tau_grid = TimeGrid.spanning(t_max, n_t)
    traj = propagate(initial_state(lay), spec, TimeGrid(2 * t_max, tau_grid.dt), lay)
    return spec, traj, tau_grid


def test_vacuum_without_drive_gives_zero_correlators():
    spec, traj, tau_grid = _short_run(rabi_peak=0.0)
    ttg = regression_correlators(traj, spec, tau_grid)
    for arr in (ttg.g1, ttg.g2, ttg.g2_pop, ttg.mean_field):
        assert np.abs(arr).max() < 1e-30


def test_g2_zero_delay_identity():
    spec, traj, tau_grid = _short_run()
    ttg = regression_correlators(traj, spec, tau_grid)
    b = traj.layout.mode_v()
    bd = dagger(b)
    for k, t in enumerate(ttg.t):
        rho = traj.states[traj.index_of(t)]
        direct = np.trace(bd @ b @ b @ rho @ bd).real
        assert ttg.g2[k, 0] == pytest.approx(direct, abs=1e-10)
        assert ttg.g1[k, 0] == pytest.approx(np.trace(bd @ b @ rho), abs=1e-10)


def test_regression_against_independent_integration():
    spec, traj, tau_grid = _short_run(t_max=16.0, n_t=17)
    ttg = regression_correlators(traj, spec, tau_grid)
    lay = traj.layout
    gen = Liouvillian(spec, lay)
    b = lay.mode_v()
    bd = dagger(b)
    d = lay.total_dim
    for k, j in [(3, 2), (7, 5), (5, 12), (12, 9)]:
        t0, tau = ttg.t[k], ttg.tau[j]
        rho = traj.states[traj.index_of(t0)]
        x1, x2 = [
            solve_ivp(gen, (t0, t0 + tau), xi.ravel(), rtol=1e-10, atol=1e-13,
                      method="DOP853").y[:, -1].reshape(d, d)
            for xi in (b @ rho, b @ rho @ bd)]
        assert ttg.g1[k, j] == pytest.approx(np.trace(bd @ x1), abs=1e-8)
        assert ttg.g2[k, j] == pytest.approx(np.trace(bd @ b @ x2).real, abs=1e-8)


def test_mean_field_and_population_products():
    spec, traj, tau_grid = _short_run()
    ttg = regression_correlators(traj, spec, tau_grid)
    nv, mb = traj.expectations["n_v"], traj.expectations["b"]
    k, j = 4, 6
    i0, i1 = traj.index_of(ttg.t[k]), traj.index_of(ttg.t[k] + ttg.tau[j])
    assert ttg.g2_pop[k, j] == pytest.approx(nv[i0] * nv[i1])
    assert ttg.mean_field[k, j] == pytest.approx(mb[i1] * np.conj(mb[i0]))


def test_correlators_need_enough_dynamics():
    spec = preset("resonant")
    tau_grid = TimeGrid.spanning(24.0, 25)
    traj = propagate(initial_state(SMALL), spec, TimeGrid(30.0, tau_grid.dt), SMALL)
    with pytest.raises(RangeError):
        regression_correlators(traj, spec, tau_grid)
    with pytest.raises(ValueError):
        regression_correlators(traj, spec, TimeGrid(10.0, 1.5))


def test_index_of():
    _, traj, _ = _short_run(rabi_peak=0.0)
    assert traj.index_of(3.0) == 3
    with pytest.raises(RangeError):
        traj.index_of(2.5)
    with pytest.raises(RangeError):
        traj.index_of(1000.0)


def test_trajectory_csv(tmp_path):
    _, traj, _ = _short_run()
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:3] == ["time_ps", "pop_1", "pop_2"]
    assert len(lines) == traj.grid.n_points + 1
    row = [float(v) for v in lines[10].split(",")]
    assert row[0] == traj.times[9]
    assert row[6] == traj.expectations["n_v"][9]


@pytest.mark.parametrize("name", ["resonant", "adiabatic"])
def test_physical_state_at_every_stored_time(name):
    settings = NumericsSettings(n_t=41, t_window=53.0)
    traj, _ = simulate(preset(name), settings)
    for i, rho in enumerate(traj.states):
        assert not state_violations(rho), (name, traj.times[i])
    pops = sum(traj.expectations[f"pop_{q}"] for q in range(1, 5))
    assert np.abs(pops - 1).max() < 1e-8


def test_grid_helpers():
    g = TimeGrid.spanning(10.0, 11)
    assert g.dt == 1.0 and g.n_points == 11
    assert NumericsSettings().horizon(preset("resonant")) == pytest.approx(2.5 * 2.8 + 120)
    assert NumericsSettings(fock_dim=4).layout().total_dim == 64


# convergence gates at reduced horizon ------------------------------------

REDUCED = dict(n_t=41, t_window=53.0)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["resonant", "adiabatic"])
def test_step_halving_convergence(name):
    coarse = simulate_photon_stats(preset(name), NumericsSettings(step=0.002, **REDUCED))
    fine = simulate_photon_stats(preset(name), NumericsSettings(step=0.001, **REDUCED))
    assert abs(fine.brightness / coarse.brightness - 1) < 1e-4
    assert abs(fine.p_multi / coarse.p_multi - 1) < 1e-4


@pytest.mark.slow
def test_fock_doubling_convergence():
    base = simulate_photon_stats(preset("resonant"),
                                 NumericsSettings(fock_dim=4, step=0.01, **REDUCED))
    big = simulate_photon_stats(preset("resonant"),
                                NumericsSettings(fock_dim=8, step=0.01, **REDUCED))
    assert abs(big.brightness / base.brightness - 1) < 1e-4
    assert abs(big.p_multi / base.p_multi - 1) < 1e-4


def test_brightness_of_reduced_run_matches_trajectory_integral():
    spec, traj, tau_grid = _short_run()
    kappa = spec.to_rate(spec.kappa)
    nv = traj.expectations["n_v"]
    assert brightness(traj, kappa) == pytest.approx(kappa * np.trapezoid(nv, traj.times))
