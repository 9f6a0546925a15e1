import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qdqkd.dynamics import TimeGrid, Trajectory, TwoTimeGrid
from qdqkd.metrics import (InconsistentStatisticsError, PhotonStats, UndefinedStatisticsError,
                           brightness, indistinguishability, multiphoton_probability,
                           photon_stats, trapezoid_2d)
from qdqkd.model import SystemSpec
from qdqkd.operators import HilbertLayout

KAPPA = 0.23


def _pulse(n=301, t_end=60.0):
    t = np.linspace(0, t_end, n)
    # single-photon wavepacket: rise then cavity decay
    nv = np.exp(-KAPPA * t) * (1 - np.exp(-3 * t))
    return t, nv


def _ttg(g1=None, g2=None, mean=None, n=121, t_end=60.0):
    t = np.linspace(0, t_end, n)
    nv = lambda x: np.exp(-KAPPA * x) * (1 - np.exp(-3 * x))
    pop = nv(t[:, None]) * nv(t[:, None] + t[None, :])
    zero = np.zeros_like(pop)
    return TwoTimeGrid(t, t, zero + 0j if g1 is None else g1(pop), zero if g2 is None else g2(pop),
                       pop, zero + 0j if mean is None else mean(pop))


def _traj(t, nv):
    grid = TimeGrid(float(t[-1]), float(t[1] - t[0]))
    return Trajectory(grid, np.empty((len(t), 0, 0)), {"n_v": nv}, HilbertLayout())


def test_trapezoid_2d_exact_for_bilinear():
    t = np.linspace(0, 2, 21)
    vals = 3 * t[:, None] + 2 * t[None, :] + 1
    assert trapezoid_2d(vals, 0.1, 0.1) == pytest.approx(3 * 2 * 2 + 2 * 2 * 2 + 4)


def test_brightness_zero_and_exponential():
    t = np.linspace(0, 200, 20001)
    assert brightness(_traj(t, np.zeros_like(t)), KAPPA) == 0
    assert brightness(_traj(t, np.exp(-KAPPA * t)), KAPPA) == pytest.approx(1, abs=1e-6)
    # window cut
    assert brightness(_traj(t, np.exp(-KAPPA * t)), KAPPA, t_end=40.0) == pytest.approx(
        1 - math.exp(-KAPPA * 40), abs=1e-6)


def test_multiphoton_limits():
    assert multiphoton_probability(_ttg()) == 0
    assert multiphoton_probability(_ttg(g2=lambda pop: pop)) == pytest.approx(1, rel=1e-12)
    assert multiphoton_probability(_ttg(g2=lambda pop: 0.25 * pop)) == pytest.approx(0.25)


def test_multiphoton_undefined_without_emission():
    ttg = _ttg()
    ttg.g2_pop[:] = 0
    with pytest.raises(UndefinedStatisticsError):
        multiphoton_probability(ttg)
    with pytest.raises(UndefinedStatisticsError):
        indistinguishability(ttg)


def test_indistinguishability_limits():
    coherent = _ttg(g1=lambda pop: np.sqrt(pop) + 0j)
    assert indistinguishability(coherent) == pytest.approx(1, abs=1e-12)
    incoherent = _ttg()
    assert indistinguishability(incoherent) == pytest.approx(0.5, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(c=st.floats(0, 1), m=st.floats(0, 0.5), g=st.floats(0, 0.3))
def test_indistinguishability_closed_form(c, m, g):
    # |g1|² = c² pop, |mean|² = m² pop, g2 = g pop: all integrals share one factor
    ttg = _ttg(g1=lambda pop: c * np.sqrt(pop) + 0j, g2=lambda pop: g * pop,
               mean=lambda pop: m * np.sqrt(pop) + 0j)
    expected = 1 - (1 + g - c * c) / (2 - m * m)
    assert indistinguishability(ttg) == pytest.approx(min(max(expected, 0), 1), abs=1e-10)


def test_tau_limit_window():
    ttg = _ttg(g2=lambda pop: pop)
    assert multiphoton_probability(ttg, "window") == pytest.approx(1)
    with pytest.raises(ValueError):
        multiphoton_probability(ttg, "half")


def test_photon_stats_identities():
    s = PhotonStats.from_brightness(0.9652, 2.5e-3)
    assert s.p1 == pytest.approx(0.9602, abs=1e-12)
    assert s.p2 == 2.5e-3
    assert s.p0 + s.p1 + s.p2 == pytest.approx(1, abs=1e-15)
    s = PhotonStats.from_brightness(0.972, 0.046)
    assert s.p1 == pytest.approx(0.88, abs=1e-12)
    assert s.p2 == 0.046
    with pytest.raises(InconsistentStatisticsError):
        PhotonStats.from_brightness(1.3, 0.01)
    with pytest.raises(InconsistentStatisticsError):
        PhotonStats.from_brightness(0.05, 0.04)


def test_photon_stats_of_vacuum_run():
    t = np.linspace(0, 60, 121)
    traj = _traj(t, np.zeros_like(t))
    ttg = _ttg()
    ttg.g2_pop[:] = 0
    s = photon_stats(traj, ttg, KAPPA)
    assert (s.p0, s.p1, s.p2) == (1.0, 0.0, 0.0)


def test_photon_stats_assembly():
    t, nv = _pulse(n=121)
    ttg = _ttg(g1=lambda pop: 0.9 * np.sqrt(pop) + 0j, g2=lambda pop: 0.02 * pop)
    s = photon_stats(_traj(t, nv), ttg, KAPPA, scheme="test")
    beta = KAPPA * np.trapezoid(nv, t)
    assert s.brightness == pytest.approx(beta)
    assert s.p_multi == pytest.approx(0.02)
    assert s.p1 == pytest.approx(beta - 0.04)
    assert s.indistinguishability == pytest.approx(1 - (1.02 - 0.81) / 2)


def test_json_record_round_trip():
    s = PhotonStats.from_probabilities(0.88, 0.046, indist=0.95, scheme="resonant")
    spec = SystemSpec()
    rec = json.loads(s.to_json(spec))
    assert rec["fingerprint"] == spec.fingerprint()
    assert rec["system"]["kappa"] == 150.0
    assert {"indistinguishability", "brightness", "p_multi", "p0", "p1", "p2"} <= rec.keys()
    assert PhotonStats.from_record(rec) == s
