"""Figures of merit of the V-mode emission: I, β, P̃₂ and p0/p1/p2."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass

import numpy as np

from .dynamics import (Liouvillian, NumericsSettings, TimeGrid, Trajectory, TwoTimeGrid,
                       initial_state, propagate, regression_correlators)
from .model import SystemSpec

log = logging.getLogger(__name__)

_TINY = 1e-15


class UndefinedStatisticsError(ArithmeticError):
    """No emission: the normalising integral vanishes."""


class InconsistentStatisticsError(ValueError):
    """Photon-number probabilities outside [0, 1]; usually an unconverged run."""


def trapezoid_2d(values: np.ndarray, dt: float, dtau: float, mask=None) -> float:
    """Trapezoidal double integral over a (t, τ) grid."""
    values = np.asarray(values)
    if mask is not None:
        values = np.where(mask, values, 0.0)
    return float(np.trapezoid(np.trapezoid(values, dx=dtau, axis=1), dx=dt).real)


def _window_mask(ttg: TwoTimeGrid, tau_limit: str):
    if tau_limit == "full":
        return None
    if tau_limit == "window":
        t_end = ttg.t[-1]
        return ttg.t[:, None] + ttg.tau[None, :] <= t_end + 1e-9
    raise ValueError(f"tau_limit must be 'full' or 'window', got {tau_limit!r}")


def brightness(traj: Trajectory, kappa: float, t_end: float | None = None) -> float:
    """Emitted V-mode photons per pulse, ``κ ∫ <b†b> dt`` over [0, t_end].

    ``kappa`` is in ps⁻¹.
    """
    t = traj.times
    n_v = traj.expectations["n_v"]
    if t_end is not None:
        keep = t <= t_end + 1e-9
        t, n_v = t[keep], n_v[keep]
    return float(kappa * np.trapezoid(n_v, t))


def multiphoton_probability(ttg: TwoTimeGrid, tau_limit: str = "full") -> float:
    mask = _window_mask(ttg, tau_limit)
    den = trapezoid_2d(ttg.g2_pop, ttg.dt, ttg.dtau, mask)
    if den < _TINY:
        raise UndefinedStatisticsError("no V-mode population: P̃₂ undefined")
    p = trapezoid_2d(ttg.g2, ttg.dt, ttg.dtau, mask) / den
    if p < 0:
        log.warning("P̃₂ = %.3e below zero before clamping", p)
    return max(p, 0.0)


def indistinguishability(ttg: TwoTimeGrid, tau_limit: str = "full") -> float:
    mask = _window_mask(ttg, tau_limit)
    den = trapezoid_2d(2 * ttg.g2_pop - np.abs(ttg.mean_field) ** 2, ttg.dt, ttg.dtau, mask)
    if abs(den) < _TINY:
        raise UndefinedStatisticsError("vanishing normalisation: I undefined")
    num = trapezoid_2d(ttg.g2_pop + ttg.g2 - np.abs(ttg.g1) ** 2, ttg.dt, ttg.dtau, mask)
    value = 1.0 - num / den
    if not 0.0 <= value <= 1.0:
        log.warning("I = %.6f outside [0, 1] before clamping", value)
    return float(min(max(value, 0.0), 1.0))


@dataclass(frozen=True)
class PhotonStats:
    """Photon-number statistics of one excitation scheme (P̃≥3 = 0)."""

    indistinguishability: float
    brightness: float
    p_multi: float
    p0: float
    p1: float
    p2: float
    scheme: str = "custom"

    @classmethod
    def from_brightness(cls, brightness: float, p_multi: float,
                        indist: float = float("nan"), scheme: str = "custom") -> "PhotonStats":
        p1 = brightness - 2 * p_multi
        p2 = p_multi
        p0 = 1.0 - p1 - p2
        for name, p in (("p0", p0), ("p1", p1), ("p2", p2)):
            if not -1e-12 <= p <= 1 + 1e-12:
                raise InconsistentStatisticsError(
                    f"{name} = {p:.6g} from β = {brightness:.6g}, P̃₂ = {p_multi:.6g}")
        return cls(indist, brightness, p_multi, p0, p1, p2, scheme)

    @classmethod
    def from_probabilities(cls, p1: float, p2: float, indist: float = float("nan"),
                           scheme: str = "custom") -> "PhotonStats":
        return cls.from_brightness(p1 + 2 * p2, p2, indist, scheme)

    def to_record(self, spec: SystemSpec | None = None) -> dict:
        rec = asdict(self)
        if spec is not None:
            rec["system"] = spec.as_dict()
            rec["fingerprint"] = spec.fingerprint()
        return rec

    def to_json(self, spec: SystemSpec | None = None) -> str:
        return json.dumps(self.to_record(spec), sort_keys=True)

    @classmethod
    def from_record(cls, rec: dict) -> "PhotonStats":
        names = ("indistinguishability", "brightness", "p_multi", "p0", "p1", "p2", "scheme")
        return cls(**{k: rec[k] for k in names})


def photon_stats(traj: Trajectory, ttg: TwoTimeGrid, kappa: float,
                 t_end: float | None = None, tau_limit: str = "full",
                 scheme: str = "custom") -> PhotonStats:
    """Assemble :class:`PhotonStats` from one run; β = 0 gives the vacuum."""
    beta = brightness(traj, kappa, ttg.t[-1] if t_end is None else t_end)
    try:
        p_multi = multiphoton_probability(ttg, tau_limit)
        indist = indistinguishability(ttg, tau_limit)
    except UndefinedStatisticsError:
        if beta > _TINY:
            raise
        return PhotonStats(float("nan"), 0.0, 0.0, 1.0, 0.0, 0.0, scheme)
    return PhotonStats.from_brightness(beta, p_multi, indist, scheme)


def simulate(spec: SystemSpec, settings: NumericsSettings = NumericsSettings()):
    """Run dynamics and correlators; returns ``(trajectory, two_time_grid)``."""
    layout = settings.layout()
    gen = Liouvillian(spec, layout)
    t_max = settings.horizon(spec)
    tau_grid = TimeGrid.spanning(t_max, settings.n_t)
    grid = TimeGrid(2 * t_max, tau_grid.dt)
    traj = propagate(initial_state(layout), spec, grid, layout, settings.step, gen)
    ttg = regression_correlators(traj, spec, tau_grid, step=settings.step, generator=gen)
    return traj, ttg


def simulate_photon_stats(spec: SystemSpec, settings: NumericsSettings = NumericsSettings(),
                          scheme: str = "custom") -> PhotonStats:
    traj, ttg = simulate(spec, settings)
    return photon_stats(traj, ttg, spec.to_rate(spec.kappa), tau_limit=settings.tau_limit,
                        scheme=scheme)
