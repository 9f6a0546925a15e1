"""Asymptotic secure key rates for BB84 (GLLP, infinite decoy) and TF-QKD.

Every rate is per emitted pulse and clamped at zero. Sources enter only
through their photon-number distribution, so Poisson (PDS) and quantum-dot
(QDS) sources share all the channel code.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy import stats


class DeadChannelError(ZeroDivisionError):
    """Zero detection probability: gains and error rates are undefined."""


@dataclass(frozen=True)
class ChannelSpec:
    fiber_loss: float = 0.21  # dB/km
    distance: float = 0.0  # km
    detector_eff: float = 1.0
    dark_count: float = 1e-9
    misalignment: float = 0.02
    dark_error: float = 0.5

    def __post_init__(self):
        if not 0 < self.detector_eff <= 1:
            raise ValueError(f"detector_eff must lie in (0, 1], got {self.detector_eff}")
        if self.distance < 0 or self.fiber_loss < 0:
            raise ValueError("distance and fiber_loss must be non-negative")

    @property
    def transmittance(self) -> float:
        return 10.0 ** (-self.fiber_loss * self.distance / 10.0)

    def efficiency(self, tf_mode: bool = False) -> float:
        """Single-photon detection probability η_d η_t (or η_d sqrt(η_t))."""
        eta_t = self.transmittance
        return self.detector_eff * (math.sqrt(eta_t) if tf_mode else eta_t)

    def at(self, **changes) -> "ChannelSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class ProtocolParams:
    q: float = 0.5
    f: float = 1.2
    d: float = 1.0
    M: int = 16
    n_max: int = 40

    def __post_init__(self):
        if self.f < 1:
            raise ValueError("error-correction inefficiency f must be >= 1")
        if not 0 < self.d <= 1:
            raise ValueError("duty fraction d must lie in (0, 1]")
        if self.M < 2:
            raise ValueError("need at least two phase slices")


@dataclass(frozen=True)
class PhotonDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("photon distribution must be a non-empty vector")
        if np.any(p < 0):
            raise ValueError("negative photon-number probability")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ValueError(f"distribution sums to {p.sum():.12f}")
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> np.ndarray:
        return np.arange(self.probs.size)

    def multiphoton(self) -> float:
        return float(self.probs[2:].sum())

    def __getitem__(self, n: int) -> float:
        return float(self.probs[n]) if n < self.probs.size else 0.0


class Protocol(str, Enum):
    BB84_NO_DECOY = "bb84_no_decoy"
    BB84_INF_DECOY = "bb84_inf_decoy"
    TF_INF_DECOY = "tf_inf_decoy"


def binary_entropy(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("binary entropy needs arguments in [0, 1]")
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    h = np.where((x == 0) | (x == 1), 0.0, h)
    return float(h) if h.ndim == 0 else h


def poisson_distribution(mu: float, n_max: int = 40) -> PhotonDistribution:
    """Poisson statistics with the tail beyond ``n_max`` folded into the last bin."""
    if not mu > 0:
        raise ValueError(f"mean photon number must be > 0, got {mu}")
    p = stats.poisson.pmf(np.arange(n_max + 1), mu)
    p[-1] = 0.0
    p[-1] = max(1.0 - p.sum(), 0.0)
    return PhotonDistribution(p / p.sum())


def qds_distribution(p1: float, p2: float, eta: float) -> PhotonDistribution:
    """Quantum-dot source (at most two photons) seen through collection efficiency ``eta``."""
    if p1 < 0 or p2 < 0 or p1 + p2 > 1 + 1e-12:
        raise ValueError(f"invalid emission probabilities p1={p1}, p2={p2}")
    if not 0 <= eta <= 1:
        raise ValueError(f"collection efficiency must lie in [0, 1], got {eta}")
    p0 = max(1.0 - p1 - p2, 0.0)
    probs = np.array([
        p0 + p1 * (1 - eta) + p2 * (1 - eta) ** 2,
        p1 * eta + 2 * p2 * eta * (1 - eta),
        p2 * eta**2,
    ])
    return PhotonDistribution(probs / probs.sum())


def phase_slice_error(M: int) -> float:
    """Intrinsic TF-QKD error from ``M`` phase slices."""
    if M < 2:
        raise ValueError("need at least two phase slices")
    x = 2 * math.pi / M
    return 0.5 - math.sin(x) / (2 * x)


def yield_n(n, channel: ChannelSpec, tf_mode: bool = False):
    n = np.asarray(n)
    y0 = channel.dark_count
    return y0 + (1 - y0) * (1 - (1 - channel.efficiency(tf_mode)) ** n)


def error_n(n, channel: ChannelSpec, tf_mode: bool = False, e_s: float = 0.0):
    y = yield_n(n, channel, tf_mode)
    if np.any(y == 0):
        raise DeadChannelError("zero yield: error rate undefined")
    n = np.asarray(n)
    click = 1 - (1 - channel.efficiency(tf_mode)) ** n
    return (channel.dark_error * channel.dark_count + (channel.misalignment + e_s) * click) / y


def gain_and_qber(dist: PhotonDistribution, channel: ChannelSpec, tf_mode: bool = False,
                  e_s: float = 0.0) -> tuple[float, float]:
    """Overall gain Q and QBER E for a source distribution."""
    n = dist.n
    y = yield_n(n, channel, tf_mode)
    q = float(np.dot(y, dist.probs))
    if q <= 0:
        raise DeadChannelError("overall gain is zero")
    # e_n Y_n written out, so empty terms with Y_n = 0 need no division
    click = 1 - (1 - channel.efficiency(tf_mode)) ** n
    err = channel.dark_error * channel.dark_count + (channel.misalignment + e_s) * click
    return q, float(np.dot(err, dist.probs)) / q


def _rate(q1: float, e1: float, q: float, e: float, f: float) -> float:
    if q1 <= 0 or e1 >= 0.5:
        return 0.0
    return q1 * (1 - binary_entropy(e1)) - f * q * binary_entropy(min(e, 0.5))


def skr_bb84_no_decoy(dist: PhotonDistribution, channel: ChannelSpec,
                      proto: ProtocolParams = ProtocolParams()) -> float:
    """GLLP bound: every multiphoton pulse is counted as detected and error-free."""
    q, e = gain_and_qber(dist, channel)
    q1 = q - dist.multiphoton()
    if q1 <= 0:
        return 0.0
    e1 = e * q / q1
    return max(0.0, proto.q * _rate(q1, e1, q, e, proto.f))


def _single_photon(dist, channel, tf_mode, e_s):
    y1 = float(yield_n(1, channel, tf_mode))
    if y1 <= 0:
        return 0.0, 0.5
    eta = channel.efficiency(tf_mode)
    e1 = (channel.dark_error * channel.dark_count + (channel.misalignment + e_s) * eta) / y1
    return y1 * dist[1], e1


def skr_bb84_inf_decoy(dist: PhotonDistribution, channel: ChannelSpec,
                       proto: ProtocolParams = ProtocolParams()) -> float:
    """BB84 with exact single-photon yield and error (infinitely many decoys)."""
    q1, e1 = _single_photon(dist, channel, False, 0.0)
    if q1 <= 0:
        return 0.0
    q, e = gain_and_qber(dist, channel)
    return max(0.0, proto.q * _rate(q1, e1, q, e, proto.f))


def skr_tfqkd_inf_decoy(dist: PhotonDistribution, channel: ChannelSpec,
                        proto: ProtocolParams = ProtocolParams()) -> float:
    """Twin-field rate: half-distance transmittance, phase-slice error, d/M sifting."""
    e_s = phase_slice_error(proto.M)
    q1, e1 = _single_photon(dist, channel, True, e_s)
    if q1 <= 0:
        return 0.0
    q, e = gain_and_qber(dist, channel, True, e_s)
    return max(0.0, proto.d / proto.M * _rate(q1, e1, q, e, proto.f))


RATE_FUNCTIONS = {
    Protocol.BB84_NO_DECOY: skr_bb84_no_decoy,
    Protocol.BB84_INF_DECOY: skr_bb84_inf_decoy,
    Protocol.TF_INF_DECOY: skr_tfqkd_inf_decoy,
}


def key_rate(protocol, dist, channel, proto=ProtocolParams()) -> float:
    return RATE_FUNCTIONS[Protocol(protocol)](dist, channel, proto)


def golden_section_max(func, lo: float, hi: float, tol: float = 1e-4):
    """Maximise a unimodal ``func`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = func(c), func(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = func(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = func(d)
    x = (a + b) / 2
    return x, func(x)


def optimize_mu(protocol, channel: ChannelSpec, proto: ProtocolParams = ProtocolParams(),
                mu_range: tuple[float, float] = (1e-6, 2.0), n_scan: int = 200):
    """Best Poisson mean photon number for ``protocol``.

    A log-spaced scan brackets the optimum (rates vanish outright on parts of
    the range, which defeats a bare golden-section search), then
    golden-section refines it to 1e-4 in μ. Returns ``(nan, 0.0)`` when no
    μ in range gives a key.
    """
    lo, hi = mu_range
    if not 0 < lo < hi <= 2:
        raise ValueError("mu_range must satisfy 0 < lo < hi <= 2")
    rate = RATE_FUNCTIONS[Protocol(protocol)]

    def r(mu):
        return rate(poisson_distribution(mu, proto.n_max), channel, proto)

    grid = np.geomspace(lo, hi, n_scan)
    values = np.array([r(mu) for mu in grid])
    best = int(np.argmax(values))
    if values[best] <= 0:
        return float("nan"), 0.0
    a, b = grid[max(best - 1, 0)], grid[min(best + 1, n_scan - 1)]
    mu, value = golden_section_max(r, a, b, tol=1e-4 * min(1.0, b))
    if value < values[best]:
        return float(grid[best]), float(values[best])
    return float(mu), float(value)


def source_efficiency(kind: str, *, mu: float | None = None, p1: float | None = None,
                      p2: float | None = None, eta: float | None = None) -> float:
    """Probability that a pulse leaves the source non-empty."""
    if kind == "pds":
        return 1.0 - math.exp(-mu)
    if kind == "qds":
        p0 = 1.0 - p1 - p2
        return 1.0 - (p0 + p1 * (1 - eta) + p2 * (1 - eta) ** 2)
    raise ValueError(f"unknown source kind {kind!r}")


def qds_eta_for_efficiency(efficiency: float, p1: float, p2: float) -> float:
    """Collection efficiency giving ``efficiency``; NaN if above ``1 - p0``."""
    # efficiency = (p1 + 2 p2) η - p2 η²
    if efficiency > p1 + p2 + 1e-15:
        return float("nan")
    bq = p1 + 2 * p2
    disc = max(bq * bq - 4 * p2 * efficiency, 0.0)
    # smaller root in the cancellation-free form
    return min(1.0, 2 * efficiency / (bq + math.sqrt(disc)))
