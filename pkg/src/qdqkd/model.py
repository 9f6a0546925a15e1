"""Charged quantum dot in a two-mode cavity: parameters, pulse, Hamiltonian.

Energies are stored in the units a spectroscopist quotes (μeV, with Δ_HV and
the Rabi energy in meV) and converted to angular frequency (ps⁻¹) exactly once,
through ``hbar`` in μeV·ps.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path

import numpy as np

from .operators import HilbertLayout, build_sigma, dagger

HBAR = 658.2119569  # μeV·ps

#: Envelope value, relative to its peak, below which the drive is treated as off.
DRIVE_CUTOFF = 1e-10


@dataclass(frozen=True)
class SystemSpec:
    """Physical parameters of the QD-cavity-laser system."""

    gamma_radiative: float = 1.0  # μeV, Γ14 = Γ24 = Γ13 = Γ23
    gamma_dephasing: float = 2.0  # μeV, γ33 = γ44
    lande_e: float = 0.378
    lande_h: float = 0.202
    bohr_magneton: float = 0.578  # μeV/T, value as printed
    b_field: float = 5.0  # T
    cavity_coupling_h: float = 60.0  # μeV
    cavity_coupling_v: float = 60.0  # μeV
    kappa: float = 150.0  # μeV
    delta_hv: float = 1.5  # meV
    laser_detuning: float = 0.0  # μeV, Δ = ω0 - ω_l
    chirp: float = 0.0  # ps⁻², α
    rabi_peak: float = 0.2  # meV, peak Ω_h (Rabi frequency Ω_R = 2 Ω_h)
    tau_p: float = 2.8  # ps
    hbar: float = HBAR
    rwa_strict: bool = True
    chirp_centered: bool = False

    @property
    def delta_e(self) -> float:
        """Electron Zeeman splitting (μeV)."""
        return self.lande_e * self.bohr_magneton * self.b_field

    @property
    def delta_t(self) -> float:
        """Trion (hole) Zeeman splitting (μeV)."""
        return self.lande_h * self.bohr_magneton * self.b_field

    @property
    def rabi_frequency(self) -> float:
        """Peak Rabi frequency Ω_R = 2 Ω_h, in meV."""
        return 2.0 * self.rabi_peak

    def to_rate(self, energy_uev: float) -> float:
        return energy_uev / self.hbar

    def replace(self, **changes) -> "SystemSpec":
        if "rabi_frequency" in changes:
            changes["rabi_peak"] = 0.5 * changes.pop("rabi_frequency")
        return dataclasses.replace(self, **changes)

    def validate(self) -> "SystemSpec":
        positive = ("gamma_radiative", "gamma_dephasing", "cavity_coupling_h",
                    "cavity_coupling_v", "kappa", "rabi_peak", "tau_p", "hbar")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.chirp < 0:
            raise ValueError(f"chirp must be >= 0, got {self.chirp}")
        return self

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, mapping, base: "SystemSpec | None" = None) -> "SystemSpec":
        """Build from string or typed values keyed by field name."""
        base = base or cls()
        known = {f.name: f for f in fields(cls)}
        changes = {}
        for key, raw in mapping.items():
            if key == "rabi_frequency":
                changes["rabi_frequency"] = float(raw)
                continue
            if key not in known:
                raise KeyError(f"unknown system parameter '{key}'")
            changes[key] = _coerce(raw, getattr(base, key))
        return base.replace(**changes)


def _coerce(raw, like):
    if isinstance(like, bool):
        if isinstance(raw, str):
            if raw.strip().lower() in ("1", "true", "yes", "on"):
                return True
            if raw.strip().lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return bool(raw)
    if isinstance(like, int):
        return int(raw)
    return float(raw)


@dataclass(frozen=True)
class PulseEnvelope:
    """Gaussian drive ``exp[-(t - 2.5 τ_p)² / τ_p²]`` with linear chirp."""

    e_peak_rabi: float  # meV
    tau_p: float  # ps
    chirp: float = 0.0  # ps⁻²
    hbar: float = HBAR
    centered: bool = False

    @classmethod
    def from_spec(cls, spec: SystemSpec) -> "PulseEnvelope":
        return cls(spec.rabi_peak, spec.tau_p, spec.chirp, spec.hbar, spec.chirp_centered)

    @property
    def center(self) -> float:
        return 2.5 * self.tau_p

    @property
    def fwhm(self) -> float:
        """Intensity FWHM, 2 sqrt(ln2 / 2) τ_p ≈ 1.177 τ_p."""
        return 2.0 * np.sqrt(np.log(2.0) / 2.0) * self.tau_p

    @property
    def peak_rate(self) -> float:
        """Peak Ω_h in ps⁻¹."""
        return 1000.0 * self.e_peak_rabi / self.hbar

    @property
    def off_time(self) -> float:
        """Time after which the envelope stays below ``DRIVE_CUTOFF``."""
        return self.center + self.tau_p * np.sqrt(-np.log(DRIVE_CUTOFF))


def rabi_at(t, env: PulseEnvelope):
    """Complex drive ``Ω_h(t) exp(i α t²)`` in ps⁻¹.

    A centred envelope uses ``α (t - t_c)²``: the sweep crosses the carrier at
    the pulse centre. This is the uncentred chirp with the carrier detuned by
    ``2 α t_c`` seen from a frame rotating with the excitation number, so all
    intensity observables agree while the generator stays slow.
    """
    t = np.asarray(t, dtype=float)
    envelope = np.exp(-((t - env.center) / env.tau_p) ** 2)
    s = t - env.center if env.centered else t
    return env.peak_rate * envelope * np.exp(1j * env.chirp * s**2)


def cavity_mode_frequencies(spec: SystemSpec) -> tuple[float, float]:
    """``(Δ_hl, Δ_vl)`` in ps⁻¹ with the V mode resonant with |1>↔|3>."""
    delta_vl = (spec.laser_detuning + spec.delta_e / 2 - spec.delta_t / 2) / spec.hbar
    delta_hl = delta_vl + 1000.0 * spec.delta_hv / spec.hbar
    return delta_hl, delta_vl


def hamiltonian_parts(spec: SystemSpec, layout: HilbertLayout) -> tuple[np.ndarray, np.ndarray]:
    """Split ``H_r(t) = H_static + f(t) D + conj(f(t)) D†`` (ps⁻¹).

    Returns ``(H_static, D)`` with ``D = σ23 + σ14`` and ``f = rabi_at``.
    """
    s = lambda i, j: build_sigma(i, j, layout)
    a, b = layout.mode_h(), layout.mode_v()
    de, dt, delta = spec.delta_e, spec.delta_t, spec.laser_detuning
    delta_hl, delta_vl = cavity_mode_frequencies(spec)

    h0 = (-de / 2 * s(1, 1) + de / 2 * s(2, 2)
          + (delta - dt / 2) * s(3, 3) + (delta + dt / 2) * s(4, 4)) / spec.hbar
    h0 = h0 + delta_hl * dagger(a) @ a + delta_vl * dagger(b) @ b

    # printed form carries σ31; rwa_strict uses the energy-conserving σ13
    v_lower = s(1, 3) if spec.rwa_strict else s(3, 1)
    coupling = (spec.cavity_coupling_h * dagger(a) @ (s(1, 4) + s(2, 3))
                + 1j * spec.cavity_coupling_v * dagger(b) @ (s(2, 4) + v_lower)) / spec.hbar
    h_static = h0 + coupling + dagger(coupling)
    drive = s(2, 3) + s(1, 4)
    return h_static, drive


def build_hamiltonian(t: float, spec: SystemSpec, layout: HilbertLayout) -> np.ndarray:
    """Rotating-frame Hamiltonian ``H_r(t)`` in ps⁻¹."""
    h_static, drive = hamiltonian_parts(spec, layout)
    f = complex(rabi_at(t, PulseEnvelope.from_spec(spec)))
    return h_static + f * drive + np.conj(f) * dagger(drive)


def build_dissipators(spec: SystemSpec, layout: HilbertLayout) -> list[tuple[float, np.ndarray]]:
    """The eight ``(rate, jump)`` channels, rates already halved, in ps⁻¹."""
    s = lambda i, j: build_sigma(i, j, layout)
    kappa = spec.kappa / 2 / spec.hbar
    rad = spec.gamma_radiative / 2 / spec.hbar
    deph = spec.gamma_dephasing / 2 / spec.hbar
    return [
        (kappa, layout.mode_h()),
        (kappa, layout.mode_v()),
        (rad, s(1, 4)),
        (rad, s(2, 4)),
        (rad, s(1, 3)),
        (rad, s(2, 3)),
        (deph, s(3, 3)),
        (deph, s(4, 4)),
    ]


# Config files -------------------------------------------------------------

def read_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keep key case
    text = Path(path).read_text()
    parser.read_string(text, source=str(path))
    return parser


def load_system_spec(path) -> SystemSpec:
    parser = read_config(path)
    section = parser["system"] if parser.has_section("system") else {}
    return SystemSpec.from_mapping(dict(section))


def dump_system_spec(spec: SystemSpec, path) -> None:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    parser["system"] = {k: str(v).lower() if isinstance(v, bool) else repr(v)
                        for k, v in spec.as_dict().items()}
    with open(path, "w") as fh:
        parser.write(fh)


def preset_path(name: str) -> Path:
    ref = resources.files("qdqkd") / "presets" / f"{name}.cfg"
    if not ref.is_file():
        raise KeyError(f"unknown preset '{name}'")
    return Path(str(ref))


def preset(name: str, **overrides) -> SystemSpec:
    """Bundled parameter sets: ``'resonant'`` or ``'adiabatic'``."""
    spec = load_system_spec(preset_path(name))
    return spec.replace(**overrides) if overrides else spec
