"""Figure scenarios: parameter sweeps over the dynamics and key-rate layers.

Each scenario resolves to a :class:`ScenarioConfig`, runs every point of the
Cartesian product of its axes (optionally on a thread pool; output order is
fixed by the axes), and writes ``<name>.csv`` plus a ``<name>.json`` sidecar.
The first CSV line is ``#`` followed by the resolved configuration as JSON.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import itertools
import json
import logging
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import NumericsSettings
from .metrics import PhotonStats, simulate_photon_stats
from .model import SystemSpec, preset
from .qkd import (ChannelSpec, Protocol, ProtocolParams, key_rate, optimize_mu,
                  poisson_distribution, qds_distribution, qds_eta_for_efficiency)

log = logging.getLogger(__name__)

SCENARIOS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8a", "fig8b", "fig8c",
             "fig9a", "fig9b", "fig9c", "fig10a", "fig10b", "custom")

#: Reference emission probabilities at Δ_HV = 1.5 meV, keyed by preset.
PAPER_STATS = {"resonant": (0.88, 4.6e-2), "adiabatic": (0.96, 2.5e-3)}

# About 4x cheaper than NumericsSettings(); P̃₂ within ~2e-4 relative, fine for maps.
SWEEP_NUMERICS = NumericsSettings(fock_dim=3, n_t=60)
FINE_NUMERICS = NumericsSettings()

COLLECTION_STEPS = (0.01, 0.2, 0.4, 0.6, 0.8, 1.0)

SYSTEM_KEYS = {f.name for f in dataclasses.fields(SystemSpec)} | {"rabi_frequency"}
CHANNEL_KEYS = {f.name for f in dataclasses.fields(ChannelSpec)}
PROTOCOL_KEYS = {f.name for f in dataclasses.fields(ProtocolParams)}
NUMERICS_KEYS = {f.name for f in dataclasses.fields(NumericsSettings)}
SOURCE_KEYS = {"mu", "collection_eff", "source_efficiency", "p1", "p2"}


class ConfigError(ValueError):
    """Invalid scenario configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    steps: int

    def __post_init__(self):
        if self.steps < 2:
            raise ConfigError(f"axis '{self.name}' needs steps >= 2, got {self.steps}")
        if self.start == self.stop:
            raise ConfigError(f"axis '{self.name}' has zero length ({self.start} to {self.stop})")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.steps)


@dataclass
class ScenarioConfig:
    scenario: str = "custom"
    system: dict = field(default_factory=dict)
    channel: dict = field(default_factory=dict)
    protocol: dict = field(default_factory=dict)
    numerics: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict)
    axes: list = field(default_factory=list)
    output_path: str = "results"
    preset: str | None = None
    paper_stats: bool = False
    fine: bool = False

    def resolved(self) -> dict:
        d = dataclasses.asdict(self)
        d["axes"] = [dataclasses.asdict(a) for a in self.axes]
        d.pop("output_path")
        return d

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.resolved(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class SweepResult:
    axes: dict
    columns: list
    rows: list
    metadata: dict

    def csv_text(self) -> str:
        header = "#" + json.dumps(self.metadata["config"], sort_keys=True)
        lines = [header, ",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(_fmt(v) for v in row))
        return "\n".join(lines) + "\n"

    def write(self, out_dir, name: str) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{name}.csv"
        path.write_text(self.csv_text())
        (out / f"{name}.json").write_text(json.dumps(self.metadata, indent=2, sort_keys=True))
        return path


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


# Config files -------------------------------------------------------------

def _line_of(text: str, section: str, key: str | None = None) -> int:
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return i
    return 0


def _fail(path, text, section, key, message):
    line = _line_of(text, section, key)
    raise ConfigError(f"{path}:{line}: {message}")


def load_scenario(path, **overrides) -> ScenarioConfig:
    """Parse and validate a scenario file; errors carry ``file:line``."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}:0: cannot read config ({exc.strerror})") from exc
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    known = {"scenario", "system", "channel", "protocol", "numerics", "source", "sweep"}
    for section in parser.sections():
        if section not in known:
            _fail(path, text, section, None, f"unknown section [{section}]")

    cfg = ScenarioConfig()
    if parser.has_section("scenario"):
        sec = parser["scenario"]
        for key, raw in sec.items():
            if key == "name":
                cfg.scenario = raw.strip()
            elif key == "output":
                cfg.output_path = raw.strip()
            elif key == "preset":
                cfg.preset = raw.strip()
            elif key in ("paper_stats", "fine"):
                try:
                    setattr(cfg, key, sec.getboolean(key))
                except ValueError:
                    _fail(path, text, "scenario", key, f"'{key}' must be true/false")
            else:
                _fail(path, text, "scenario", key, f"unknown scenario key '{key}'")

    for section, keys in (("system", SYSTEM_KEYS), ("channel", CHANNEL_KEYS),
                          ("protocol", PROTOCOL_KEYS), ("numerics", NUMERICS_KEYS),
                          ("source", SOURCE_KEYS)):
        if not parser.has_section(section):
            continue
        values = {}
        for key, raw in parser[section].items():
            if key not in keys:
                _fail(path, text, section, key, f"unknown {section} parameter '{key}'")
            values[key] = _parse_scalar(raw)
        setattr(cfg, section, values)

    if parser.has_section("sweep"):
        for key, raw in parser["sweep"].items():
            if key not in SYSTEM_KEYS | CHANNEL_KEYS | PROTOCOL_KEYS | SOURCE_KEYS:
                _fail(path, text, "sweep", key, f"unrecognised sweep axis '{key}'")
            parts = [p.strip() for p in raw.split(",")]
            try:
                start, stop, steps = float(parts[0]), float(parts[1]), int(parts[2])
                if len(parts) != 3:
                    raise ValueError
            except (ValueError, IndexError):
                _fail(path, text, "sweep", key, "axis must be 'start, stop, steps'")
            try:
                cfg.axes.append(Axis(key, start, stop, steps))
            except ConfigError as exc:
                _fail(path, text, "sweep", key, str(exc))

    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    try:
        validate_scenario(cfg)
    except ConfigError as exc:
        raise ConfigError(f"{path}:{_line_of(text, 'scenario', 'name')}: {exc}") from exc
    return cfg


def _parse_scalar(raw: str):
    s = raw.strip()
    if s.lower() in ("true", "false"):
        return s.lower() == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def validate_scenario(cfg: ScenarioConfig) -> ScenarioConfig:
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario '{cfg.scenario}'")
    if cfg.preset is not None and cfg.preset not in PAPER_STATS:
        raise ConfigError(f"unknown preset '{cfg.preset}'")
    for axis in cfg.axes:
        if axis.name not in SYSTEM_KEYS | CHANNEL_KEYS | PROTOCOL_KEYS | SOURCE_KEYS:
            raise ConfigError(f"unrecognised sweep axis '{axis.name}'")
        if axis.steps < 2:
            raise ConfigError(f"axis '{axis.name}' needs steps >= 2")
    if cfg.scenario == "custom" and not cfg.axes:
        raise ConfigError("custom scenario needs at least one sweep axis")
    try:
        SystemSpec().replace(**cfg.system).validate() if cfg.system else None
        ChannelSpec(**cfg.channel)
        ProtocolParams(**cfg.protocol)
        NumericsSettings(**cfg.numerics)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


# Photon statistics cache --------------------------------------------------

def default_cache_dir() -> Path:
    return Path(os.environ.get("QDQKD_CACHE", Path.home() / ".cache" / "qdqkd"))


def cache_photon_stats(preset_name: str, delta_hv: float = 1.5, *, paper_stats: bool = False,
                       numerics: NumericsSettings = FINE_NUMERICS, cache_dir=None,
                       system_overrides: dict | None = None) -> PhotonStats:
    """Photon statistics of a preset, simulated once and kept on disk."""
    if preset_name not in PAPER_STATS:
        raise ConfigError(f"unknown preset '{preset_name}'")
    if paper_stats:
        p1, p2 = PAPER_STATS[preset_name]
        return PhotonStats.from_probabilities(p1, p2, scheme=preset_name)

    spec = preset(preset_name, delta_hv=delta_hv, **(system_overrides or {}))
    key = hashlib.sha256(json.dumps(
        [preset_name, delta_hv, spec.fingerprint(), dataclasses.asdict(numerics)],
        sort_keys=True).encode()).hexdigest()[:20]
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = cache / f"stats-{preset_name}-{key}.json"
    if path.exists():
        try:
            return PhotonStats.from_record(json.loads(path.read_text()))
        except (ValueError, KeyError, TypeError):
            log.warning("corrupt photon-stats cache %s; recomputing", path)
    stats = simulate_photon_stats(spec, numerics, scheme=preset_name)
    text = stats.to_json(spec)
    cache.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return PhotonStats.from_record(json.loads(text))


# Scenario evaluation ------------------------------------------------------

@dataclass(frozen=True)
class _Figure:
    kind: str  # "dynamics" or "rates"
    axes: tuple
    fine_axes: tuple
    preset: str | None = None
    protocol: Protocol | None = None
    fixed: tuple = ()  # (key, value) defaults applied before user overrides


_DHV = (Axis("delta_hv", 0.3, 1.5, 5),)
_DHV_FINE = (Axis("delta_hv", 0.1, 1.5, 15),)
_MAP = (Axis("rabi_frequency", 0.1, 1.0, 25), Axis("tau_p", 1.0, 5.0, 25))
_MAP_FINE = (Axis("rabi_frequency", 0.1, 1.0, 50), Axis("tau_p", 1.0, 5.0, 50))
_EFF = (Axis("source_efficiency", 0.0, 0.99, 100),)
_EFF_FINE = (Axis("source_efficiency", 0.0, 0.999, 1000),)
_DIST = (Axis("distance", 0.0, 600.0, 121),)
_DIST_FINE = (Axis("distance", 0.0, 600.0, 601),)
_DIST_ETA = (Axis("distance", 0.0, 600.0, 121), Axis("detector_eff", 0.6, 1.0, 3))
_DIST_ETA_FINE = (Axis("distance", 0.0, 600.0, 601), Axis("detector_eff", 0.6, 1.0, 3))

FIGURES = {
    "fig2": _Figure("dynamics", _MAP, _MAP_FINE, "resonant", fixed=(("delta_hv", 0.6),)),
    "fig3": _Figure("dynamics", _MAP, _MAP_FINE, "adiabatic", fixed=(("delta_hv", 0.6),)),
    "fig4": _Figure("dynamics", _DHV, _DHV_FINE, "resonant"),
    "fig5": _Figure("dynamics", _DHV, _DHV_FINE, "adiabatic"),
    "fig6": _Figure("dynamics", _DHV, _DHV_FINE, "resonant"),
    "fig7": _Figure("dynamics", _DHV, _DHV_FINE, "adiabatic"),
    "fig8a": _Figure("rates", _EFF, _EFF_FINE, protocol=Protocol.BB84_NO_DECOY),
    "fig8b": _Figure("rates", _EFF, _EFF_FINE, protocol=Protocol.BB84_INF_DECOY),
    "fig8c": _Figure("rates", _EFF, _EFF_FINE, protocol=Protocol.TF_INF_DECOY),
    "fig9a": _Figure("rates", _DIST, _DIST_FINE, protocol=Protocol.BB84_NO_DECOY),
    "fig9b": _Figure("rates", _DIST, _DIST_FINE, protocol=Protocol.BB84_INF_DECOY),
    "fig9c": _Figure("rates", _DIST, _DIST_FINE, protocol=Protocol.TF_INF_DECOY),
    "fig10a": _Figure("rates", _DIST_ETA, _DIST_ETA_FINE, protocol=Protocol.TF_INF_DECOY),
    "fig10b": _Figure("rates", _DIST_ETA, _DIST_ETA_FINE, protocol=Protocol.TF_INF_DECOY),
}

# fixed Poisson mean photon numbers used by the figure scenarios
_PDS_MU = {Protocol.BB84_INF_DECOY: 1.0, Protocol.TF_INF_DECOY: 0.765}


def _split(point: dict):
    groups = {"system": {}, "channel": {}, "protocol": {}, "source": {}}
    for key, value in point.items():
        if key in SYSTEM_KEYS:
            groups["system"][key] = value
        elif key in CHANNEL_KEYS:
            groups["channel"][key] = value
        elif key in PROTOCOL_KEYS:
            groups["protocol"][key] = int(value) if key in ("M", "n_max") else value
        else:
            groups["source"][key] = value
    return groups


class _RateContext:
    def __init__(self, cfg: ScenarioConfig, stats: dict):
        self.cfg = cfg
        self.stats = stats  # preset name -> (p1, p2)

    def channel(self, changes):
        return ChannelSpec(**{**self.cfg.channel, **changes})

    def protocol(self, changes):
        return ProtocolParams(**{**self.cfg.protocol, **changes})


def _fig8_point(protocol, ctx, point):
    g = _split(point)
    ch, pr = ctx.channel(g["channel"]), ctx.protocol(g["protocol"])
    eff = g["source"]["source_efficiency"]
    out = {}
    for name, label in (("adiabatic", "ae"), ("resonant", "re")):
        p1, p2 = ctx.stats[name]
        eta = qds_eta_for_efficiency(eff, p1, p2)
        out[f"skr_{label}_qds"] = (float("nan") if math.isnan(eta) else
                                   key_rate(protocol, qds_distribution(p1, p2, eta), ch, pr))
    out["skr_pds"] = (0.0 if eff <= 0 else
                      key_rate(protocol, poisson_distribution(-math.log1p(-eff), pr.n_max), ch, pr))
    return out


def _pds_mu(protocol, ch):
    if protocol == Protocol.BB84_NO_DECOY:
        return 0.7 * ch.efficiency()
    return _PDS_MU[protocol]


def _fig9_point(protocol, ctx, point):
    g = _split(point)
    ch, pr = ctx.channel(g["channel"]), ctx.protocol(g["protocol"])
    out = {}
    for name, label in (("adiabatic", "ae"), ("resonant", "re")):
        p1, p2 = ctx.stats[name]
        for eta in COLLECTION_STEPS:
            out[f"skr_{label}_eta{int(round(eta * 100)):03d}"] = key_rate(
                protocol, qds_distribution(p1, p2, eta), ch, pr)
    mu = g["source"].get("mu", _pds_mu(protocol, ch))
    out["skr_pds"] = key_rate(protocol, poisson_distribution(mu, pr.n_max), ch, pr)
    mu_opt, r_opt = optimize_mu(protocol, ch, pr)
    out["mu_opt"] = mu_opt
    out["skr_pds_opt"] = r_opt
    return out


def _fig10_point(source, ctx, point):
    g = _split(point)
    ch, pr = ctx.channel(g["channel"]), ctx.protocol(g["protocol"])
    if source == "pds":
        dist = poisson_distribution(g["source"].get("mu", 0.765), pr.n_max)
    else:
        p1, p2 = ctx.stats["adiabatic"]
        dist = qds_distribution(p1, p2, g["source"].get("collection_eff", 0.5))
    return {"skr_tf": key_rate(Protocol.TF_INF_DECOY, dist, ch, pr)}


def _custom_rate_point(ctx, point):
    g = _split(point)
    ch, pr = ctx.channel(g["channel"]), ctx.protocol(g["protocol"])
    src = {**ctx.cfg.source, **g["source"]}
    mu = src.get("mu", 0.5)
    p1 = src.get("p1", ctx.stats["adiabatic"][0])
    p2 = src.get("p2", ctx.stats["adiabatic"][1])
    eta = src.get("collection_eff", 1.0)
    out = {}
    for proto in Protocol:
        out[f"{proto.value}_pds"] = key_rate(proto, poisson_distribution(mu, pr.n_max), ch, pr)
        out[f"{proto.value}_qds"] = key_rate(proto, qds_distribution(p1, p2, eta), ch, pr)
    return out


def _dynamics_point(cfg, preset_name, numerics, fixed, point):
    spec = preset(preset_name or "resonant", **{**fixed, **cfg.system})
    spec = spec.replace(**_split(point)["system"])
    stats = simulate_photon_stats(spec, numerics, scheme=preset_name or "custom")
    return {"indistinguishability": stats.indistinguishability, "brightness": stats.brightness,
            "p_multi": stats.p_multi, "p0": stats.p0, "p1": stats.p1, "p2": stats.p2}


def run_scenario(cfg: ScenarioConfig, threads: int = 1, cache_dir=None) -> SweepResult:
    """Evaluate every grid point of a scenario (results ordered by axes)."""
    validate_scenario(cfg)
    started = time.perf_counter()
    fig = FIGURES.get(cfg.scenario)
    axes = list(cfg.axes) or list(fig.fine_axes if cfg.fine else fig.axes)
    numerics = dataclasses.replace(FINE_NUMERICS if cfg.fine else SWEEP_NUMERICS, **cfg.numerics)

    custom_dynamics = cfg.scenario == "custom" and any(a.name in SYSTEM_KEYS for a in axes)
    if (fig and fig.kind == "dynamics") or custom_dynamics:
        preset_name = fig.preset if fig else (cfg.preset or "resonant")
        fixed = dict(fig.fixed) if fig else {}
        evaluate = lambda p: _dynamics_point(cfg, preset_name, numerics, fixed, p)
    else:
        stats = {}
        for name in PAPER_STATS:
            if cfg.paper_stats:
                stats[name] = PAPER_STATS[name]
            else:
                s = cache_photon_stats(name, 1.5, numerics=FINE_NUMERICS, cache_dir=cache_dir,
                                       system_overrides=cfg.system or None)
                stats[name] = (s.p1, s.p2)
        ctx = _RateContext(cfg, stats)
        if cfg.scenario.startswith("fig8"):
            evaluate = lambda p: _fig8_point(fig.protocol, ctx, p)
        elif cfg.scenario.startswith("fig9"):
            evaluate = lambda p: _fig9_point(fig.protocol, ctx, p)
        elif cfg.scenario == "fig10a":
            evaluate = lambda p: _fig10_point("pds", ctx, p)
        elif cfg.scenario == "fig10b":
            evaluate = lambda p: _fig10_point("qds", ctx, p)
        else:
            evaluate = lambda p: _custom_rate_point(ctx, p)

    names = [a.name for a in axes]
    points = [dict(zip(names, map(float, combo)))
              for combo in itertools.product(*(a.values for a in axes))]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outputs = list(pool.map(evaluate, points))
    else:
        outputs = [evaluate(p) for p in points]

    out_cols = list(outputs[0]) if outputs else []
    rows = [[p[n] for n in names] + [o[c] for c in out_cols] for p, o in zip(points, outputs)]
    resolved = cfg.resolved()
    resolved["axes"] = [dataclasses.asdict(a) for a in axes]
    resolved["numerics"] = dataclasses.asdict(numerics)
    metadata = {
        "config": resolved,
        "fingerprint": cfg.fingerprint(),
        "version": __version__,
        "wall_time_s": time.perf_counter() - started,
        "rows": len(rows),
    }
    return SweepResult({a.name: a.values.tolist() for a in axes}, names + out_cols, rows, metadata)
