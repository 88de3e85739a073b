"""Run configuration: a JSON document with frequencies given as omega/2pi in MHz."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .circuit import CircuitParams, TlsPolarization, coupling_constant, resonator_frequency
from .effective import DEFAULT_THRESHOLDS
from .errors import ConfigError, TlsjjError
from .model import DriveSpec, ResonatorSpec, SystemModel, TlsSpec

TWO_PI = 2.0 * math.pi


def mhz_to_rad(value: float) -> float:
    """omega/2pi in MHz -> angular frequency in rad/us."""
    return TWO_PI * float(value)


def rad_to_mhz(value: float) -> float:
    return float(value) / TWO_PI


@dataclass(frozen=True)
class SimulationSettings:
    t_end_us: float | None = None
    dt_us: float | None = None
    points: int = 201
    method: str = "rk4"
    regime: str = "dispersive"
    initial: tuple[str, ...] | None = None


@dataclass(frozen=True)
class SweepSettings:
    parameter: str
    start: float
    stop: float
    points: int


@dataclass(frozen=True)
class RunConfig:
    text: str
    tree: dict
    model: SystemModel
    simulation: SimulationSettings
    sweep: SweepSettings | None
    thresholds: dict = field(default_factory=dict)


def _number(section: dict, key: str, where: str, default=None) -> float:
    if key not in section:
        if default is None:
            raise ConfigError(f"{where}: missing {key!r}")
        return default
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{where}.{key} must be a finite number, got {value!r}")
    return float(value)


def _one_of(section: dict, absolute: str, detuning: str, where: str) -> str:
    has_abs, has_det = absolute in section, detuning in section
    if has_abs == has_det:
        raise ConfigError(f"{where}: give exactly one of {absolute!r} or {detuning!r}")
    return absolute if has_abs else detuning


def _drive_mhz(drive: dict) -> float:
    if "omega_d_mhz" not in drive:
        raise ConfigError("drive.omega_d_mhz is required when absolute frequencies are used")
    return _number(drive, "omega_d_mhz", "drive")


def _detuning(section: dict, absolute: str, detuning: str, where: str, drive: dict) -> float:
    """Detuning in rad/us; absolute values are differenced in MHz first."""
    key = _one_of(section, absolute, detuning, where)
    value = _number(section, key, where)
    if key == absolute:
        value = value - _drive_mhz(drive)
    return mhz_to_rad(value)


def parse_config(text: str) -> RunConfig:
    try:
        tree = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(tree, dict):
        raise ConfigError("config root must be an object")
    res = tree.get("resonator")
    tls_list = tree.get("tls")
    if not isinstance(res, dict):
        raise ConfigError("missing 'resonator' section")
    if not isinstance(tls_list, list) or not tls_list:
        raise ConfigError("'tls' must be a nonempty list")
    drive = tree.get("drive", {}) or {}
    circuit = tree.get("circuit")

    gs = []
    for k, entry in enumerate(tls_list):
        where = f"tls[{k}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{where} must be an object")
        gs.append(mhz_to_rad(_number(entry, "g_mhz", where, 0.0 if circuit else None)))

    if circuit is not None:
        omega_c, gs = _resolve_circuit(circuit, len(tls_list))
        delta_c = omega_c - mhz_to_rad(_drive_mhz(drive))
    else:
        delta_c = _detuning(res, "omega_c_mhz", "delta_c_mhz", "resonator", drive)

    tls = []
    for k, entry in enumerate(tls_list):
        where = f"tls[{k}]"
        delta = _detuning(entry, "omega_mhz", "delta_mhz", where, drive)
        label = str(entry.get("label", f"tls{k + 1}"))
        tls.append(TlsSpec(label, delta, gs[k]))

    fock = res.get("fock_dim", 10)
    if isinstance(fock, bool) or not isinstance(fock, int):
        raise ConfigError(f"resonator.fock_dim must be an integer, got {fock!r}")
    try:
        model = SystemModel(
            ResonatorSpec(delta_c, mhz_to_rad(_number(res, "kappa_mhz", "resonator")), fock),
            DriveSpec(mhz_to_rad(_number(drive, "epsilon0_mhz", "drive", 0.0))),
            tuple(tls),
        )
    except TlsjjError as exc:
        raise ConfigError(str(exc)) from exc

    sim = _parse_simulation(tree.get("simulation", {}) or {}, len(tls))
    sweep = _parse_sweep(tree["sweep"]) if tree.get("sweep") is not None else None
    thresholds = dict(DEFAULT_THRESHOLDS)
    for key, value in (tree.get("thresholds") or {}).items():
        if key not in DEFAULT_THRESHOLDS:
            raise ConfigError(f"unknown threshold {key!r}")
        thresholds[key] = _number({key: value}, key, "thresholds")
    return RunConfig(text, tree, model, sim, sweep, thresholds)


def _resolve_circuit(circuit: dict, n_tls: int):
    where = "circuit"
    j_x = circuit.get("j_x")
    if not isinstance(j_x, list) or len(j_x) != n_tls:
        raise ConfigError("circuit.j_x must list one polarization per TLS")
    try:
        params = CircuitParams(
            mhz_to_rad(_number(circuit, "e_j_mhz", where)),
            mhz_to_rad(_number(circuit, "e_l_mhz", where)),
            mhz_to_rad(_number(circuit, "e_c_mhz", where)),
            _number(circuit, "phi_ex", where, 0.0),
        )
        omega_c = resonator_frequency(params)
        gs = [coupling_constant(params, TlsPolarization(float(j))) for j in j_x]
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"circuit: {exc}") from exc
    return omega_c, gs


_INITIAL_LABELS = {"e", "g", "+", "-", "+i", "-i"}


def _parse_simulation(sim: dict, n_tls: int) -> SimulationSettings:
    method = sim.get("method", "rk4")
    if method not in ("rk4", "adaptive"):
        raise ConfigError(f"simulation.method must be 'rk4' or 'adaptive', got {method!r}")
    regime = sim.get("regime", "dispersive")
    if regime not in ("dispersive", "bad_cavity"):
        raise ConfigError(f"simulation.regime must be 'dispersive' or 'bad_cavity', got {regime!r}")
    initial = sim.get("initial")
    if initial is not None:
        if not isinstance(initial, list) or len(initial) != n_tls or \
                not all(s in _INITIAL_LABELS for s in initial):
            raise ConfigError(f"simulation.initial must list one of {sorted(_INITIAL_LABELS)} per TLS")
        initial = tuple(initial)
    points = sim.get("points", 201)
    if isinstance(points, bool) or not isinstance(points, int) or points < 2:
        raise ConfigError("simulation.points must be an integer >= 2")
    t_end = _number(sim, "t_end_us", "simulation", math.nan)
    dt = _number(sim, "dt_us", "simulation", math.nan)
    if not math.isnan(t_end) and t_end <= 0:
        raise ConfigError("simulation.t_end_us must be > 0")
    if not math.isnan(dt) and dt <= 0:
        raise ConfigError("simulation.dt_us must be > 0")
    return SimulationSettings(None if math.isnan(t_end) else t_end,
                              None if math.isnan(dt) else dt, points, method, regime, initial)


def _parse_sweep(sweep: dict) -> SweepSettings:
    if not isinstance(sweep, dict):
        raise ConfigError("'sweep' must be an object")
    parameter = sweep.get("parameter", "delta_c")
    points = sweep.get("points")
    if isinstance(points, bool) or not isinstance(points, int) or points < 2:
        raise ConfigError("sweep.points must be an integer >= 2")
    return SweepSettings(parameter, _number(sweep, "start", "sweep"),
                         _number(sweep, "stop", "sweep"), points)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
