"""Simulate TLS's coupled through a driven, damped Josephson-junction resonator.

Each verb reads a JSON run configuration, writes ``<verb>.csv`` and a
``manifest.json`` into the output directory, and exits with 0 on success,
2 on a configuration error and 3 on a numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, _kernels, algebra, gates, readout, solver
from .config import RunConfig, load_config, rad_to_mhz
from .effective import (EffectiveDispersive, adiabatic_cavity_amplitude, badcavity_params,
                        build_effective_hamiltonian, build_effective_lindblad, dispersive_params,
                        validity_report)
from .errors import ConfigError, NumericalError, TlsjjError
from .model import resonator_op, tls_op, validate_truncation

MAX_COMPARE_TLS = 3
MAX_UNIVERSALITY_TLS = 3
SWEEP_VALID_G_MULTIPLE = 3.0

_SQRT_HALF = 1.0 / math.sqrt(2.0)
# index 0 = excited, index 1 = ground
_KETS = {
    "e": np.array([1.0, 0.0], dtype=complex),
    "g": np.array([0.0, 1.0], dtype=complex),
    "+": np.array([_SQRT_HALF, _SQRT_HALF], dtype=complex),
    "-": np.array([_SQRT_HALF, -_SQRT_HALF], dtype=complex),
    "+i": np.array([_SQRT_HALF, 1j * _SQRT_HALF], dtype=complex),
    "-i": np.array([_SQRT_HALF, -1j * _SQRT_HALF], dtype=complex),
}


class Table:
    """Ordered rows with a fixed header; floats print as ``%.8e``."""

    def __init__(self, columns):
        self.columns = list(columns)
        self.rows: list[list] = []

    def add(self, row):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, header has {len(self.columns)}")
        self.rows.append(list(row))

    def column(self, name):
        k = self.columns.index(name)
        return [r[k] for r in self.rows]

    @staticmethod
    def cell(value) -> str:
        if value is None:
            return ""
        if isinstance(value, (bool, np.bool_)):
            return "1" if value else "0"
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        if isinstance(value, (float, np.floating)):
            value = float(value)
            if value == 0.0:
                value = 0.0  # drop the sign of -0.0
            return f"{value:.8e}"
        return str(value)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([self.cell(v) for v in row])
        return buf.getvalue()


def ordered_map(fn, items, threads: int):
    """``map`` over a thread pool; results keep the input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# -- sweep-coupling ----------------------------------------------------------

def _sweep_row(model, delta_c):
    row_model = model.replace(delta_c=delta_c, epsilon0=0.0)
    valid = all(abs(t.delta_n - delta_c) >= SWEEP_VALID_G_MULTIPLE * abs(t.g_n)
                and t.delta_n != delta_c for t in row_model.tls)
    disp = None
    if valid:
        disp = abs(dispersive_params(row_model).coupling(0, 1))
    bad_abs = bad_arg = None
    if row_model.resonator.kappa > 0:
        lam = badcavity_params(row_model).coupling(0, 1)
        bad_abs, bad_arg = abs(lam), float(np.angle(lam))
    return (delta_c, disp, bad_abs, bad_arg, valid)


def cmd_sweep_coupling(cfg: RunConfig, threads: int = 1) -> Table:
    """|lambda| of both regimes for the first TLS pair over a delta_c grid.

    The drive is irrelevant for the couplings and is ignored here.  Rows
    where ``|Delta_nc| < 3 g_n`` for either TLS leave the dispersive column
    blank and carry ``dispersive_valid = 0``.
    """
    model = cfg.model
    if model.n_tls != 2:
        raise ConfigError("sweep-coupling needs exactly two TLS entries")
    sweep = cfg.sweep
    if sweep is None:
        raise ConfigError("sweep-coupling needs a 'sweep' section")
    if sweep.parameter != "delta_c":
        raise ConfigError(f"sweep.parameter must be 'delta_c', got {sweep.parameter!r}")
    grid_mhz = np.linspace(sweep.start, sweep.stop, sweep.points)
    rows = ordered_map(lambda dc: _sweep_row(model, dc), 2.0 * math.pi * grid_mhz, threads)
    table = Table(["delta_c_over_2pi_mhz", "abs_lambda_dispersive_over_2pi_mhz",
                   "abs_lambda_badcavity_over_2pi_mhz", "arg_lambda_badcavity_rad",
                   "dispersive_valid"])
    for mhz, (_, disp, bad_abs, bad_arg, valid) in zip(grid_mhz, rows):
        table.add([float(mhz), None if disp is None else rad_to_mhz(disp),
                   None if bad_abs is None else rad_to_mhz(bad_abs), bad_arg, valid])
    return table


# -- compare -----------------------------------------------------------------

def _initial_labels(cfg: RunConfig) -> tuple[str, ...]:
    labels = cfg.simulation.initial
    if labels is None:
        labels = ("e",) + ("g",) * (cfg.model.n_tls - 1)
    return labels


def _tls_ket(labels) -> np.ndarray:
    ket = np.ones(1, dtype=complex)
    for s in labels:
        ket = np.kron(ket, _KETS[s])
    return ket


def _regime_params(cfg: RunConfig):
    if cfg.simulation.regime == "dispersive":
        return dispersive_params(cfg.model)
    return badcavity_params(cfg.model)


def _default_duration(cfg: RunConfig, params) -> float:
    if params.n_tls >= 2 and params.coupling(0, 1) != 0:
        return math.pi / (2.0 * abs(params.coupling(0, 1)))
    rate = float(np.max(_decay_rates(params)))
    if rate > 0:
        return 3.0 / rate
    raise ConfigError("simulation.t_end_us is required: no natural time scale for this model")


def _decay_rates(params) -> np.ndarray:
    return params.induced_decay if isinstance(params, EffectiveDispersive) else params.gamma1


def _time_grid(cfg: RunConfig, default_duration) -> np.ndarray:
    """Output grid; ``default_duration`` is called only when no t_end_us is given."""
    sim = cfg.simulation
    t_end = sim.t_end_us if sim.t_end_us is not None else default_duration()
    if sim.dt_us is not None:
        points = int(round(t_end / sim.dt_us)) + 1
        return np.linspace(0.0, t_end, max(points, 2))
    return np.linspace(0.0, t_end, sim.points)


def _require_truncation(model):
    report = validate_truncation(model)
    if not report.passed:
        raise ConfigError(
            f"fock_dim {report.fock_dim} too small: drive gives mean photon number "
            f"{report.mean_photons:.3g}, needs fock_dim >= {report.required_fock_dim:.1f}")


def cmd_compare(cfg: RunConfig, threads: int = 1) -> Table:
    """Full master equation against the effective TLS-only model."""
    model = cfg.model
    N = model.n_tls
    if N > MAX_COMPARE_TLS:
        raise ConfigError(f"compare supports at most {MAX_COMPARE_TLS} TLS's, got {N}")
    _require_truncation(model)
    params = _regime_params(cfg)
    times = _time_grid(cfg, lambda: _default_duration(cfg, params))
    method = cfg.simulation.method
    tls_ket = _tls_ket(_initial_labels(cfg))
    vacuum = np.zeros(model.resonator.fock_dim, dtype=complex)
    vacuum[0] = 1.0
    rho_full = algebra.PureState(np.kron(vacuum, tls_ket), model.space_tag).density()
    eff_tag = (2,) * N
    rho_eff = algebra.PureState(tls_ket, eff_tag).density()

    full_obs = {"a": resonator_op(model, "a")}
    eff_obs = {}
    for n in range(N):
        for which in ("x", "y", "z", "minus"):
            full_obs[f"{which}{n}"] = tls_op(model, n, which)
            eff_obs[f"{which}{n}"] = algebra.embed(algebra.pauli(which), n, eff_tag)

    def run_full():
        traj = solver.evolve(rho_full, model, times, method, observables=full_obs)
        reduced = [algebra.partial_trace(s, range(1, N + 1)) for s in traj.states]
        return traj, reduced

    def run_eff():
        h = build_effective_hamiltonian(params)
        return solver.evolve(rho_eff, h, times, method,
                             extra_terms=build_effective_lindblad(params), observables=eff_obs)

    (full, reduced), eff = ordered_map(lambda f: f(), [run_full, run_eff], threads)
    _check_hygiene({"full": full, "effective": eff})

    columns = ["time_us"]
    for t in model.tls:
        for which in ("sx", "sy", "sz"):
            columns += [f"{t.label}_{which}_full", f"{t.label}_{which}_eff"]
    columns += ["trace_distance", "re_a_full", "im_a_full", "re_a_adiabatic", "im_a_adiabatic"]
    table = Table(columns)
    kappa_ok = model.resonator.kappa > 0
    for i, t in enumerate(times):
        row = [float(t)]
        for n in range(N):
            for which in ("x", "y", "z"):
                row += [full.expectations[f"{which}{n}"][i].real,
                        eff.expectations[f"{which}{n}"][i].real]
        row.append(algebra.trace_distance(reduced[i], eff.states[i]))
        a_full = full.expectations["a"][i]
        row += [a_full.real, a_full.imag]
        if kappa_ok:
            minus = [full.expectations[f"minus{n}"][i] for n in range(N)]
            a_ad = adiabatic_cavity_amplitude(model, minus)
            row += [a_ad.real, a_ad.imag]
        else:
            row += [None, None]
        table.add(row)
    return table


def _check_hygiene(trajectories: dict):
    for name, traj in trajectories.items():
        if traj.min_eigenvalue < -1e-7:
            raise NumericalError(f"{name} trajectory lost positivity: "
                                 f"min eigenvalue {traj.min_eigenvalue:.2e}")


# -- gate --------------------------------------------------------------------

GATE_COLUMNS = ["regime", "duration_us", "fidelity_unitary", "fidelity_open", "ops_budget",
                "fidelity_full_framed", "fidelity_full_unframed", "status"]


def _gate_row(cfg: RunConfig, regime: str):
    model = cfg.model
    try:
        params = dispersive_params(model) if regime == "dispersive" else badcavity_params(model)
        report = gates.iswap_report(params, (0, 1))
    except (TlsjjError, ValueError) as exc:
        if isinstance(exc, NumericalError):
            raise
        return [regime, None, None, None, None, None, None, str(exc)]
    framed = unframed = None
    if regime == "dispersive":
        sched = gates.iswap_schedule(gates.drive_free(params), (0, 1), include_detuning=True)
        target = gates.iswap_target(sched)
        gate_model = model.replace(epsilon0=0.0)
        framed = gates.full_model_gate_fidelity(gate_model, report.duration, target, framed=True)
        unframed = gates.full_model_gate_fidelity(gate_model, report.duration, target, framed=False)
    return [regime, report.duration, report.fidelity_unitary, report.fidelity_open,
            report.ops_budget, framed, unframed, "ok"]


def cmd_gate(cfg: RunConfig, threads: int = 1) -> Table:
    """iSWAP report for the dispersive and bad-cavity parameters of one model.

    The drive is off during the gate.  Full-model fidelities (closed, vacuum
    block, with and without the dispersive frame change) are given for the
    dispersive regime only.  A regime whose parameters are undefined or need
    an echo gets a row with blank numbers and the reason in ``status``.
    """
    if cfg.model.n_tls != 2:
        raise ConfigError("gate needs exactly two TLS entries")
    rows = ordered_map(lambda r: _gate_row(cfg, r), ["dispersive", "bad_cavity"], threads)
    table = Table(GATE_COLUMNS)
    for row in rows:
        table.add(row)
    return table


# -- readout -----------------------------------------------------------------

READOUT_COLUMNS = ["label", "g_over_2pi_mhz", "w_x", "w_y", "offset", "measurement_phase_rad",
                   "chi_over_2pi_mhz", "pull_excited_over_2pi_mhz", "pull_ground_over_2pi_mhz",
                   "correlation_residual"]


def _correlation_residual(cfg: RunConfig):
    model = cfg.model
    if model.n_tls != 1 or not model.resonator.kappa > 0 or model.tls[0].g_n == 0:
        return None
    _require_truncation(model)
    params = badcavity_params(model)
    window = readout.TRANSIENT_KAPPA_TIMES / model.resonator.kappa
    times = _time_grid(cfg, lambda: max(3.0 / float(params.gamma1[0]), 2.0 * window))
    ket = np.zeros(model.resonator.fock_dim, dtype=complex)
    ket[0] = 1.0
    rho0 = algebra.PureState(np.kron(ket, _tls_ket(_initial_labels(cfg))), model.space_tag).density()
    check = readout.photon_correlation_check(model, rho0, times, cfg.simulation.method)
    _check_hygiene({"readout": check.trajectory})
    return check.relative_residual


def cmd_readout(cfg: RunConfig, threads: int = 1) -> Table:
    """Quadrature weights, measurement phases, dispersive pulls and, for one
    TLS, the relative residual of the photon / correlation identity."""
    model = cfg.model
    res = model.resonator
    weights = offset = None
    if res.kappa != 0 or res.delta_c != 0:
        signal = readout.quadrature_weights(model)
        weights, offset = signal.tls_weights, signal.offset
    residual = _correlation_residual(cfg)
    table = Table(READOUT_COLUMNS)
    for n, t in enumerate(model.tls):
        phase = None
        if t.g_n != 0 and weights is not None:
            phase = readout.measurement_phase(t.g_n, res.kappa, res.delta_c)
        chi = excited = ground = None
        if t.delta_n != res.delta_c and not (model.drive.epsilon0 != 0 and res.delta_c == 0):
            pull = readout.dispersive_readout_shift(model, n)
            chi, excited, ground = (rad_to_mhz(pull.chi), rad_to_mhz(pull.excited),
                                    rad_to_mhz(pull.ground))
        table.add([t.label, rad_to_mhz(t.g_n),
                   None if weights is None else weights[n, 0],
                   None if weights is None else weights[n, 1],
                   offset, phase, chi, excited, ground, residual])
    return table


# -- universality ------------------------------------------------------------

def cmd_universality(cfg: RunConfig, threads: int = 1) -> Table:
    """Lie-closure dimension of the (H1, H2) generator pair in each regime."""
    model = cfg.model
    N = model.n_tls
    if N > MAX_UNIVERSALITY_TLS:
        raise ConfigError(f"universality supports at most {MAX_UNIVERSALITY_TLS} TLS's, got {N}")

    def one(regime):
        try:
            params = dispersive_params(model) if regime == "dispersive" else badcavity_params(model)
        except (TlsjjError, ValueError) as exc:
            return [regime, N, None, 4**N - 1, None, None, None, str(exc)]
        result = gates.universality_closure(list(gates.effective_generators(params)))
        return [regime, N, result.dimension, 4**N - 1, result.generations, result.closed,
                result.dimension == 4**N - 1, "ok"]

    table = Table(["regime", "n_tls", "dimension", "target_dimension", "generations",
                   "closed", "universal", "status"])
    for row in ordered_map(one, ["dispersive", "bad_cavity"], threads):
        table.add(row)
    return table


COMMANDS = {
    "sweep-coupling": cmd_sweep_coupling,
    "compare": cmd_compare,
    "gate": cmd_gate,
    "readout": cmd_readout,
    "universality": cmd_universality,
}


# -- manifest ----------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _jsonable(float(x.real)), "im": _jsonable(float(x.imag))}
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def derived_parameters(cfg: RunConfig) -> dict:
    """Both regimes' effective parameters in rad/us, or the reason they are undefined."""
    out = {}
    try:
        p = dispersive_params(cfg.model)
        out["dispersive"] = {"delta_nc": p.delta_nc, "delta_bar": p.delta_bar,
                             "omega_x": p.omega_x, "induced_decay": p.induced_decay,
                             "lambda": p.lam}
    except TlsjjError as exc:
        out["dispersive"] = {"error": str(exc)}
    try:
        p = badcavity_params(cfg.model)
        out["bad_cavity"] = {"delta_bar": p.delta_bar, "omega": p.omega, "gamma1": p.gamma1,
                             "gamma2": p.gamma2, "lambda": p.lam}
    except TlsjjError as exc:
        out["bad_cavity"] = {"error": str(exc)}
    return out


def build_manifest(verb: str, cfg: RunConfig, wall_time: float, threads: int, seed) -> dict:
    validity = {}
    for regime in ("dispersive", "bad_cavity"):
        rep = validity_report(cfg.model, regime, cfg.thresholds)
        validity[regime] = {"ratios": rep.ratios, "thresholds": rep.thresholds,
                            "verdicts": rep.verdicts, "passed": rep.passed}
    m = cfg.model
    return {
        "verb": verb,
        "version": __version__,
        "config_echo": cfg.text,
        "units": "angular frequencies in rad/us, times in us",
        "model": {"delta_c": m.resonator.delta_c, "kappa": m.resonator.kappa,
                  "fock_dim": m.resonator.fock_dim, "epsilon0": m.drive.epsilon0,
                  "tls": [{"label": t.label, "delta_n": t.delta_n, "g_n": t.g_n} for t in m.tls]},
        "derived": _jsonable(derived_parameters(cfg)),
        "validity": _jsonable(validity),
        "kernel_backend": _kernels.BACKEND,
        "threads": threads,
        "seed": seed,
        "wall_time_s": wall_time,
    }


def run(verb: str, cfg: RunConfig, out_dir: Path, threads: int = 1, seed=None) -> Table:
    start = time.perf_counter()
    table = COMMANDS[verb](cfg, threads)
    wall = time.perf_counter() - start
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{verb}.csv").write_text(table.to_csv())
    manifest = build_manifest(verb, cfg, wall, threads, seed)
    (out_dir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n")
    return table


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tlsjj", description=__doc__.splitlines()[0])
    parser.add_argument("verb", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")
    parser.add_argument("--seed", type=int, default=None,
                        help="reserved; every path is deterministic")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        run(args.verb, cfg, Path(args.out), args.threads, args.seed)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except TlsjjError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
