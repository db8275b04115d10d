"""Command-line front end tying the simulation and inversion modules together.

Every subcommand reads a flat ``key = value`` config file (optional), applies
command-line overrides, validates against its known key set, and writes its
artifacts plus a ``resolved.cfg`` provenance file into a run directory.  All
frequencies in configs and summaries are ordinary Hz; conversion to angular
rates happens only at this boundary.

Exit codes: 0 success, 1 malformed config or input file, 2 physics-domain
error, 3 solver or convergence failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .core import CONSTANTS, Particle, particle_mass
from .errors import ConfigError, ConvergenceError, PhysicsError, SolverError
from .esr import (FieldOrientation, LineModel, extremal_field_estimate,
                  rotation_broadened_spectrum, sweep_amplitudes, synth_spectrum,
                  uniform_grid, zeeman_shifts)
from .rotation import (AngularState, AngularTrapParams, angular_stability,
                       integrate_angle, libration_frequency)
from .solver import compare_orientations, detect_peaks, solve_equidistant, solve_general
from .trap import (LaserConfig, TrapConfig, charge_to_mass_from_instability,
                   drive_curvature, equilibrium_displacement, find_stability_boundary,
                   floquet_stability, frequency_ramp_instability, integrate_motion,
                   mathieu_q, radiation_pressure_force, secular_frequency)

TWO_PI = 2.0 * math.pi

_REQUIRED = object()

_PARTICLE_KEYS = {
    "diameter_m": (9.6e-6, float),
    "density_kg_m3": (3510.0, float),
    "charge_e": (-5000.0, float),  # signed, in elementary charges
}

_TRAP_KEYS = {
    "v_ac_volts": (4000.0, float),
    "drive_frequency_hz": (5000.0, float),
    "z0_m": (50e-6, float),
    "eta": (0.2, float),
    "xi_v_m2": (2.0e6, float),
    "damping_per_s": (0.0, float),
}

_DETECT_KEYS = {
    "min_depth": (0.01, float),
    "min_separation_hz": (15e6, float),
}

KEYSPECS: dict[str, dict] = {
    "trap-sim": {
        **_PARTICLE_KEYS, **_TRAP_KEYS,
        "t_end_s": (0.02, float),
        "dt_s": (1e-6, float),
        "initial_x_m": (0.0, float),
        "initial_y_m": (0.0, float),
        "initial_z_m": (1e-6, float),
        "initial_vx_m_s": (0.0, float),
        "initial_vy_m_s": (0.0, float),
        "initial_vz_m_s": (0.0, float),
        "force_x_n": (0.0, float),
        "force_y_n": (0.0, float),
        "force_z_n": (0.0, float),
        "store_every": (1, int),
        "seed": (0, int),
    },
    "stability-scan": {
        "q_min": (0.0, float),
        "q_max": (1.5, float),
        "a": (0.0, float),
        "n_scan": (31, int),
        "tol": (1e-4, float),
        "seed": (0, int),
    },
    "ramp-infer": {
        **_PARTICLE_KEYS, **_TRAP_KEYS,
        "omega_start_hz": (4500.0, float),
        "omega_end_hz": (2000.0, float),
        "ramp_rate_hz_s": (0.0, float),       # 0 -> auto (0.2% of drive per secular period)
        "seed_displacement_m": (0.0, float),  # 0 -> auto (z0 / 2)
        "seed": (0, int),
    },
    "radiation": {
        **_PARTICLE_KEYS,
        "power_w": (1e-3, float),
        "reflection_coeff": (0.2, float),
        "half_aperture_rad": (0.8788, float),
        "omega_x_hz": (1000.0, float),
        "seed": (0, int),
    },
    "angular-sim": {
        "omega_alpha_hz": (50.0, float),
        "drive_frequency_hz": (5000.0, float),
        "alpha0_rad": (0.05, float),
        "alpha_dot0_rad_s": (0.0, float),
        "t_end_s": (0.4, float),
        "dt_s": (1e-6, float),
        "store_every": (5, int),
        "seed": (0, int),
    },
    "esr-forward": {
        "theta_deg": (63.434948822922, float),
        "phi_deg": (35.226937177152, float),
        "b_gauss": (83.06930964009, float),
        "hwhm_hz": (10e6, float),
        "contrast": (0.03, float),
        "grid_min_hz": (0.0, float),   # 0 -> auto from the dip span
        "grid_max_hz": (0.0, float),
        "grid_points": (40001, int),
        "seed": (0, int),
    },
    "esr-broadened": {
        "theta_deg": (45.0, float),
        "phi_deg": (54.735610317245, float),
        "b_gauss": (30.0, float),
        "rot_axis_x": (0.7071067811865476, float),
        "rot_axis_y": (-0.7071067811865476, float),
        "rot_axis_z": (0.0, float),
        "hwhm_hz": (10e6, float),
        "contrast": (0.03, float),
        "grid_min_hz": (0.0, float),
        "grid_max_hz": (0.0, float),
        "grid_points": (40001, int),
        "n_cells": (400, int),
        "threshold": (0.0, float),     # 0 -> auto (half the maximum dip depth)
        "seed": (0, int),
    },
    "esr-solve": {
        "input": (_REQUIRED, str),
        **_DETECT_KEYS,
        "spacing_tolerance": (0.05, float),
        "residual_threshold_hz": (30e6, float),
        "b_fixed_gauss": (0.0, float),  # 0 -> field is a free fit parameter
        "seed": (0, int),
    },
    "esr-compare": {
        "input_before": (_REQUIRED, str),
        "input_after": (_REQUIRED, str),
        "b_gauss": (_REQUIRED, float),
        **_DETECT_KEYS,
        "spacing_tolerance": (0.05, float),
        "seed": (0, int),
    },
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); keep 2 for physics errors
        raise ConfigError(message)


def _load_config_file(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    out: dict[str, str] = {}
    for line_no, line in enumerate(p.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{p}: line {line_no}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key in out:
            raise ConfigError(f"{p}: line {line_no}: duplicate key '{key}'")
        out[key] = value.strip()
    return out


def _resolve(subcommand: str, file_values: dict[str, str],
             flag_values: dict[str, str]) -> dict:
    keyspec = KEYSPECS[subcommand]
    for key in file_values:
        if key not in keyspec:
            raise ConfigError(f"unknown config key '{key}' for subcommand '{subcommand}'")
    merged: dict = {}
    for key, (default, typ) in keyspec.items():
        raw = flag_values.get(key)
        if raw is None:
            raw = file_values.get(key)
        if raw is None:
            if default is _REQUIRED:
                raise ConfigError(f"missing required key '{key}' for subcommand '{subcommand}'")
            merged[key] = default
            continue
        try:
            merged[key] = typ(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"key '{key}': cannot parse '{raw}' as {typ.__name__}") from None
    return merged


def _write_resolved(run_dir: Path, subcommand: str, cfg: dict) -> None:
    lines = [f"subcommand = {subcommand}"]
    for key in sorted(cfg):
        val = cfg[key]
        lines.append(f"{key} = {val:.17g}" if isinstance(val, float) else f"{key} = {val}")
    (run_dir / "resolved.cfg").write_text("\n".join(lines) + "\n")


def _particle(cfg: dict) -> Particle:
    charge = cfg["charge_e"] * CONSTANTS.elementary_charge
    return Particle.sphere(diameter=cfg["diameter_m"], density=cfg["density_kg_m3"],
                           total_charge=charge)


def _trap(cfg: dict) -> TrapConfig:
    return TrapConfig(v_ac=cfg["v_ac_volts"], drive_freq=TWO_PI * cfg["drive_frequency_hz"],
                      z0=cfg["z0_m"], eta=cfg["eta"], xi=cfg["xi_v_m2"],
                      damping_gamma=cfg["damping_per_s"])


def _field(cfg: dict) -> FieldOrientation:
    return FieldOrientation(b_gauss=cfg["b_gauss"], theta=math.radians(cfg["theta_deg"]),
                            phi=math.radians(cfg["phi_deg"]))


def _auto_grid(cfg: dict, lo: float, hi: float) -> np.ndarray:
    gmin = cfg["grid_min_hz"] if cfg["grid_min_hz"] > 0.0 else lo
    gmax = cfg["grid_max_hz"] if cfg["grid_max_hz"] > 0.0 else hi
    return uniform_grid(gmin, gmax, cfg["grid_points"])


def _run_trap_sim(cfg: dict, run_dir: Path) -> str:
    p = _particle(cfg)
    trap = _trap(cfg)
    force = (cfg["force_x_n"], cfg["force_y_n"], cfg["force_z_n"])
    traj = integrate_motion(
        trap, p, forces=[force], t_end=cfg["t_end_s"], dt=cfg["dt_s"],
        x0=(cfg["initial_x_m"], cfg["initial_y_m"], cfg["initial_z_m"]),
        v0=(cfg["initial_vx_m_s"], cfg["initial_vy_m_s"], cfg["initial_vz_m_s"]),
        store_every=cfg["store_every"])
    dataio.write_trajectory(run_dir / "trajectory.csv", traj)
    wz = secular_frequency(trap, p)
    return (f"trap-sim: q={mathieu_q(trap, p):.4f} secular_hz={wz / TWO_PI:.6g} "
            f"escaped={str(traj.escaped).lower()} samples={traj.t.size}")


def _run_stability_scan(cfg: dict, run_dir: Path) -> str:
    qs = np.linspace(cfg["q_min"], cfg["q_max"], cfg["n_scan"])
    lines = ["q,trace,stable"]
    for q in qs:
        res = floquet_stability(cfg["a"], float(q))
        lines.append(f"{q:.17g},{res.trace:.17g},{int(res.stable)}")
    (run_dir / "scan.csv").write_text("\n".join(lines) + "\n")
    boundary = find_stability_boundary(cfg["a"], cfg["q_min"], cfg["q_max"], cfg["tol"])
    (run_dir / "boundary.txt").write_text(f"q_boundary = {boundary:.17g}\n")
    return f"stability-scan: q_boundary={boundary:.5f} n_scan={cfg['n_scan']}"


def _run_ramp_infer(cfg: dict, run_dir: Path) -> str:
    p = _particle(cfg)
    trap = _trap(cfg)
    om_start = TWO_PI * cfg["omega_start_hz"]
    om_end = TWO_PI * cfg["omega_end_hz"]
    if cfg["ramp_rate_hz_s"] > 0.0:
        rate = TWO_PI * cfg["ramp_rate_hz_s"]
    else:
        trap_start = TrapConfig(v_ac=trap.v_ac, drive_freq=om_start, z0=trap.z0,
                                eta=trap.eta, xi=trap.xi, damping_gamma=trap.damping_gamma)
        t_sec = TWO_PI / secular_frequency(trap_start, p)
        rate = 0.002 * om_start / t_sec
    seed = cfg["seed_displacement_m"] if cfg["seed_displacement_m"] > 0.0 else None
    om_unstable = frequency_ramp_instability(trap, p, om_start, om_end, rate,
                                             seed_displacement=seed)
    qm_drive = charge_to_mass_from_instability(om_unstable, drive_curvature(trap))
    qm_xi = charge_to_mass_from_instability(om_unstable, trap.xi)
    true_qm = abs(p.total_charge) / particle_mass(p)
    lines = [
        f"omega_unstable_hz = {om_unstable / TWO_PI:.17g}",
        f"charge_to_mass_c_kg = {qm_drive:.17g}",
        f"charge_to_mass_xi_c_kg = {qm_xi:.17g}",
        f"configured_charge_to_mass_c_kg = {true_qm:.17g}",
    ]
    (run_dir / "ramp.txt").write_text("\n".join(lines) + "\n")
    return (f"ramp-infer: omega_unstable_hz={om_unstable / TWO_PI:.6g} "
            f"charge_to_mass_c_kg={qm_drive:.6g}")


def _run_radiation(cfg: dict, run_dir: Path) -> str:
    p = _particle(cfg)
    laser = LaserConfig(power=cfg["power_w"], reflection_coeff=cfg["reflection_coeff"],
                        half_aperture=cfg["half_aperture_rad"])
    force = radiation_pressure_force(laser)
    dx = equilibrium_displacement(force, p, TWO_PI * cfg["omega_x_hz"])
    (run_dir / "radiation.txt").write_text(
        f"force_n = {force:.17g}\ndisplacement_m = {dx:.17g}\n")
    return f"radiation: force_n={force:.6g} displacement_m={dx:.6g}"


def _run_angular_sim(cfg: dict, run_dir: Path) -> str:
    params = AngularTrapParams(omega_alpha=TWO_PI * cfg["omega_alpha_hz"],
                               drive_freq=TWO_PI * cfg["drive_frequency_hz"])
    traj = integrate_angle(params, AngularState(cfg["alpha0_rad"], cfg["alpha_dot0_rad_s"]),
                           t_end=cfg["t_end_s"], dt=cfg["dt_s"],
                           store_every=cfg["store_every"])
    dataio.write_angle_trajectory(run_dir / "angle.csv", traj)
    stability = angular_stability(params)
    try:
        lib_hz = libration_frequency(traj) / TWO_PI
        lib_text = f"{lib_hz:.6g}"
    except SolverError:
        lib_text = "nan"
    return (f"angular-sim: q_alpha={stability.q_alpha:.4f} "
            f"stable={str(stability.stable).lower()} libration_hz={lib_text} "
            f"escaped={str(traj.escaped).lower()}")


def _run_esr_forward(cfg: dict, run_dir: Path) -> str:
    field = _field(cfg)
    model = LineModel(hwhm=cfg["hwhm_hz"], contrast_per_line=cfg["contrast"])
    shifts = zeeman_shifts(field)
    dips = shifts.dip_frequencies_hz
    grid = _auto_grid(cfg, dips[0] - 8.0 * model.hwhm, dips[-1] + 8.0 * model.hwhm)
    spectrum = synth_spectrum(dips, model, grid)
    dataio.write_spectrum(run_dir / "spectrum.csv", spectrum)
    (run_dir / "dips.csv").write_text(
        "dip_frequency_hz\n" + "\n".join(f"{f:.17g}" for f in dips) + "\n")
    return (f"esr-forward: n_dips={dips.size} dip_min_hz={dips[0]:.6g} "
            f"dip_max_hz={dips[-1]:.6g} points={grid.size}")


def _run_esr_broadened(cfg: dict, run_dir: Path) -> str:
    field = _field(cfg)
    model = LineModel(hwhm=cfg["hwhm_hz"], contrast_per_line=cfg["contrast"])
    axis = np.array([cfg["rot_axis_x"], cfg["rot_axis_y"], cfg["rot_axis_z"]])
    norm = float(np.linalg.norm(axis))
    if norm == 0.0:
        raise ConfigError("rot_axis_x/y/z must not all be zero")
    axis = axis / norm
    centers, ranges = sweep_amplitudes(field, axis)
    d = CONSTANTS.zero_field_splitting_hz
    lo = float(np.min(np.concatenate([centers - ranges, -centers - ranges])))
    hi = float(np.max(np.concatenate([centers + ranges, -centers + ranges])))
    grid = _auto_grid(cfg, d + lo - 8.0 * model.hwhm, d + hi + 8.0 * model.hwhm)
    spectrum = rotation_broadened_spectrum(field, axis, model, grid, n_cells=cfg["n_cells"])
    dataio.write_spectrum(run_dir / "spectrum.csv", spectrum)
    depth_max = float(np.max(1.0 - spectrum.values))
    threshold = cfg["threshold"] if cfg["threshold"] > 0.0 else 0.5 * depth_max
    try:
        b_est = extremal_field_estimate(spectrum, threshold)
        b_text = f"{b_est:.6g}"
    except SolverError:
        b_text = "nan"
    return (f"esr-broadened: max_depth={depth_max:.4g} b_estimate_gauss={b_text} "
            f"points={grid.size}")


def _detected_peaks(cfg: dict, path: str):
    spectrum = dataio.ingest_spectrum(path)
    return detect_peaks(spectrum, min_depth=cfg["min_depth"],
                        min_separation=cfg["min_separation_hz"])


def _run_esr_solve(cfg: dict, run_dir: Path) -> str:
    peaks = _detected_peaks(cfg, cfg["input"])
    if cfg["b_fixed_gauss"] > 0.0:
        sol = solve_general(peaks, residual_threshold_hz=cfg["residual_threshold_hz"],
                            b_fixed=cfg["b_fixed_gauss"])
    else:
        sol = solve_equidistant(peaks, spacing_tolerance=cfg["spacing_tolerance"],
                                residual_threshold_hz=cfg["residual_threshold_hz"])
    dataio.write_solution(run_dir / "solution.txt", sol)
    return (f"esr-solve: theta_deg={math.degrees(sol.theta):.2f} "
            f"phi_deg={math.degrees(sol.phi):.2f} b_gauss={sol.b_gauss:.2f} "
            f"residual_hz={sol.residual_rms_hz:.4g} method={sol.method} "
            f"n_peaks={len(peaks)}")


def _run_esr_compare(cfg: dict, run_dir: Path) -> str:
    before = _detected_peaks(cfg, cfg["input_before"])
    after = _detected_peaks(cfg, cfg["input_after"])
    report = compare_orientations(before, after, b_fixed=cfg["b_gauss"],
                                  spacing_tolerance=cfg["spacing_tolerance"])
    dataio.write_rotation_report(run_dir / "report.txt", report)
    return (f"esr-compare: theta_before_deg={math.degrees(report.before.theta):.2f} "
            f"phi_before_deg={math.degrees(report.before.phi):.2f} "
            f"theta_after_deg={math.degrees(report.after.theta):.2f} "
            f"phi_after_deg={math.degrees(report.after.phi):.2f} "
            f"merged_central_pair={str(report.merged_central_pair).lower()} "
            f"extremal_match={str(report.extremal_match).lower()}")


_RUNNERS = {
    "trap-sim": _run_trap_sim,
    "stability-scan": _run_stability_scan,
    "ramp-infer": _run_ramp_infer,
    "radiation": _run_radiation,
    "angular-sim": _run_angular_sim,
    "esr-forward": _run_esr_forward,
    "esr-broadened": _run_esr_broadened,
    "esr-solve": _run_esr_solve,
    "esr-compare": _run_esr_compare,
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="levitaq",
                     description="Needle-trap levitation and spin-resonance toolkit")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, keyspec in KEYSPECS.items():
        sp = sub.add_parser(name, description=f"run the {name} pipeline")
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--out", help="run-directory root (default $LEVITAQ_OUT_DIR or ./runs)")
        sp.add_argument("--name", help="run-directory name (default: subcommand)")
        for key in keyspec:
            sp.add_argument("--" + key.replace("_", "-"), dest=key, metavar="V")
    return parser


def run(argv=None) -> int:
    """Entry point returning the process exit code."""
    try:
        args = _build_parser().parse_args(argv)
        sub = args.subcommand
        file_values = _load_config_file(args.config) if args.config else {}
        flag_values = {k: getattr(args, k) for k in KEYSPECS[sub]
                       if getattr(args, k, None) is not None}
        cfg = _resolve(sub, file_values, flag_values)

        root = args.out or os.environ.get("LEVITAQ_OUT_DIR") or "runs"
        run_dir = Path(root) / (args.name or sub)
        run_dir.mkdir(parents=True, exist_ok=True)
        _write_resolved(run_dir, sub, cfg)

        summary = _RUNNERS[sub](cfg, run_dir)
        print(f"{summary} out={run_dir}")
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PhysicsError as exc:
        print(f"physics error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, ConvergenceError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
