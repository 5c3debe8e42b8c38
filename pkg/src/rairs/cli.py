"""Command-line front end: single solves, sweeps, gradient self-checks and
geometry validation.

Exit codes: 0 success, 2 configuration error, 3 solver invariant violation,
4 gradient-check failure.  All subcommands are deterministic given the
config and seed; ``--no-header`` additionally zeroes wall-clock fields so
output files are byte-stable for golden-file comparison.
"""

from __future__ import annotations

import math
import os
import sys
from dataclasses import replace
from datetime import datetime, timezone

import click
import numpy as np
import yaml

from . import __version__
from .channel import dump_channels_csv, generate_realization
from .experiment import (SweepSpec, aggregate_rows, run_sweep, summarize_gaps,
                         write_aggregate_csv, write_rows_csv)
from .geometry import RotationState, validate_field_regions
from .optimizer import (OptimizerConfig, Scheme, ao_solve, gradient_check,
                        initial_rotation, UplinkProblem)
from .scenario import ConfigError, ScenarioConfig

EXIT_CONFIG = 2
EXIT_INVARIANT = 3
EXIT_GRADIENT = 4

OUTPUT_DIR_ENV = "RAIRS_OUTPUT_DIR"

_SCHEME_CHOICES = {
    "ra-irs": Scheme.RA_IRS,
    "fixed-irs": Scheme.FIXED_IRS,
    "ra-only": Scheme.RA_ONLY,
}


def _fail_config(message: str):
    click.echo(f"config error: {message}", err=True)
    sys.exit(EXIT_CONFIG)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        _fail_config(f"cannot read {path}")
    except yaml.YAMLError as exc:
        _fail_config(f"malformed YAML in {path}: {exc}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        _fail_config(f"{path} must contain a mapping at the top level")
    return data


def _parse_configs(raw: dict, seed_override: int | None):
    known = {"scenario", "optimizer", "sweep"}
    unknown = set(raw) - known
    if unknown:
        _fail_config(f"unknown top-level section {sorted(unknown)[0]!r}")
    try:
        scenario = ScenarioConfig.from_dict(raw.get("scenario", {}))
        optimizer = OptimizerConfig.from_dict(raw.get("optimizer", {}))
    except ConfigError as exc:
        _fail_config(str(exc))
    if seed_override is not None:
        scenario = replace(scenario, seed=seed_override)
    return scenario, optimizer, raw.get("sweep")


def _output_dir(option_value: str | None) -> str:
    out = option_value or os.environ.get(OUTPUT_DIR_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _timestamp_note() -> str:
    return f"rairs {__version__} generated {datetime.now(timezone.utc).isoformat()}"


def _banner(cfg: ScenarioConfig, verbosity: int) -> None:
    if verbosity < 1:
        return
    geom = generate_realization(cfg)
    report = validate_field_regions(geom, cfg)
    regime = "near-field" if report.bs_in_near_field else "far-field"
    click.echo(f"carrier {cfg.carrier_hz / 1e9:.3f} GHz, wavelength {report.wavelength_m * 1e3:.4f} mm")
    click.echo(f"BS {cfg.bs_dims[0]}x{cfg.bs_dims[1]} antennas at pitch {cfg.bs_pitch_m * 1e3:.4f} mm, "
               f"panel {cfg.irs_dims[0]}x{cfg.irs_dims[1]} elements at pitch {cfg.irs_pitch_m * 1e3:.4f} mm")
    click.echo(f"panel aperture diagonal {report.aperture_diagonal_m:.4f} m, "
               f"far-field boundary {report.fraunhofer_m:.3f} m")
    click.echo(f"BS-panel distance {report.bs_distance_m:.4f} m ({regime}); "
               f"{int(np.sum(report.users_in_far_field))}/{cfg.num_users} users far-field")
    click.echo(f"tx power {cfg.tx_power_dbm} dBm/user, noise {cfg.noise_dbm} dBm, "
               f"direct attenuation {cfg.direct_attenuation_db} dB, "
               f"max tilt {cfg.theta_max_deg} deg, seed {cfg.seed}")
    for warning in report.warnings:
        click.echo(f"warning: {warning}")


def _verbosity(verbose: int, quiet: bool) -> int:
    return 0 if quiet else 1 + verbose


@click.group()
@click.version_option(version=__version__)
def main():
    """Uplink sum-rate simulator for a steerable-antenna array with a
    reflecting panel."""


@main.command()
@click.option("--config", "config_path", default=None, help="YAML config file.")
@click.option("--scheme", type=click.Choice(sorted(_SCHEME_CHOICES)), default="ra-irs")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--output-dir", default=None,
              help=f"Output directory (default: ${OUTPUT_DIR_ENV} or '.').")
@click.option("--no-header", is_flag=True,
              help="Byte-stable outputs: no timestamp line, zeroed wall times.")
@click.option("-v", "--verbose", count=True)
@click.option("-q", "--quiet", is_flag=True)
def solve(config_path, scheme, seed, output_dir, no_header, verbose, quiet):
    """Run one alternating-optimization solve and write its report."""
    scenario, optimizer, _ = _parse_configs(_load_config(config_path), seed)
    verbosity = _verbosity(verbose, quiet)
    _banner(scenario, verbosity)

    report = ao_solve(scenario, optimizer, _SCHEME_CHOICES[scheme])
    if not report.trajectory_is_monotone():
        click.echo("invariant violation: sum-rate trajectory decreased", err=True)
        sys.exit(EXIT_INVARIANT)
    if report.phase_modulus_error > 1e-12:
        click.echo("invariant violation: phase vector left the unit circle", err=True)
        sys.exit(EXIT_INVARIANT)

    out = _output_dir(output_dir)
    lines = [] if no_header else [f"# {_timestamp_note()}"]
    lines += report.summary_lines(include_timing=not no_header)
    summary_path = os.path.join(out, "solve_summary.txt")
    with open(summary_path + ".tmp", "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(summary_path + ".tmp", summary_path)

    traj_path = os.path.join(out, "solve_trajectory.csv")
    traj_lines = [] if no_header else [f"# {_timestamp_note()}"]
    traj_lines.append("iteration,sum_rate_bpshz")
    traj_lines += [f"{i + 1},{rate!r}" for i, rate in enumerate(report.sum_rate_trajectory)]
    with open(traj_path + ".tmp", "w") as fh:
        fh.write("\n".join(traj_lines) + "\n")
    os.replace(traj_path + ".tmp", traj_path)

    click.echo(f"sum rate: {report.sum_rate_bpshz:.6f} bps/Hz "
               f"({report.iterations_used} iterations, "
               f"converged={str(report.converged).lower()})")
    if verbosity >= 1:
        click.echo(f"wrote {summary_path} and {traj_path}")


@main.command()
@click.option("--config", "config_path", required=True, help="YAML config with a sweep section.")
@click.option("--seed", type=int, default=None, help="Override the base scenario seed.")
@click.option("--jobs", type=int, default=None, help="Parallel workers (default: all cores).")
@click.option("--output-dir", default=None)
@click.option("--no-header", is_flag=True,
              help="Byte-stable outputs: no timestamp line, zeroed wall times.")
@click.option("-v", "--verbose", count=True)
@click.option("-q", "--quiet", is_flag=True)
def sweep(config_path, seed, jobs, output_dir, no_header, verbose, quiet):
    """Run a Monte Carlo sweep and write per-seed plus aggregate CSVs."""
    raw = _load_config(config_path)
    scenario, optimizer, sweep_raw = _parse_configs(raw, seed)
    if sweep_raw is None:
        _fail_config("sweep: missing sweep section")
    try:
        spec = SweepSpec.from_dict(sweep_raw, scenario)
    except ConfigError as exc:
        _fail_config(str(exc))
    verbosity = _verbosity(verbose, quiet)
    _banner(scenario, verbosity)
    if verbosity >= 1:
        click.echo(f"sweep {spec.variable.value} over {list(spec.values)}, "
                   f"schemes {[s.value for s in spec.schemes]}, "
                   f"{spec.num_seeds} seeds")

    rows = run_sweep(spec, optimizer, jobs=jobs)
    failures = sum(row.failed for row in rows)
    out = _output_dir(output_dir)
    note = _timestamp_note()
    rows_path = os.path.join(out, "sweep_results.csv")
    agg_path = os.path.join(out, "sweep_aggregate.csv")
    write_rows_csv(rows_path, rows, header_note=note, stable=no_header)
    write_aggregate_csv(agg_path, aggregate_rows(rows), header_note=note, stable=no_header)
    click.echo(f"{len(rows)} solves ({failures} failed); wrote {rows_path} and {agg_path}")

    if verbosity >= 1:
        schemes = {row.scheme for row in rows}
        if Scheme.RA_IRS.value in schemes and Scheme.FIXED_IRS.value in schemes:
            gaps = summarize_gaps(rows)
            for point in gaps.points:
                click.echo(f"  {spec.variable.value}={point.sweep_value:g}: "
                           f"{gaps.scheme_a} {point.mean_a:.3f} vs "
                           f"{gaps.scheme_b} {point.mean_b:.3f} bps/Hz "
                           f"(gap {point.gap:.3f}, +{point.relative_gain_pct:.1f}%)")
            click.echo(f"  gap expands with {spec.variable.value}: "
                       f"{str(gaps.gap_expands).lower()}")


@main.command("check-grad")
@click.option("--config", "config_path", default=None)
@click.option("--states", type=int, default=100, show_default=True,
              help="Number of random interior states to test.")
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--corrupt-gradient", type=float, default=0.0, hidden=True,
              help="Inject a relative error into the analytic gradients (test hook).")
@click.option("-v", "--verbose", count=True)
@click.option("-q", "--quiet", is_flag=True)
def check_grad(config_path, states, seed, corrupt_gradient, verbose, quiet):
    """Validate analytic gradients against central finite differences."""
    scenario, _, _ = _parse_configs(_load_config(config_path), seed)
    _banner(scenario, _verbosity(verbose, quiet))
    result = gradient_check(scenario, num_states=states, corruption=corrupt_gradient)
    click.echo(f"rotation gradient: worst relative error {result.rotation_worst:.3e} "
               f"(tolerance {result.rotation_tol:.0e}, state {result.worst_rotation_state})")
    click.echo(f"phase gradient:    worst relative error {result.phase_worst:.3e} "
               f"(tolerance {result.phase_tol:.0e}, state {result.worst_phase_state})")
    click.echo(f"{result.num_states} states in {result.elapsed_s:.2f} s")
    if not result.passed:
        offender = (result.worst_rotation_state
                    if result.rotation_worst >= result.rotation_tol
                    else result.worst_phase_state)
        click.echo(f"gradient check FAILED at state {offender} "
                   f"(scenario seed {scenario.seed})", err=True)
        sys.exit(EXIT_GRADIENT)
    click.echo("gradient check passed")


@main.command("validate-geometry")
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
def validate_geometry(config_path, seed):
    """Report near/far-field classification of all nodes."""
    scenario, _, _ = _parse_configs(_load_config(config_path), seed)
    geom = generate_realization(scenario)
    report = validate_field_regions(geom, scenario)
    click.echo(f"wavelength: {report.wavelength_m * 1e3:.4f} mm")
    click.echo(f"panel aperture diagonal: {report.aperture_diagonal_m:.4f} m")
    click.echo(f"far-field boundary: {report.fraunhofer_m:.4f} m")
    click.echo(f"BS distance: {report.bs_distance_m:.4f} m "
               f"(near-field: {str(report.bs_in_near_field).lower()})")
    for k, (dist, far) in enumerate(zip(report.user_distances_m,
                                        report.users_in_far_field)):
        click.echo(f"user {k}: {dist:.4f} m (far-field: {str(bool(far)).lower()})")
    for warning in report.warnings:
        click.echo(f"warning: {warning}")
    click.echo("geometry as expected" if report.all_expected
               else f"{len(report.warnings)} field-region warning(s)")


@main.command("dump-channels")
@click.option("--config", "config_path", default=None)
@click.option("--seed", type=int, default=None)
@click.option("--rotation", type=click.Choice(["zero", "panel"]), default="zero",
              show_default=True,
              help="Antenna state: default boresight or aimed at the panel.")
@click.option("--output", default=None, help="CSV path (default: channels.csv).")
def dump_channels(config_path, seed, rotation, output):
    """Write every channel matrix entry to CSV for external comparison."""
    scenario, _, _ = _parse_configs(_load_config(config_path), seed)
    geom = generate_realization(scenario)
    problem = UplinkProblem(scenario, geom)
    if rotation == "zero":
        rot = RotationState.zeros(scenario.num_bs_antennas)
    else:
        rot = initial_rotation(problem, Scheme.RA_IRS)
    channels = problem.workspace.channel_set(rot)
    path = output or os.path.join(_output_dir(None), "channels.csv")
    dump_channels_csv(channels, path)
    click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
