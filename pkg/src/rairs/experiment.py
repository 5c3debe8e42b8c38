"""Monte Carlo sweeps over users, panel size and transmit power.

Every sweep point is solved for every scheme with the same list of
realization seeds, so per-seed differences between schemes are
realization-matched.  Rows are ordered by (value, scheme, seed) regardless
of how many workers executed them, and rerunning a sweep with the same spec
reproduces the table bit-exactly.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .channel import generate_realization  # noqa: F401  (re-export: sampling lives with the channel model)
from .optimizer import OptimizerConfig, Scheme, SolveReport, ao_solve
from .scenario import ConfigError, ScenarioConfig

PER_SEED_HEADER = "sweep_var,sweep_value,scheme,seed,sum_rate_bpshz,iterations,converged,wall_time_s"
AGGREGATE_HEADER = "sweep_var,sweep_value,scheme,mean_bpshz,stderr_bpshz,num_seeds"

#: Externally reported sum rates at a few operating points, kept for
#: orientation when reading sweep output.  Absolute levels depend on the
#: scatterer layout and seeds, which are not standardized, so these are
#: context only and never asserted.
REFERENCE_POINTS = {
    ("irs_elements", 144, "ra_irs"): 11.45,
    ("irs_elements", 144, "fixed_irs"): 9.19,
    ("irs_elements", "any", "ra_only"): 7.73,
    ("tx_power", 0, "ra_irs"): 3.86,
    ("tx_power", 30, "ra_irs"): 22.80,
}


class SweepVariable(str, Enum):
    USERS = "users"
    IRS_ELEMENTS = "irs_elements"
    TX_POWER = "tx_power"


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: which knob to vary, its values, schemes and seed count."""

    variable: SweepVariable
    values: tuple
    schemes: tuple[Scheme, ...]
    num_seeds: int
    base: ScenarioConfig

    def validate(self) -> "SweepSpec":
        if not self.values:
            raise ConfigError("values", "sweep needs at least one value")
        if not self.schemes:
            raise ConfigError("schemes", "sweep needs at least one scheme")
        if self.num_seeds < 1:
            raise ConfigError("num_seeds", "must be at least 1")
        if self.variable is SweepVariable.USERS:
            if any(int(v) != v or v < 1 for v in self.values):
                raise ConfigError("values", "user counts must be positive integers")
        elif self.variable is SweepVariable.IRS_ELEMENTS:
            for v in self.values:
                side = math.isqrt(int(v))
                if side * side != v or v < 1:
                    raise ConfigError(
                        "values",
                        f"panel size {v} is not a square grid product")
        return self

    def seeds(self) -> list[int]:
        return [self.base.seed + i for i in range(self.num_seeds)]

    @classmethod
    def from_dict(cls, data: dict, base: ScenarioConfig) -> "SweepSpec":
        known = {"variable", "values", "schemes", "num_seeds"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown sweep field")
        try:
            variable = SweepVariable(data["variable"])
        except (KeyError, ValueError) as exc:
            raise ConfigError("variable", f"expected one of "
                              f"{[v.value for v in SweepVariable]}") from exc
        try:
            schemes = tuple(Scheme(s) for s in data.get(
                "schemes", [s.value for s in Scheme]))
        except ValueError as exc:
            raise ConfigError("schemes", str(exc)) from exc
        spec = cls(variable=variable,
                   values=tuple(data.get("values", ())),
                   schemes=schemes,
                   num_seeds=int(data.get("num_seeds", 1)),
                   base=base)
        return spec.validate()


def apply_sweep_value(cfg: ScenarioConfig, variable: SweepVariable, value) -> ScenarioConfig:
    if variable is SweepVariable.USERS:
        return replace(cfg, num_users=int(value))
    if variable is SweepVariable.IRS_ELEMENTS:
        side = math.isqrt(int(value))
        return replace(cfg, irs_dims=(side, side))
    return replace(cfg, tx_power_dbm=float(value))


@dataclass(frozen=True)
class SweepRow:
    sweep_var: str
    sweep_value: float
    scheme: str
    seed: int
    sum_rate_bpshz: float
    iterations: int
    converged: bool
    wall_time_s: float
    failed: bool = False


def _row_key(row: SweepRow):
    return (row.sweep_value, row.scheme, row.seed)


def _solve_point(task) -> SweepRow:
    spec_variable, value, scheme, seed, cfg, opt = task
    cfg = replace(cfg, seed=seed)
    try:
        report: SolveReport = ao_solve(cfg, opt, scheme)
        return SweepRow(sweep_var=spec_variable.value, sweep_value=value,
                        scheme=scheme.value, seed=seed,
                        sum_rate_bpshz=report.sum_rate_bpshz,
                        iterations=report.iterations_used,
                        converged=report.converged,
                        wall_time_s=report.wall_time_s)
    except Exception:
        return SweepRow(sweep_var=spec_variable.value, sweep_value=value,
                        scheme=scheme.value, seed=seed,
                        sum_rate_bpshz=float("nan"), iterations=0,
                        converged=False, wall_time_s=0.0, failed=True)


def run_sweep(spec: SweepSpec, opt: OptimizerConfig | None = None,
              jobs: int | None = None) -> list[SweepRow]:
    """Solve every (value, scheme, seed) combination of the sweep.

    Individual solve failures become rows flagged ``failed`` with a NaN rate
    and the sweep continues.  ``jobs`` defaults to the available cores;
    results are identical for any worker count.
    """
    spec.validate()
    opt = opt or OptimizerConfig()
    tasks = []
    for value in spec.values:
        cfg = apply_sweep_value(spec.base, spec.variable, value)
        for scheme in spec.schemes:
            for seed in spec.seeds():
                tasks.append((spec.variable, value, scheme, seed, cfg, opt))

    jobs = jobs if jobs is not None else (os.cpu_count() or 1)
    if jobs <= 1 or len(tasks) <= 1:
        rows = [_solve_point(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_solve_point, tasks, chunksize=1))
    return sorted(rows, key=_row_key)


@dataclass(frozen=True)
class AggregateRow:
    sweep_var: str
    sweep_value: float
    scheme: str
    mean_bpshz: float
    stderr_bpshz: float
    num_seeds: int


def aggregate_rows(rows: list[SweepRow]) -> list[AggregateRow]:
    """Mean and standard error of the per-seed rates per (value, scheme)."""
    groups: dict[tuple, list[SweepRow]] = {}
    for row in rows:
        if row.failed:
            continue
        groups.setdefault((row.sweep_value, row.scheme), []).append(row)
    out = []
    for (value, scheme), members in sorted(groups.items()):
        rates = np.array([m.sum_rate_bpshz for m in members])
        stderr = float(rates.std(ddof=1) / math.sqrt(len(rates))) if len(rates) > 1 else 0.0
        out.append(AggregateRow(sweep_var=members[0].sweep_var, sweep_value=value,
                                scheme=scheme, mean_bpshz=float(rates.mean()),
                                stderr_bpshz=stderr, num_seeds=len(rates)))
    return out


@dataclass(frozen=True)
class GapPoint:
    sweep_value: float
    mean_a: float
    mean_b: float
    gap: float
    relative_gain_pct: float


@dataclass(frozen=True)
class GapReport:
    scheme_a: str
    scheme_b: str
    points: list[GapPoint]

    @property
    def gap_expands(self) -> bool:
        """True when the gap at the largest sweep value exceeds the gap at
        the smallest."""
        first = min(self.points, key=lambda p: p.sweep_value)
        last = max(self.points, key=lambda p: p.sweep_value)
        return last.gap > first.gap


def summarize_gaps(rows: list[SweepRow], scheme_a: Scheme = Scheme.RA_IRS,
                   scheme_b: Scheme = Scheme.FIXED_IRS) -> GapReport:
    """Mean gap and relative gain of ``scheme_a`` over ``scheme_b`` per point."""
    aggregates = aggregate_rows(rows)
    by_scheme: dict[str, dict[float, AggregateRow]] = {}
    for agg in aggregates:
        by_scheme.setdefault(agg.scheme, {})[agg.sweep_value] = agg
    for scheme in (scheme_a, scheme_b):
        if scheme.value not in by_scheme:
            raise ValueError(f"sweep results contain no rows for scheme {scheme.value}")
    table_a = by_scheme[scheme_a.value]
    table_b = by_scheme[scheme_b.value]
    shared = sorted(set(table_a) & set(table_b))
    if len(shared) < 1:
        raise ValueError("no shared sweep values between the two schemes")
    points = []
    for value in shared:
        mean_a = table_a[value].mean_bpshz
        mean_b = table_b[value].mean_bpshz
        gain = 100.0 * (mean_a / mean_b - 1.0) if mean_b > 0 else float("inf")
        points.append(GapPoint(sweep_value=value, mean_a=mean_a, mean_b=mean_b,
                               gap=mean_a - mean_b, relative_gain_pct=gain))
    return GapReport(scheme_a=scheme_a.value, scheme_b=scheme_b.value, points=points)


# ----------------------------------------------------------------------
# CSV emission
# ----------------------------------------------------------------------

def _format_value(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if float(value).is_integer() and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    return str(value)


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_rows_csv(path, rows: list[SweepRow], header_note: str | None = None,
                   stable: bool = False) -> None:
    """Per-seed results.  ``stable=True`` omits the note line and zeroes the
    wall-time column so identical sweeps produce byte-identical files."""
    lines = []
    if header_note and not stable:
        lines.append(f"# {header_note}")
    lines.append(PER_SEED_HEADER)
    for row in rows:
        wall = 0.0 if stable else row.wall_time_s
        lines.append(",".join([
            row.sweep_var, _format_value(row.sweep_value), row.scheme,
            str(row.seed), repr(float(row.sum_rate_bpshz)), str(row.iterations),
            _format_value(row.converged), repr(float(wall)),
        ]))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_aggregate_csv(path, aggregates: list[AggregateRow],
                        header_note: str | None = None, stable: bool = False) -> None:
    lines = []
    if header_note and not stable:
        lines.append(f"# {header_note}")
    lines.append(AGGREGATE_HEADER)
    for agg in aggregates:
        lines.append(",".join([
            agg.sweep_var, _format_value(agg.sweep_value), agg.scheme,
            repr(float(agg.mean_bpshz)), repr(float(agg.stderr_bpshz)),
            str(agg.num_seeds),
        ]))
    _atomic_write(path, "\n".join(lines) + "\n")
