"""Monte Carlo sweep harness: grid execution, IMSE, timing benchmarks, and
CSV/JSON-lines persistence.

A sweep is a pure function of its SweepConfig: every trial owns a
counter-based RandomStream derived from (master_seed, cell-and-run index),
records are assembled into a canonical sort order, and runtimes are left
out of the CSV unless explicitly requested -- so single-threaded and
multi-process executions produce byte-identical output.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .measures import (
    Flavor,
    MeasureKind,
    MeasureValue,
    UndefinedMeasureError,
    distance_correlation,
    mutual_dependence,
    pearson,
)
from .models import (
    Family,
    GenModel,
    Nonlinearity,
    sample_model,
    theoretical_dcorr_oracle,
    theoretical_mdep,
    theoretical_mi,
    theoretical_pearson,
)
from .numerics import NonConvergenceError, QuadratureError, RandomStream

SWEEP_CSV_HEADER = ("family,nonlinearity,rho,I_theoretical,n,run_index,seed,"
                    "measure,estimate,theoretical,runtime_ns,error")

_EMPIRICAL_MEASURES = (MeasureKind.PEARSON, MeasureKind.DISTANCE_CORRELATION,
                       MeasureKind.MUTUAL_DEPENDENCE)
# oracle streams use a displaced master seed so they never collide with trials
_ORACLE_SEED_XOR = 0x0DC0


@dataclass(frozen=True)
class FcRule:
    """Cut-off frequency policy: a fixed value, or fc = 1/(1 - rho^2)."""

    kind: str
    value: Optional[float] = None

    @classmethod
    def fixed(cls, value):
        if value <= 0:
            raise ValueError("fixed fc must be positive")
        return cls("fixed", float(value))

    @classmethod
    def rho_rule(cls):
        return cls("rho")

    def fc_for(self, rho):
        if self.kind == "fixed":
            return self.value
        return 1.0 / (1.0 - rho ** 2)

    def __str__(self):
        return "rho" if self.kind == "rho" else f"fixed:{self.value:.9g}"


_DEFAULT_RHO_GRID = tuple(round(0.1 * k, 10) for k in range(1, 10))
_DEFAULT_N_GRID = (100, 316, 1000, 3162, 10000)


@dataclass(frozen=True)
class SweepConfig:
    """Grid and execution policy for one Monte Carlo sweep."""

    families: tuple = (Family.BAND_LIMITED, Family.NORMAL)
    nonlinearities: tuple = (Nonlinearity.LINEAR, Nonlinearity.QUADRATIC,
                             Nonlinearity.CUBIC, Nonlinearity.SINE)
    rho_grid: tuple = _DEFAULT_RHO_GRID
    n_grid: tuple = _DEFAULT_N_GRID
    mc_runs: int = 50
    master_seed: int = 20260809
    fc_rule: FcRule = field(default_factory=FcRule.rho_rule)
    measures: tuple = _EMPIRICAL_MEASURES
    use_quick: bool = True
    timing: bool = False
    threads: Optional[int] = None
    mu: float = 0.0
    sigma: float = 1.0
    dcorr_oracle_n: int = 10000
    dcorr_oracle_reps: int = 10

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(Family(f) for f in self.families))
        object.__setattr__(self, "nonlinearities",
                           tuple(Nonlinearity(g) for g in self.nonlinearities))
        object.__setattr__(self, "measures", tuple(MeasureKind(m) for m in self.measures))
        if not self.families or not self.nonlinearities:
            raise ValueError("families and nonlinearities must be non-empty")
        if any(m not in _EMPIRICAL_MEASURES for m in self.measures) or not self.measures:
            raise ValueError("measures must be a non-empty subset of "
                             "{pearson, dcorr, mdep}")
        for name, grid in (("rho_grid", self.rho_grid), ("n_grid", self.n_grid)):
            if len(grid) < 1 or any(b <= a for a, b in zip(grid, grid[1:])):
                raise ValueError(f"{name} must be strictly increasing")
        if not all(0.0 <= r < 1.0 for r in self.rho_grid):
            raise ValueError("rho_grid values must lie in [0, 1)")
        if self.mc_runs < 2:
            raise ValueError("mc_runs must be >= 2")

    def cells(self):
        """Grid cells in canonical (enumeration) order."""
        return list(itertools.product(self.families, self.nonlinearities, self.rho_grid))

    def model_for(self, family, nonlinearity, rho):
        return GenModel(family=family, nonlinearity=nonlinearity, rho=rho,
                        mu=self.mu, sigma=self.sigma)

    def stream_id(self, cell_idx, n_idx, run_idx):
        return (cell_idx * len(self.n_grid) + n_idx) * self.mc_runs + run_idx


@dataclass(frozen=True)
class SweepRecord:
    """One Monte Carlo trial row (long format)."""

    family: str
    nonlinearity: str
    rho: float
    I_theoretical: float
    n: int
    run_index: int
    seed: int
    measure: str
    estimate: float
    theoretical: float
    runtime_ns: Optional[int] = None
    error: str = ""


def _sanitize(msg):
    return str(msg).replace(",", ";").replace("\n", " ").strip()


def _estimate_one(measure, sample, fc, use_quick, timing):
    """(estimate, runtime_ns, error) for one measure on one sample.

    Results pass through MeasureValue so range violations surface as error
    rows rather than silently entering the CSV.
    """
    t0 = time.perf_counter_ns() if timing else 0
    try:
        if measure is MeasureKind.PEARSON:
            value = pearson(sample)
        elif measure is MeasureKind.DISTANCE_CORRELATION:
            value = distance_correlation(sample)
        elif measure is MeasureKind.MUTUAL_DEPENDENCE:
            value = mutual_dependence(sample, fc, use_quick=use_quick)
        else:
            raise ValueError(f"{measure} is not an empirical estimator")
        runtime = time.perf_counter_ns() - t0 if timing else None
        tagged = MeasureValue(kind=measure, value=float(value), flavor=Flavor.EMPIRICAL,
                              n=sample.n, fc=fc if measure is MeasureKind.MUTUAL_DEPENDENCE
                              else None, runtime_ns=runtime)
    except (UndefinedMeasureError, NonConvergenceError, QuadratureError,
            FloatingPointError, ValueError) as exc:
        return math.nan, None, f"{type(exc).__name__}: {_sanitize(exc)}"
    return tagged.value, tagged.runtime_ns, ""


def _trial_task(args):
    """All runs for one (cell, n) grid point; returns plain tuples."""
    (cell_idx, n_idx, model, fc, n, master_seed, sids, measures,
     use_quick, timing) = args
    out = []
    for run_idx, sid in enumerate(sids):
        sample = sample_model(model, n, RandomStream(master_seed, sid))
        for m_idx, measure in enumerate(measures):
            est, rt, err = _estimate_one(measure, sample, fc, use_quick, timing)
            out.append((cell_idx, n_idx, run_idx, m_idx, sid, est, rt, err))
    return out


def _theory_task(args):
    """Theoretical values for one cell: (cell_idx, I, {measure: value})."""
    cell_idx, model, measures, oracle_n, oracle_reps, oracle_base = args
    i_value = theoretical_mi(model)
    theo = {}
    for measure in measures:
        if measure is MeasureKind.PEARSON:
            theo[measure] = theoretical_pearson(model)
        elif measure is MeasureKind.MUTUAL_DEPENDENCE:
            theo[measure] = theoretical_mdep(model)
        elif measure is MeasureKind.DISTANCE_CORRELATION:
            streams = [RandomStream(oracle_base, cell_idx * oracle_reps + k)
                       for k in range(oracle_reps)]
            theo[measure] = theoretical_dcorr_oracle(
                model, n_oracle=oracle_n, reps=oracle_reps, streams=streams).value
    return cell_idx, i_value, theo


def run_sweep(config):
    """Execute the full grid and return records in canonical sort order.

    Estimator failures become NaN rows with a populated error column; the
    sweep itself never aborts.  Output is a pure function of the config,
    independent of the worker count.
    """
    cells = config.cells()
    threads = config.threads or os.cpu_count() or 1

    theory_args = []
    oracle_base = config.master_seed ^ _ORACLE_SEED_XOR
    for cell_idx, (family, g, rho) in enumerate(cells):
        model = config.model_for(family, g, rho)
        theory_args.append((cell_idx, model, config.measures,
                            config.dcorr_oracle_n, config.dcorr_oracle_reps,
                            oracle_base))

    trial_args = []
    for cell_idx, (family, g, rho) in enumerate(cells):
        model = config.model_for(family, g, rho)
        fc = config.fc_rule.fc_for(rho)
        for n_idx, n in enumerate(config.n_grid):
            sids = [config.stream_id(cell_idx, n_idx, k) for k in range(config.mc_runs)]
            trial_args.append((cell_idx, n_idx, model, fc, n, config.master_seed,
                               sids, config.measures, config.use_quick, config.timing))

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            theory_results = list(pool.map(_theory_task, theory_args))
            trial_results = list(pool.map(_trial_task, trial_args, chunksize=1))
    else:
        theory_results = [_theory_task(a) for a in theory_args]
        trial_results = [_trial_task(a) for a in trial_args]

    i_by_cell = {}
    theo_by_cell = {}
    for cell_idx, i_value, theo in theory_results:
        i_by_cell[cell_idx] = i_value
        theo_by_cell[cell_idx] = theo

    rows = [row for chunk in trial_results for row in chunk]
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))

    records = []
    for cell_idx, n_idx, run_idx, m_idx, sid, est, rt, err in rows:
        family, g, rho = cells[cell_idx]
        measure = config.measures[m_idx]
        records.append(SweepRecord(
            family=family.value, nonlinearity=g.value, rho=rho,
            I_theoretical=i_by_cell[cell_idx], n=config.n_grid[n_idx],
            run_index=run_idx, seed=sid, measure=measure.value,
            estimate=est, theoretical=theo_by_cell[cell_idx][measure],
            runtime_ns=rt, error=err))
    return records


# ---------------------------------------------------------------------------
# CSV and summary persistence

def _fmt(x):
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def write_sweep_csv(records, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_CSV_HEADER.split(","))
        for r in records:
            writer.writerow([r.family, r.nonlinearity, _fmt(r.rho),
                             _fmt(r.I_theoretical), r.n, r.run_index, r.seed,
                             r.measure, _fmt(r.estimate), _fmt(r.theoretical),
                             _fmt(r.runtime_ns), r.error])


def read_sweep_csv(path):
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        for row in reader:
            records.append(SweepRecord(
                family=row["family"], nonlinearity=row["nonlinearity"],
                rho=float(row["rho"]), I_theoretical=float(row["I_theoretical"]),
                n=int(row["n"]), run_index=int(row["run_index"]),
                seed=int(row["seed"]), measure=row["measure"],
                estimate=float(row["estimate"]) if row["estimate"] else math.nan,
                theoretical=float(row["theoretical"]) if row["theoretical"] else math.nan,
                runtime_ns=int(row["runtime_ns"]) if row["runtime_ns"] else None,
                error=row.get("error", "")))
    return records


def write_summary_jsonl(records, path, config=None):
    """Per-cell means/stds/failure counts plus IMSE rows, one JSON per line.

    When a SweepConfig is given, the first line records the resolved run
    configuration (seed, fc rule, model defaults, RNG algorithm).
    """
    from .numerics import RNG_ALGORITHM

    lines = []
    if config is not None:
        lines.append({
            "kind": "config", "master_seed": config.master_seed,
            "fc_rule": str(config.fc_rule), "mu": config.mu, "sigma": config.sigma,
            "mc_runs": config.mc_runs, "use_quick": config.use_quick,
            "measures": [m.value for m in config.measures],
            "dcorr_oracle_n": config.dcorr_oracle_n,
            "dcorr_oracle_reps": config.dcorr_oracle_reps,
            "rng": RNG_ALGORITHM,
        })
    for key, group in _group_records(records, with_n=True, with_rho=True).items():
        family, g, rho, measure, n = key
        vals = np.array([r.estimate for r in group])
        ok = vals[~np.isnan(vals)]
        lines.append({
            "kind": "cell", "family": family, "nonlinearity": g, "rho": rho,
            "measure": measure, "n": n, "runs": len(group),
            "failures": int(np.isnan(vals).sum()),
            "mean": float(ok.mean()) if ok.size else None,
            "std": float(ok.std(ddof=1)) if ok.size > 1 else None,
            "I_theoretical": group[0].I_theoretical,
            "theoretical": group[0].theoretical,
        })
    for row in imse_table(records, strict=False):
        lines.append({"kind": "imse", "family": row.family,
                      "nonlinearity": row.nonlinearity, "measure": row.measure,
                      "n": row.n, "imse": row.imse, "grid_points": row.grid_points,
                      "excluded": row.excluded})
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")


def _group_records(records, with_n, with_rho):
    groups = {}
    for r in records:
        key = (r.family, r.nonlinearity) + ((r.rho,) if with_rho else ()) \
              + (r.measure,) + ((r.n,) if with_n else ())
        groups.setdefault(key, []).append(r)
    return groups


# ---------------------------------------------------------------------------
# IMSE

def imse_trapezoid(i_values, mse_values):
    """Trapezoid rule over the mutual-information axis."""
    i_values = np.asarray(i_values, float)
    mse_values = np.asarray(mse_values, float)
    if i_values.size < 2:
        raise ValueError("IMSE needs at least 2 distinct grid points")
    if np.any(np.diff(i_values) <= 0):
        raise ValueError("I grid must be strictly increasing")
    if np.any(mse_values < 0):
        raise ValueError("MSE values must be nonnegative")
    return float(np.trapezoid(mse_values, i_values))


@dataclass(frozen=True)
class ImseRow:
    family: str
    nonlinearity: str
    measure: str
    n: int
    imse: float
    grid_points: int
    excluded: int


def imse(records):
    """IMSE of one (family, nonlinearity, measure, n) group of records.

    MSE(I_j) = (1/m) sum_k (estimate_jk - theoretical_j)^2 at each grid
    point, integrated over I by the trapezoid rule.  NaN estimates are
    excluded (counted); a grid point with no usable runs is an error.
    """
    ident = {(r.family, r.nonlinearity, r.measure, r.n) for r in records}
    if len(ident) != 1:
        raise ValueError("records must belong to a single (family, nonlinearity, "
                         f"measure, n) group, got {sorted(ident)}")
    by_point = {}
    for r in records:
        by_point.setdefault((r.I_theoretical, r.theoretical), []).append(r.estimate)
    points = []
    excluded = 0
    for (i_val, theo), ests in sorted(by_point.items()):
        ests = np.asarray(ests)
        ok = ests[~np.isnan(ests)]
        excluded += int(np.isnan(ests).sum())
        if ok.size == 0:
            raise ValueError(f"all estimates failed at I = {i_val:.6g}")
        if len(ests) < 2:
            raise ValueError("IMSE needs >= 2 runs per grid point")
        points.append((i_val, float(np.mean((ok - theo) ** 2))))
    value = imse_trapezoid([p[0] for p in points], [p[1] for p in points])
    return value, len(points), excluded


def imse_table(records, strict=True):
    """IMSE rows for every (family, nonlinearity, measure, n) group.

    With strict=False, groups where IMSE is undefined (fewer than 2 grid
    points, or a fully failed point) are skipped instead of raising.
    """
    rows = []
    for key, group in sorted(_group_records(records, with_n=True, with_rho=False).items()):
        family, g, measure, n = key
        try:
            value, pts, excl = imse(group)
        except ValueError:
            if strict:
                raise
            continue
        rows.append(ImseRow(family=family, nonlinearity=g, measure=measure,
                            n=n, imse=value, grid_points=pts, excluded=excl))
    return rows


# ---------------------------------------------------------------------------
# complexity benchmark

@dataclass(frozen=True)
class BenchRow:
    measure: str
    n: int
    median_ns: int


@dataclass(frozen=True)
class BenchResult:
    rows: tuple
    slopes: dict

    def median_ns(self, measure, n):
        for row in self.rows:
            if row.measure == measure and row.n == n:
                return row.median_ns
        raise KeyError((measure, n))


_BENCH_MIN_TIME_NS = 10_000_000


def _time_call(fn, reps):
    # calibrate an inner loop so each timed repetition is >= ~10 ms
    t0 = time.perf_counter_ns()
    fn()
    once = max(time.perf_counter_ns() - t0, 1)
    number = max(1, int(_BENCH_MIN_TIME_NS // once))
    times = []
    for _ in range(reps):
        t0 = time.perf_counter_ns()
        for _ in range(number):
            fn()
        times.append((time.perf_counter_ns() - t0) / number)
    return int(np.median(times))


def bench_complexity(n_grid, model, fc_rule, reps=5, master_seed=0xBE7C):
    """Median wall-clock runtimes and fitted log-log slopes per measure.

    Times pearson, distance_correlation, and mutual_dependence (quick) on
    the same sample per n.  n_grid must span at least a 4x range so the
    slope fit is meaningful.
    """
    n_grid = sorted(int(n) for n in n_grid)
    if len(n_grid) < 2 or n_grid[-1] < 4 * n_grid[0]:
        raise ValueError("n_grid must span at least a 4x range")
    fc = fc_rule.fc_for(model.rho)
    rows = []
    for n_idx, n in enumerate(n_grid):
        sample = sample_model(model, n, RandomStream(master_seed, n_idx))
        timed = {
            MeasureKind.PEARSON: lambda s=sample: pearson(s),
            MeasureKind.DISTANCE_CORRELATION: lambda s=sample: distance_correlation(s),
            MeasureKind.MUTUAL_DEPENDENCE:
                lambda s=sample: mutual_dependence(s, fc, use_quick=True),
        }
        for kind, fn in timed.items():
            rows.append(BenchRow(measure=kind.value, n=n, median_ns=_time_call(fn, reps)))
    slopes = {}
    for kind in (MeasureKind.PEARSON, MeasureKind.DISTANCE_CORRELATION,
                 MeasureKind.MUTUAL_DEPENDENCE):
        pts = [(math.log(r.n), math.log(r.median_ns)) for r in rows if r.measure == kind.value]
        slope = np.polyfit([p[0] for p in pts], [p[1] for p in pts], 1)[0]
        slopes[kind.value] = float(slope)
    return BenchResult(rows=tuple(rows), slopes=slopes)
