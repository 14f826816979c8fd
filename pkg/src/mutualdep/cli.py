"""Command-line surface: gen, estimate, theory, sweep, imse, bench.

Exit codes: 0 success, 2 usage error, 3 numerical failure.  Every run logs
its resolved configuration (defaults included, plus the pinned RNG
algorithm identifier) to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import harness, measures, models
from .measures import Flavor, MeasureKind, MeasureValue, UndefinedMeasureError
from .models import Family, GenModel, Nonlinearity
from .numerics import NonConvergenceError, QuadratureError, RandomStream, RNG_ALGORITHM

_NUMERICAL_ERRORS = (UndefinedMeasureError, NonConvergenceError, QuadratureError,
                     FloatingPointError)


def _rho_arg(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"rho must be a number, got {text!r}")
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"rho must lie in the interval [0, 1), got {value}")
    return value


def _positive_float(text):
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _add_model_flags(p, require=True):
    p.add_argument("--family", choices=[f.value for f in Family], required=require)
    p.add_argument("--g", choices=[g.value for g in Nonlinearity], required=require)
    p.add_argument("--rho", type=_rho_arg, required=require)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=_positive_float, default=1.0)


def _build_parser():
    parser = argparse.ArgumentParser(prog="mutualdep",
                                     description="dependence measures from data "
                                                 "via band-limited ML density fits")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a generating model to CSV")
    _add_model_flags(p)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream-id", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("estimate", help="run estimators on a CSV or inline model")
    p.add_argument("--in", dest="infile")
    _add_model_flags(p, require=False)
    p.add_argument("--n", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--stream-id", type=int, default=0)
    p.add_argument("--measure", choices=["pearson", "dcorr", "mdep", "all"], default="all")
    p.add_argument("--fc", type=_positive_float)
    p.add_argument("--fc-rule", choices=["rho"])
    p.add_argument("--quick", action="store_true", default=True)
    p.add_argument("--no-quick", dest="quick", action="store_false")

    p = sub.add_parser("theory", help="theoretical measure value for a model")
    _add_model_flags(p)
    p.add_argument("--measure", choices=["mi", "pearson", "dcorr", "mdep"], required=True)
    p.add_argument("--oracle-n", type=_positive_int, default=100_000)
    p.add_argument("--oracle-reps", type=_positive_int, default=20)

    p = sub.add_parser("sweep", help="Monte Carlo sweep over the model grid")
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--families")
    p.add_argument("--nonlinearities", "--g", dest="nonlinearities")
    p.add_argument("--rho-grid")
    p.add_argument("--n-grid")
    p.add_argument("--runs", type=_positive_int)
    p.add_argument("--seed", type=int)
    p.add_argument("--fc", type=_positive_float)
    p.add_argument("--fc-rule", choices=["rho"])
    p.add_argument("--measures")
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=_positive_float)
    p.add_argument("--no-quick", action="store_true")
    p.add_argument("--timing", action="store_true")
    p.add_argument("--threads", type=_positive_int)
    p.add_argument("--oracle-n", type=_positive_int)
    p.add_argument("--oracle-reps", type=_positive_int)
    p.add_argument("--out", required=True)
    p.add_argument("--summary")

    p = sub.add_parser("imse", help="integrated MSE per measure from a sweep CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("bench", help="runtime scaling benchmark")
    _add_model_flags(p, require=False)
    p.add_argument("--n-grid", default="2048,4096,8192,16384")
    p.add_argument("--reps", type=_positive_int, default=5)
    p.add_argument("--seed", type=int, default=0xBE7C)
    p.add_argument("--out", required=True)

    return parser


def _log_config(args, extra=None):
    cfg = {k: v for k, v in vars(args).items() if k != "command" and v is not None}
    cfg.update(extra or {})
    cfg["rng"] = RNG_ALGORITHM
    print(f"# {args.command} config {json.dumps(cfg, sort_keys=True, default=str)}",
          file=sys.stderr)


def _model_from_args(args):
    missing = [k for k in ("family", "g", "rho") if getattr(args, k) is None]
    if missing:
        raise SystemExit(f"missing required model flags: {', '.join('--' + m for m in missing)}")
    return GenModel(family=Family(args.family), nonlinearity=Nonlinearity(args.g),
                    rho=args.rho, mu=args.mu, sigma=args.sigma)


def _cmd_gen(args):
    model = _model_from_args(args)
    sample = models.sample_model(model, args.n, RandomStream(args.seed, args.stream_id))
    meta = (f"# family={model.family.value} g={model.nonlinearity.value} "
            f"rho={model.rho:.9g} n={args.n} seed={args.seed} "
            f"stream_id={args.stream_id} mu={model.mu:.9g} sigma={model.sigma:.9g}")
    if model.family is Family.BAND_LIMITED:
        meta += f" Z={models.bandlimited_normalizer():.9g}"
    meta += f" rng={RNG_ALGORITHM}"
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(meta + "\n")
        fh.write("x,y\n")
        for x, y in zip(sample.xs, sample.ys):
            fh.write(f"{x:.9g},{y:.9g}\n")
    return 0


def _read_xy_csv(path):
    xs, ys = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise SystemExit(f"expected two columns in {path}, got {line!r}")
            try:
                x, y = float(parts[0]), float(parts[1])
            except ValueError:
                continue  # header row
            xs.append(x)
            ys.append(y)
    if not xs:
        raise SystemExit(f"no data rows in {path}")
    return models.SampleSet(np.array(xs), np.array(ys), seed=0)


def _cmd_estimate(args):
    if args.infile:
        sample = _read_xy_csv(args.infile)
    else:
        model = _model_from_args(args)
        if args.n is None or args.seed is None:
            raise SystemExit("inline mode needs --n and --seed")
        sample = models.sample_model(model, args.n, RandomStream(args.seed, args.stream_id))

    wanted = ["pearson", "dcorr", "mdep"] if args.measure == "all" else [args.measure]
    fc = args.fc
    if "mdep" in wanted and fc is None:
        if args.fc_rule == "rho" and args.rho is not None:
            fc = 1.0 / (1.0 - args.rho ** 2)
        else:
            raise SystemExit("mdep needs --fc, or --fc-rule rho together with --rho")

    for name in wanted:
        t0 = time.perf_counter_ns()
        if name == "pearson":
            value = measures.pearson(sample)
        elif name == "dcorr":
            value = measures.distance_correlation(sample)
        else:
            value = measures.mutual_dependence(sample, fc, use_quick=args.quick)
        mv = MeasureValue(kind=MeasureKind(name), value=float(value),
                          flavor=Flavor.EMPIRICAL, n=sample.n,
                          fc=fc if name == "mdep" else None,
                          runtime_ns=time.perf_counter_ns() - t0)
        fc_txt = f"{mv.fc:.9g}" if mv.fc is not None else ""
        print(f"{mv.kind.value},{mv.value:.9g},{mv.n},{fc_txt},{mv.runtime_ns}")
    return 0


def _cmd_theory(args):
    model = _model_from_args(args)
    if args.measure == "mi":
        print(f"{models.theoretical_mi(model):.9g}")
    elif args.measure == "pearson":
        print(f"{models.theoretical_pearson(model):.9g}")
    elif args.measure == "mdep":
        print(f"{models.theoretical_mdep(model):.9g}")
    else:
        oracle = models.theoretical_dcorr_oracle(model, n_oracle=args.oracle_n,
                                                 reps=args.oracle_reps)
        print(f"{oracle.value:.9g} (oracle se {oracle.std_error:.3g}, "
              f"reps {oracle.reps}, n {oracle.n_oracle})")
    return 0


def _parse_config_file(path):
    values = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SystemExit(f"bad config line (expected key=value): {line!r}")
            key, val = line.split("=", 1)
            values[key.strip()] = val.strip()
    return values


def _csv_list(text, conv):
    return tuple(conv(tok.strip()) for tok in text.split(",") if tok.strip())


def _sweep_config(args):
    raw = _parse_config_file(args.config) if args.config else {}

    def pick(flag, key, conv=None):
        v = getattr(args, flag, None)
        if v is None:
            v = raw.get(key)
            if v is not None and conv is not None:
                v = conv(v)
        return v

    kwargs = {}
    families = pick("families", "families")
    if families:
        kwargs["families"] = _csv_list(families, Family) if isinstance(families, str) else families
    gs = pick("nonlinearities", "nonlinearities")
    if gs:
        kwargs["nonlinearities"] = _csv_list(gs, Nonlinearity) if isinstance(gs, str) else gs
    rho_grid = pick("rho_grid", "rho_grid")
    if rho_grid:
        kwargs["rho_grid"] = _csv_list(rho_grid, float) if isinstance(rho_grid, str) else rho_grid
    n_grid = pick("n_grid", "n_grid")
    if n_grid:
        kwargs["n_grid"] = _csv_list(n_grid, int) if isinstance(n_grid, str) else n_grid
    ms = pick("measures", "measures")
    if ms:
        kwargs["measures"] = _csv_list(ms, MeasureKind) if isinstance(ms, str) else ms
    for flag, key, conv in (("runs", "mc_runs", int), ("seed", "master_seed", int),
                            ("mu", "mu", float), ("sigma", "sigma", float),
                            ("oracle_n", "dcorr_oracle_n", int),
                            ("oracle_reps", "dcorr_oracle_reps", int)):
        v = pick(flag, key, conv)
        if v is not None:
            kwargs[key] = v
    if args.fc is not None:
        kwargs["fc_rule"] = harness.FcRule.fixed(args.fc)
    elif args.fc_rule == "rho":
        kwargs["fc_rule"] = harness.FcRule.rho_rule()
    elif raw.get("fc"):
        kwargs["fc_rule"] = harness.FcRule.fixed(float(raw["fc"]))
    if args.no_quick or raw.get("quick", "").lower() in ("false", "0", "no"):
        kwargs["use_quick"] = False
    if args.timing or raw.get("timing", "").lower() in ("true", "1", "yes"):
        kwargs["timing"] = True
    if args.threads is not None:
        kwargs["threads"] = args.threads
    return harness.SweepConfig(**kwargs)


def _cmd_sweep(args):
    config = _sweep_config(args)
    _log_config(args, extra={"resolved": str(config)})
    records = harness.run_sweep(config)
    harness.write_sweep_csv(records, args.out)
    summary = args.summary or (args.out + ".summary.jsonl")
    harness.write_summary_jsonl(records, summary, config=config)
    print(f"wrote {len(records)} records to {args.out} (summary: {summary})")
    return 0


def _cmd_imse(args):
    records = harness.read_sweep_csv(args.infile)
    try:
        rows = harness.imse_table(records)
    except ValueError as exc:
        raise SystemExit(f"cannot compute IMSE from {args.infile}: {exc}")
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("family,nonlinearity,measure,n,imse,grid_points,excluded\n")
        for r in rows:
            fh.write(f"{r.family},{r.nonlinearity},{r.measure},{r.n},"
                     f"{r.imse:.9g},{r.grid_points},{r.excluded}\n")
    print(f"wrote {len(rows)} IMSE rows to {args.out}")
    return 0


def _cmd_bench(args):
    model = GenModel(family=Family(args.family or "normal"),
                     nonlinearity=Nonlinearity(args.g or "linear"),
                     rho=args.rho if args.rho is not None else 0.6,
                     mu=args.mu, sigma=args.sigma)
    n_grid = _csv_list(args.n_grid, int)
    result = harness.bench_complexity(n_grid, model, harness.FcRule.rho_rule(),
                                      reps=args.reps, master_seed=args.seed)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("measure,n,median_runtime_ns\n")
        for row in result.rows:
            fh.write(f"{row.measure},{row.n},{row.median_ns}\n")
        for measure, slope in result.slopes.items():
            fh.write(f"# slope {measure}={slope:.4f}\n")
    for measure, slope in result.slopes.items():
        print(f"slope {measure} = {slope:.3f}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "estimate": _cmd_estimate,
    "theory": _cmd_theory,
    "sweep": _cmd_sweep,
    "imse": _cmd_imse,
    "bench": _cmd_bench,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command != "sweep":
        _log_config(args)
    try:
        return _COMMANDS[args.command](args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 2
        raise


if __name__ == "__main__":
    sys.exit(main())
