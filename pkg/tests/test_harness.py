import json
import math

import numpy as np
import pytest

from mutualdep.harness import (
    FcRule,
    SweepConfig,
    SweepRecord,
    bench_complexity,
    imse,
    imse_table,
    imse_trapezoid,
    read_sweep_csv,
    run_sweep,
    write_summary_jsonl,
    write_sweep_csv,
)
from mutualdep.measures import MeasureKind
from mutualdep.models import Family, GenModel, Nonlinearity


def tiny_config(**kw):
    base = dict(families=(Family.NORMAL,), nonlinearities=(Nonlinearity.LINEAR,),
                rho_grid=(0.5,), n_grid=(60,), mc_runs=2, master_seed=77,
                measures=(MeasureKind.PEARSON,), threads=1)
    base.update(kw)
    return SweepConfig(**base)


class TestFcRule:
    def test_fixed(self):
        rule = FcRule.fixed(2.5)
        assert rule.fc_for(0.9) == 2.5
        assert str(rule) == "fixed:2.5"

    def test_rho_rule(self):
        rule = FcRule.rho_rule()
        assert rule.fc_for(0.6) == pytest.approx(1.5625)
        assert str(rule) == "rho"

    def test_fixed_validation(self):
        with pytest.raises(ValueError):
            FcRule.fixed(0.0)


class TestSweepConfig:
    def test_grid_validation(self):
        with pytest.raises(ValueError):
            tiny_config(rho_grid=(0.5, 0.3))
        with pytest.raises(ValueError):
            tiny_config(n_grid=(100, 100))
        with pytest.raises(ValueError):
            tiny_config(mc_runs=1)
        with pytest.raises(ValueError):
            tiny_config(rho_grid=(0.5, 1.0))

    def test_measures_validation(self):
        with pytest.raises(ValueError):
            tiny_config(measures=(MeasureKind.MUTUAL_INFORMATION,))
        with pytest.raises(ValueError):
            tiny_config(measures=())

    def test_stream_ids_unique(self):
        cfg = tiny_config(rho_grid=(0.2, 0.5), n_grid=(10, 20), mc_runs=3)
        ids = [cfg.stream_id(c, n, k)
               for c in range(len(cfg.cells())) for n in range(2) for k in range(3)]
        assert len(set(ids)) == len(ids)


class TestRunSweep:
    def test_record_cardinality(self):
        records = run_sweep(tiny_config())
        assert len(records) == 2  # 1 cell x 1 n x 2 runs x 1 measure
        assert all(r.measure == "pearson" for r in records)
        assert records[0].run_index == 0 and records[1].run_index == 1

    def test_deterministic_rerun(self):
        a = run_sweep(tiny_config())
        b = run_sweep(tiny_config())
        assert a == b

    def test_estimates_near_theory(self):
        cfg = tiny_config(rho_grid=(0.9,), n_grid=(10_000,), mc_runs=5)
        records = run_sweep(cfg)
        mean = np.mean([r.estimate for r in records])
        assert mean == pytest.approx(0.9, abs=0.01)
        assert records[0].theoretical == pytest.approx(0.9, abs=1e-6)

    def test_i_theoretical_attached(self):
        records = run_sweep(tiny_config())
        assert records[0].I_theoretical == pytest.approx(0.14384104, abs=1e-4)

    def test_failures_become_nan_rows(self):
        # n = 1 makes pearson undefined; the sweep must still complete
        cfg = tiny_config(n_grid=(1, 8))
        records = run_sweep(cfg)
        bad = [r for r in records if r.n == 1]
        good = [r for r in records if r.n == 8]
        assert all(math.isnan(r.estimate) and r.error for r in bad)
        assert all(not math.isnan(r.estimate) for r in good)

    def test_mdep_measure_runs(self):
        cfg = tiny_config(measures=(MeasureKind.MUTUAL_DEPENDENCE,), n_grid=(200,))
        records = run_sweep(cfg)
        assert all(0.0 <= r.estimate <= 1.0 for r in records)
        assert records[0].theoretical == pytest.approx(0.19716854, abs=1e-4)

    def test_runtime_column_empty_without_timing(self):
        records = run_sweep(tiny_config())
        assert all(r.runtime_ns is None for r in records)
        records = run_sweep(tiny_config(timing=True))
        assert all(r.runtime_ns is not None and r.runtime_ns > 0 for r in records)


class TestCsvRoundtrip:
    def test_roundtrip(self, tmp_path):
        records = run_sweep(tiny_config(n_grid=(1, 8)))
        path = tmp_path / "sweep.csv"
        write_sweep_csv(records, path)
        back = read_sweep_csv(path)
        assert len(back) == len(records)
        for r, b in zip(records, back):
            assert (r.family, r.nonlinearity, r.measure, r.n, r.run_index,
                    r.seed) == (b.family, b.nonlinearity, b.measure, b.n,
                                b.run_index, b.seed)
            if math.isnan(r.estimate):
                assert math.isnan(b.estimate) and b.error
            else:
                assert b.estimate == pytest.approx(r.estimate, rel=1e-8)

    def test_header_and_digits(self, tmp_path):
        records = run_sweep(tiny_config())
        path = tmp_path / "sweep.csv"
        write_sweep_csv(records, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ("family,nonlinearity,rho,I_theoretical,n,run_index,"
                            "seed,measure,estimate,theoretical,runtime_ns,error")
        est = lines[1].split(",")[8]
        assert len(est.replace("-", "").replace(".", "").replace("e", "")) <= 11

    def test_byte_identical_reruns(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_sweep_csv(run_sweep(tiny_config()), p1)
        write_sweep_csv(run_sweep(tiny_config()), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestSummary:
    def test_jsonl_structure(self, tmp_path):
        cfg = tiny_config(rho_grid=(0.3, 0.6), mc_runs=3)
        records = run_sweep(cfg)
        path = tmp_path / "summary.jsonl"
        write_summary_jsonl(records, path)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        kinds = {line["kind"] for line in lines}
        assert kinds == {"cell", "imse"}
        cell = next(l for l in lines if l["kind"] == "cell")
        assert {"mean", "std", "failures", "theoretical"} <= set(cell)


def synthetic_records(i_mse_pairs, runs=4, measure="mdep", n=100, spread=0.0):
    """Records whose per-point MSE is exactly the requested value."""
    records = []
    for i_val, mse in i_mse_pairs:
        err = math.sqrt(mse)
        for k in range(runs):
            est = 0.5 + (err if k % 2 == 0 else -err)
            records.append(SweepRecord(
                family="normal", nonlinearity="linear", rho=i_val,
                I_theoretical=i_val, n=n, run_index=k, seed=k,
                measure=measure, estimate=est, theoretical=0.5))
    return records


class TestImse:
    def test_exact_agreement_gives_zero(self):
        records = synthetic_records([(0.1, 0.0), (0.3, 0.0)])
        value, pts, excl = imse(records)
        assert value == 0.0 and pts == 2 and excl == 0

    def test_constant_error_rectangle(self):
        # constant squared error e^2 over an I range of width W -> e^2 * W
        e2 = 0.04 ** 2
        records = synthetic_records([(0.1, e2), (0.35, e2), (0.6, e2)])
        value, _, _ = imse(records)
        assert value == pytest.approx(e2 * 0.5, abs=1e-12)

    def test_hand_trapezoid_fixture(self):
        # I = {0.1, 0.2, 0.4}, MSE = {0.01, 0.04, 0.02}:
        # 0.5*(0.01+0.04)*0.1 + 0.5*(0.04+0.02)*0.2 = 0.0085
        value = imse_trapezoid([0.1, 0.2, 0.4], [0.01, 0.04, 0.02])
        assert value == pytest.approx(0.0085, abs=1e-12)
        records = synthetic_records([(0.1, 0.01), (0.2, 0.04), (0.4, 0.02)])
        assert imse(records)[0] == pytest.approx(0.0085, abs=1e-12)

    def test_nan_exclusion_counted(self):
        records = synthetic_records([(0.1, 0.01), (0.2, 0.01)])
        broken = records[0]
        records[0] = SweepRecord(**{**broken.__dict__, "estimate": math.nan,
                                    "error": "boom"})
        value, pts, excl = imse(records)
        assert excl == 1 and pts == 2 and value >= 0

    def test_all_nan_point_raises(self):
        records = synthetic_records([(0.1, 0.01), (0.2, 0.01)], runs=2)
        for i in (0, 1):
            records[i] = SweepRecord(**{**records[i].__dict__,
                                        "estimate": math.nan, "error": "x"})
        with pytest.raises(ValueError, match="failed"):
            imse(records)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            imse(synthetic_records([(0.1, 0.01)]))

    def test_mixed_groups_rejected(self):
        records = synthetic_records([(0.1, 0.01), (0.2, 0.01)])
        other = synthetic_records([(0.1, 0.01), (0.2, 0.01)], measure="pearson")
        with pytest.raises(ValueError, match="single"):
            imse(records + other)

    def test_table_covers_groups(self):
        records = (synthetic_records([(0.1, 0.01), (0.2, 0.01)])
                   + synthetic_records([(0.1, 0.02), (0.2, 0.02)], measure="pearson"))
        rows = imse_table(records)
        assert {(r.measure, r.n) for r in rows} == {("mdep", 100), ("pearson", 100)}

    def test_trapezoid_validation(self):
        with pytest.raises(ValueError):
            imse_trapezoid([0.2, 0.1], [0.0, 0.0])
        with pytest.raises(ValueError):
            imse_trapezoid([0.1, 0.2], [-0.01, 0.0])


class TestBench:
    def test_smoke_small_grid(self):
        model = GenModel(Family.NORMAL, Nonlinearity.LINEAR, 0.6)
        result = bench_complexity((128, 256, 512), model, FcRule.rho_rule(), reps=2)
        assert len(result.rows) == 9
        assert set(result.slopes) == {"pearson", "dcorr", "mdep"}
        assert all(r.median_ns > 0 for r in result.rows)

    def test_grid_span_validation(self):
        model = GenModel(Family.NORMAL, Nonlinearity.LINEAR, 0.6)
        with pytest.raises(ValueError):
            bench_complexity((128, 256), model, FcRule.rho_rule())

    def test_pearson_slope_linear_regime(self):
        # O(n) single pass; time it where the array work dominates the
        # per-call overhead
        from mutualdep.harness import _time_call
        from mutualdep.measures import pearson
        from mutualdep.models import sample_model
        from mutualdep.numerics import RandomStream
        model = GenModel(Family.NORMAL, Nonlinearity.LINEAR, 0.6)
        sizes = (65_536, 262_144, 1_048_576)
        meds = []
        for i, n in enumerate(sizes):
            s = sample_model(model, n, RandomStream(9, i))
            meds.append(_time_call(lambda s=s: pearson(s), reps=5))
        slope = np.polyfit(np.log(sizes), np.log(meds), 1)[0]
        assert 0.8 <= slope <= 1.3, meds
