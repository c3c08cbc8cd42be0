import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from landsynth.preprocess import (
    PipelineError,
    TransformPipeline,
    add_missing_indicators,
    fit_apply_pipeline,
    impute_knn,
    impute_median,
    transform_log,
    transform_rank_quantile,
    transform_zscore,
    winsorize,
)
from landsynth.schema import CATEGORICAL, NUMERIC, DataError, FeatureSchema, FeatureSpec, Inventory


def table(**cols):
    schema = FeatureSchema(tuple(FeatureSpec(n, NUMERIC, allow_missing=True) for n in cols))
    return Inventory.from_rows(schema, list(zip(*cols.values())))


def col(inv, name):
    return [None if math.isnan(v) else float(v) for v in inv.column(name)]


class TestMissingIndicators:
    def test_no_missing_is_identity(self):
        inv = table(a=[1.0, 2.0])
        assert add_missing_indicators(inv) is inv

    def test_indicator_values(self):
        inv = table(slope=[1.0, 2.0, None, 4.0])
        out = add_missing_indicators(inv)
        assert out.schema.names == ["slope", "slope__missing"]
        assert out.schema["slope__missing"].categories == ("present", "absent")
        assert [r[1] for r in out.rows()] == ["present", "present", "absent", "present"]
        assert col(out, "slope") == col(inv, "slope")

    def test_order_follows_columns(self):
        out = add_missing_indicators(table(b=[None, 1.0], x=[1.0, 2.0], a=[1.0, None]))
        assert out.schema.names[3:] == ["b__missing", "a__missing"]

    def test_collision(self):
        schema = FeatureSchema((
            FeatureSpec("a", allow_missing=True),
            FeatureSpec("a__missing", CATEGORICAL, categories=("x",)),
        ))
        with pytest.raises(DataError, match="collides"):
            add_missing_indicators(Inventory.from_rows(schema, [(None, "x")]))


class TestImputeMedian:
    def test_odd(self):
        out, med = impute_median(table(c=[1.0, 2.0, None, 4.0]), "c")
        assert med == 2.0 and col(out, "c") == [1.0, 2.0, 2.0, 4.0]

    def test_even_central_pair(self):
        _, med = impute_median(table(c=[1.0, None, 3.0]), "c")
        assert med == 2.0

    def test_no_missing(self):
        inv = table(c=[5.0, 1.0, 3.0])
        out, med = impute_median(inv, "c")
        assert out == inv and med == 3.0

    def test_errors(self):
        with pytest.raises(DataError):
            impute_median(table(c=[None, None]), "c")
        schema = FeatureSchema((FeatureSpec("s", CATEGORICAL, categories=("a",)),))
        with pytest.raises(DataError):
            impute_median(Inventory.from_rows(schema, [("a",)]), "s")


class TestImputeKnn:
    def test_k1_copies_neighbour(self):
        inv = table(x=[0.0, 10.0, 0.5, 9.0], y=[7.0, 100.0, None, 50.0])
        assert col(impute_knn(inv, "y", 1), "y")[2] == 7.0

    def test_k2_mean(self):
        inv = table(x=[0.0, 1.0, 0.5, 50.0], y=[2.0, 4.0, None, 99.0])
        assert col(impute_knn(inv, "y", 2), "y")[2] == 3.0

    def test_against_exhaustive_enumeration(self):
        x = [0.0, 3.0, 1.0]
        z = [5.0, -1.0, 2.0]
        y = [10.0, 20.0, None]
        inv = table(x=x, z=z, y=y)
        # oracle: z-score x and z with sample SD, rank the two candidates by distance
        def zs(v):
            m, s = statistics.mean(v), statistics.stdev(v)
            return [(a - m) / (s + 1e-8) for a in v]
        zx, zz = zs(x), zs(z)
        dist = {j: math.hypot(zx[j] - zx[2], zz[j] - zz[2]) for j in (0, 1)}
        nearest = min(dist, key=lambda j: (dist[j], j))
        assert col(impute_knn(inv, "y", 1), "y")[2] == y[nearest]
        assert col(impute_knn(inv, "y", 2), "y")[2] == 15.0

    def test_tie_prefers_lower_index(self):
        inv = table(x=[-1.0, 1.0, 0.0], y=[3.0, 8.0, None])
        assert col(impute_knn(inv, "y", 1), "y")[2] == 3.0

    def test_errors(self):
        with pytest.raises(DataError, match="candidate"):
            impute_knn(table(x=[0.0, 1.0, 2.0], y=[1.0, None, None]), "y", 2)
        with pytest.raises(DataError, match="distance"):
            impute_knn(table(x=[0.0, None, 2.0], y=[1.0, None, 3.0]), "y", 1)


class TestWinsorize:
    def test_clamp(self):
        inv = table(c=[0.0, 5.0, 100.0])
        from landsynth.preprocess import _apply_clip
        assert col(_apply_clip(inv, "c", 1.0, 10.0), "c") == [1.0, 5.0, 10.0]

    def test_full_range_no_change(self):
        inv = table(c=[3.0, -2.0, 8.0, None])
        out, lim = winsorize(inv, "c", 0.0, 1.0)
        assert out == inv and lim == (-2.0, 8.0)

    def test_limits_match_interpolation_oracle(self):
        vals = [float(v) for v in range(1, 11)]

        def q(p):
            h = (len(vals) - 1) * p
            lo = math.floor(h)
            return vals[lo] + (h - lo) * (vals[min(lo + 1, len(vals) - 1)] - vals[lo])

        out, (lo, hi) = winsorize(table(c=vals), "c", 0.1, 0.9)
        assert lo == pytest.approx(q(0.1), abs=1e-12) and hi == pytest.approx(q(0.9), abs=1e-12)
        assert lo == pytest.approx(1.9) and hi == pytest.approx(9.1)
        assert min(col(out, "c")) >= lo and max(col(out, "c")) <= hi

    @pytest.mark.parametrize("q_lo, q_hi", [(0.5, 0.5), (-0.1, 0.5), (0.2, 1.1)])
    def test_bad_quantiles(self, q_lo, q_hi):
        with pytest.raises(DataError):
            winsorize(table(c=[1.0, 2.0]), "c", q_lo, q_hi)

    def test_empty(self):
        with pytest.raises(DataError):
            winsorize(table(c=[None]), "c", 0.1, 0.9)


class TestLog:
    def test_values(self):
        out = transform_log(table(c=[1.0, math.e, math.e**2]), "c")
        assert col(out, "c") == pytest.approx([0.0, 1.0, 2.0], abs=1e-15)

    def test_nonpositive(self):
        with pytest.raises(DataError):
            transform_log(table(c=[1.0, 0.0]), "c")

    def test_roundtrip(self):
        x = np.random.default_rng(3).lognormal(0.0, 2.0, 200)
        inv = table(c=x.tolist())
        out, pipe = fit_apply_pipeline(inv, [{"kind": "log", "column": "c"}])
        back = pipe.invert(out).column("c")
        assert np.max(np.abs(back - x) / x) <= 1e-9


class TestRankQuantile:
    def test_uniform_positions(self):
        out, ref = transform_rank_quantile(table(c=[20.0, 10.0, 30.0]), "c", "uniform")
        assert col(out, "c") == pytest.approx([3 / 6, 1 / 6, 5 / 6], abs=1e-15)
        assert ref["knots"] == [10.0, 20.0, 30.0]

    def test_normal_middle(self):
        out, _ = transform_rank_quantile(table(c=[10.0, 20.0, 30.0]), "c", "normal")
        assert col(out, "c")[1] == pytest.approx(0.0, abs=1e-15)
        assert col(out, "c")[0] == pytest.approx(stats.norm.ppf(1 / 6))

    def test_ties_average_rank(self):
        out, _ = transform_rank_quantile(table(c=[1.0, 2.0, 2.0, 3.0]), "c")
        assert col(out, "c") == pytest.approx([0.125, 0.5, 0.5, 0.875])

    def test_constant(self):
        with pytest.raises(DataError):
            transform_rank_quantile(table(c=[4.0, 4.0]), "c")

    @pytest.mark.parametrize("target", ["uniform", "normal"])
    def test_roundtrip_on_training(self, target):
        x = np.random.default_rng(5).standard_t(2, 300)
        inv = table(c=x.tolist())
        out, pipe = fit_apply_pipeline(inv, [{"kind": "rank_quantile", "column": "c", "target": target}])
        assert np.max(np.abs(pipe.invert(out).column("c") - x)) <= 1e-6


class TestZscore:
    def test_values(self):
        out, mean, sd = transform_zscore(table(c=[1.0, 2.0, 3.0]), "c")
        assert (mean, sd) == (2.0, 1.0)
        assert col(out, "c") == pytest.approx([-1.0, 0.0, 1.0], abs=1e-7)

    def test_constant_guard(self):
        out, _, sd = transform_zscore(table(c=[5.0, 5.0, 5.0]), "c")
        assert sd == 0.0 and col(out, "c") == [0.0, 0.0, 0.0]

    def test_too_few(self):
        with pytest.raises(DataError):
            transform_zscore(table(c=[1.0, None]), "c")

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=30))
    def test_roundtrip(self, xs):
        inv = table(c=xs)
        out, pipe = fit_apply_pipeline(inv, [{"kind": "zscore", "column": "c"}])
        back = pipe.invert(out).column("c")
        assert np.allclose(back, xs, rtol=1e-9, atol=1e-9 * max(1.0, max(abs(v) for v in xs)))


class TestPipeline:
    def test_empty(self):
        inv = table(c=[1.0, 2.0])
        out, pipe = fit_apply_pipeline(inv, [])
        assert out == inv and pipe.steps == ()

    def test_median_then_zscore(self):
        out, pipe = fit_apply_pipeline(table(c=[1.0, 2.0, None, 4.0]), [
            {"kind": "impute_median", "column": "c"},
            {"kind": "zscore", "column": "c"},
        ])
        filled = [1.0, 2.0, 2.0, 4.0]
        m, s = statistics.mean(filled), statistics.stdev(filled)
        assert col(out, "c") == pytest.approx([(v - m) / (s + 1e-8) for v in filled], abs=1e-12)
        assert pipe.steps[0].fitted["median"] == 2.0

    def test_apply_is_deterministic_and_never_refits(self):
        train = table(c=[1.0, 2.0, None, 4.0], d=[1.0, 5.0, 2.0, 9.0])
        steps = [
            {"kind": "missing_indicator"},
            {"kind": "impute_median", "column": "c"},
            {"kind": "winsorize", "column": "d", "q_lo": 0.1, "q_hi": 0.9},
            {"kind": "zscore", "column": "d"},
        ]
        out, pipe = fit_apply_pipeline(train, steps)
        assert pipe.apply(train) == out
        assert pipe.apply(train) == pipe.apply(train)
        fresh = table(c=[None, 100.0], d=[0.0, 100.0])
        applied = pipe.apply(fresh)
        assert col(applied, "c")[0] == 2.0
        assert pipe.steps[1].fitted["median"] == 2.0
        assert applied.schema.names == ["c", "d", "c__missing"]

    def test_error_carries_index(self):
        with pytest.raises(PipelineError, match="step 1"):
            fit_apply_pipeline(table(c=[1.0, 2.0]), [{"kind": "zscore", "column": "c"},
                                                      {"kind": "log", "column": "c"}])
        with pytest.raises(PipelineError, match="step 0"):
            fit_apply_pipeline(table(c=[1.0, 2.0]), [{"kind": "zscore", "column": "nope"}])

    def test_json_roundtrip(self, tmp_path):
        train = table(c=[1.0, 2.0, None, 4.0], d=[3.0, 1.0, 2.0, 9.0])
        steps = [{"kind": "impute_knn", "column": "c", "k": 2},
                 {"kind": "rank_quantile", "column": "d", "target": "normal"}]
        out, pipe = fit_apply_pipeline(train, steps)
        pipe.save(tmp_path / "p.json")
        loaded = TransformPipeline.load(tmp_path / "p.json")
        assert loaded == pipe
        assert loaded.apply(train) == out
        assert [s.invertible for s in loaded.steps] == ["no", "approx"]
