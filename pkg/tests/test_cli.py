import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from landsynth.bench import get_scenario, make_scenario
from landsynth.cli import main
from landsynth.schema import CATEGORICAL, NUMERIC, FeatureSchema, FeatureSpec, Inventory, save_csv, save_schema


@pytest.fixture
def data(tmp_path):
    rng = np.random.default_rng(0)
    n = 40
    x = rng.normal(20, 5, n)
    schema = FeatureSchema((
        FeatureSpec("slope", NUMERIC),
        FeatureSpec("rain", NUMERIC),
        FeatureSpec("soil", CATEGORICAL, categories=("clay", "sand")),
    ))
    inv = Inventory(schema, [x, np.exp(rng.normal(2, 0.5, n)) + 0.1 * x, (x > 20).astype(np.int64)])
    save_csv(inv, tmp_path / "train.csv")
    save_schema(schema, tmp_path / "schema.json")
    return tmp_path


def run(*argv):
    return main(["--quiet", *map(str, argv)])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestIngest:
    def test_ok(self, data):
        assert run("ingest", "--input", data / "train.csv", "--schema", data / "schema.json",
                   "--report", data / "r.json", "--out", data / "clean.csv") == 0
        assert json.loads((data / "r.json").read_text())["type_violations"] == []
        assert (data / "clean.csv").read_bytes() == (data / "train.csv").read_bytes()

    def test_infer_and_write_schema(self, data):
        assert run("ingest", "--input", data / "train.csv", "--schema-out", data / "s2.json") == 0
        assert json.loads((data / "s2.json").read_text())["features"][2]["kind"] == "categorical"

    def test_type_violation(self, data):
        (data / "bad.csv").write_text("slope,rain,soil\nsteep,1.0,clay\n")
        assert run("ingest", "--input", data / "bad.csv", "--schema", data / "schema.json",
                   "--report", data / "r.json") == 2
        assert json.loads((data / "r.json").read_text())["type_violations"]

    def test_missing_file(self, data):
        assert run("ingest", "--input", data / "nope.csv") == 2

    def test_dedupe(self, data):
        body = (data / "train.csv").read_text().splitlines()
        (data / "dup.csv").write_text("\n".join(body + body[1:3]) + "\n")
        assert run("ingest", "--input", data / "dup.csv", "--schema", data / "schema.json",
                   "--out", data / "d.csv", "--dedupe") == 0
        assert len(rows(data / "d.csv")) == 41


class TestPreprocess:
    def test_fit_then_apply(self, data):
        assert run("preprocess", "--input", data / "train.csv", "--schema", data / "schema.json",
                   "--step", "log:rain", "--step", "winsorize:slope:q_lo=0.05,q_hi=0.95",
                   "--step", "zscore:slope", "--pipeline", data / "p.json", "--out", data / "o.csv") == 0
        doc = json.loads((data / "p.json").read_text())
        assert [s["kind"] for s in doc["steps"]] == ["log", "winsorize", "zscore"]
        assert run("preprocess", "--input", data / "train.csv", "--schema", data / "schema.json",
                   "--apply", data / "p.json", "--out", data / "o2.csv") == 0
        assert (data / "o.csv").read_bytes() == (data / "o2.csv").read_bytes()
        assert (data / "o.schema.json").exists()

    def test_steps_file(self, data):
        (data / "steps.json").write_text(json.dumps([{"kind": "rank_quantile", "column": "rain", "target": "normal"}]))
        assert run("preprocess", "--input", data / "train.csv", "--schema", data / "schema.json",
                   "--steps", data / "steps.json", "--out", data / "o.csv") == 0

    def test_bad_step(self, data):
        assert run("preprocess", "--input", data / "train.csv", "--schema", data / "schema.json",
                   "--step", "log:soil") == 2


class TestGenerateSelectMix:
    def test_pipeline(self, data):
        s = data / "schema.json"
        assert run("generate", "--train", data / "train.csv", "--schema", s, "-N", 30, "-M", 2,
                   "--seed", 4, "--out", data / "pool.csv") == 0
        header = rows(data / "pool.csv")[0]
        assert header[-3:] == ["__candidate", "__log_plausibility", "__order"]
        assert len(rows(data / "pool.csv")) == 31
        meta = json.loads((data / "pool.meta.json").read_text())
        assert meta["config"]["seed"] == 4 and len(meta["candidates"]) == 30

        assert run("select", "--pool", data / "pool.csv", "--top-q", 0.5, "--out", data / "acc.csv") == 0
        assert len(rows(data / "acc.csv")) == 16
        assert run("select", "--pool", data / "pool.csv", "--tau", 1e9, "--out", data / "none.csv") == 0
        assert len(rows(data / "none.csv")) == 1

        assert run("mix", "--observed", data / "train.csv", "--schema", s, "--accepted", data / "acc.csv",
                   "--alpha", 0.2, "--out", data / "corpus.csv") == 0
        body = rows(data / "corpus.csv")
        assert body[0][-1] == "__source" and len(body) == 1 + 40 + 10
        assert [r[-1] for r in body[1:]].count("synthetic") == 10
        assert json.loads((data / "corpus.meta.json").read_text())["n_synthetic"] == 10

        assert run("mix", "--observed", data / "train.csv", "--schema", s, "--accepted", data / "acc.csv",
                   "--alpha", 0.5, "--out", data / "c2.csv") == 2

    def test_conditioning(self, data):
        assert run("generate", "--train", data / "train.csv", "--schema", data / "schema.json", "-N", 5, "-M", 1,
                   "--condition", "soil=sand", "--condition", "slope=22.5", "--out", data / "pool.csv") == 0
        for r in rows(data / "pool.csv")[1:]:
            assert r[0] == "22.5" and r[2] == "sand"
        assert run("generate", "--train", data / "train.csv", "--condition", "slope", "--out", data / "p.csv") == 1
        assert run("generate", "--train", data / "train.csv", "--condition", "slope=x", "--out", data / "p.csv") == 2

    def test_workers_identical(self, data):
        args = ["generate", "--train", data / "train.csv", "--schema", data / "schema.json", "-N", 24, "-M", 2]
        assert run(*args, "--workers", 1, "--out", data / "a.csv") == 0
        assert run(*args, "--workers", 4, "--out", data / "b.csv") == 0
        assert (data / "a.csv").read_bytes() == (data / "b.csv").read_bytes()
        assert (data / "a.meta.json").read_bytes() == (data / "b.meta.json").read_bytes()

    def test_missing_cells_rejected(self, data):
        (data / "gap.csv").write_text("a,b\n1,2\nNA,3\n")
        assert run("generate", "--train", data / "gap.csv", "--out", data / "p.csv") == 2


class TestBaselineEvaluate:
    def test_baselines(self, data):
        for method, extra in (("mc", []), ("smote", ["-k", 3])):
            assert run("baseline", method, "--train", data / "train.csv", "--schema", data / "schema.json",
                       "-n", 25, "--seed", 7, *extra, "--out", data / f"{method}.csv") == 0
            assert len(rows(data / f"{method}.csv")) == 26
        assert run("baseline", "smote", "--train", data / "train.csv", "-k", 40, "--out", data / "x.csv") == 2

    def test_evaluate(self, data):
        run("baseline", "mc", "--train", data / "train.csv", "--schema", data / "schema.json", "-n", 100,
            "--out", data / "mc.csv")
        assert run("evaluate", "--orig", data / "train.csv", "--gen", data / "mc.csv", "--schema",
                   data / "schema.json", "--out", data / "rep.json", "--csv", data / "rep.csv", "--label", "mc") == 0
        rep = json.loads((data / "rep.json").read_text())
        assert set(rep) == {"meta", "features", "dependence", "aggregates"}
        assert rep["meta"]["method"] == "mc" and len(rep["dependence"]) == 1
        assert rows(data / "rep.csv")[0] == ["feature", "metric", "value"]
        assert len(rows(data / "rep.csv")) == 1 + 2 * 8 + 2 + 2

    def test_evaluate_schema_mismatch(self, data):
        (data / "other.csv").write_text("slope,depth\n1,2\n3,4\n5,6\n")
        assert run("evaluate", "--orig", data / "train.csv", "--gen", data / "other.csv",
                   "--out", data / "r.json") == 2


class TestBench:
    def test_bench(self, data):
        out = data / "bench"
        assert run("bench", "--scenario", "coupled_met", "--methods", "proposed,mc,smote", "--n-train", 40,
                   "--n-truth", 400, "-N", 80, "-M", 2, "--seed", 42, "--out", out) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["bench.json", "comparison.csv", "ecdf.csv", "kde_grids.csv",
                         "monte_carlo.json", "proposed.json", "smote.json"]

    def test_external_and_failure(self, data):
        ext = data / "ext.csv"
        _, truth = make_scenario(get_scenario("zero_peak", n_train=20, n_truth=200, truth_seed=1))
        save_csv(truth, ext)
        assert run("bench", "--scenario", "zero_peak", "--methods", "mc", "--external", f"gan={ext}",
                   "--n-train", 20, "--n-truth", 200, "--out", data / "b1") == 0
        assert (data / "b1" / "gan.json").exists()
        assert run("bench", "--scenario", "zero_peak", "--methods", "mc,bogus", "--n-train", 20,
                   "--n-truth", 200, "--out", data / "b2") == 3

    def test_unknown_scenario(self, data):
        assert run("bench", "--scenario", "nope", "--out", data / "b") == 2


class TestUsage:
    def test_usage_errors(self, data, capsys):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main(["select", "--pool", "p.csv", "--tau", "1", "--top-q", "0.5", "--out", "x"])
        assert exc.value.code == 1
        with pytest.raises(SystemExit) as exc:
            main(["generate", "--train", "t.csv", "-N", "many", "--out", "x"])
        assert exc.value.code == 1

    def test_config_and_precedence(self, data):
        cfg = data / "cfg.json"
        cfg.write_text(json.dumps({"n": 7, "seed": 3}))
        base = ["baseline", "mc", "--train", data / "train.csv", "--schema", data / "schema.json"]
        assert run("--config", cfg, *base, "--out", data / "a.csv") == 0
        assert len(rows(data / "a.csv")) == 8
        assert run(*base, "-n", 7, "--seed", 3, "--out", data / "b.csv") == 0
        assert (data / "a.csv").read_bytes() == (data / "b.csv").read_bytes()
        # explicit flags beat the file, before or after the subcommand
        assert run("--config", cfg, "--seed", 9, *base, "-n", 5, "--out", data / "c.csv") == 0
        assert run(*base, "-n", 5, "--seed", 9, "--out", data / "d.csv") == 0
        assert (data / "c.csv").read_bytes() == (data / "d.csv").read_bytes()
        assert run(*base, "--config", cfg, "--seed", 9, "-n", 5, "--out", data / "e.csv") == 0
        assert (data / "e.csv").read_bytes() == (data / "d.csv").read_bytes()

    def test_bad_config(self, data):
        (data / "bad.json").write_text("{")
        assert run("--config", data / "bad.json", "ingest", "--input", data / "train.csv") == 1

    def test_entry_point(self, data):
        proc = subprocess.run([sys.executable, "-m", "landsynth.cli", "--help"], capture_output=True, text=True)
        assert proc.returncode == 0 and "bench" in proc.stdout
