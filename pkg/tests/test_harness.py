import csv
import io
import json

import pytest

from qaoa_overparam import cli
from qaoa_overparam.errors import ConfigError
from qaoa_overparam.harness import (
    ExperimentConfig,
    SweepRecord,
    aggregate_normalized,
    load_records,
    rows_to_csv,
    run_experiment,
    scaling_report,
    scatter_counts,
    work_items,
    worker_count,
    write_reports,
)


def ring_config(tmp_path, **kw):
    d = {"family": "ring", "n": [4, 6], "seed": 1, "runs": 4, "p_max": 5, "records_path": str(tmp_path / "r.jsonl")}
    d.update(kw)
    return ExperimentConfig.from_dict(d)


def strip_volatile(d):
    d = json.loads(json.dumps(d))
    for key in ("started", "finished"):
        d["provenance"].pop(key, None)
    if d["result"]:
        for t in d["result"]["traces"]:
            t.pop("wall_ms")
    return d


class TestConfig:
    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigError, match="bogus"):
            ExperimentConfig.from_dict({"family": "ring", "n": [4], "seed": 0, "bogus": 1})

    def test_missing_seed(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"family": "ring", "n": [4]})

    def test_bad_family(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"family": "tsp", "n": [4], "seed": 0})

    def test_fast_tier_caps(self):
        with pytest.raises(ConfigError, match="fast tier"):
            ExperimentConfig(family="max2sat", n=[8], m=[16], seed=0)
        ExperimentConfig(family="max2sat", n=[8], m=[16], seed=0, tier="extended")

    def test_family_grids_required(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(family="maxcut-random", n=[5], seed=0)
        with pytest.raises(ConfigError):
            ExperimentConfig(family="maxcut-regular", n=[5], k=[3], seed=0)

    def test_load_invalid_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.load(p)

    def test_hash_ignores_paths(self, tmp_path):
        a = ring_config(tmp_path)
        b = ring_config(tmp_path, records_path="elsewhere.jsonl")
        c = ring_config(tmp_path, runs=5)
        assert a.science_hash() == b.science_hash() != c.science_hash()

    def test_defaults(self):
        cfg = ExperimentConfig(family="ring", n=[4], seed=0)
        assert cfg.p_max == 150 and cfg.eps == 1e-8

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv("QAOA_WORKERS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("QAOA_WORKERS", "zero")
        with pytest.raises(ConfigError):
            worker_count()


class TestWorkItems:
    def test_ring_one_per_n(self, tmp_path):
        items = work_items(ring_config(tmp_path, instances=7))
        assert [i.record_id for i in items] == ["ring-n4-i0", "ring-n6-i0"]

    def test_max2sat_alpha_grid(self):
        cfg = ExperimentConfig(family="max2sat", n=[4, 5], alpha=[2.0], instances=2, seed=3)
        items = work_items(cfg)
        assert [i.cell["m"] for i in items] == [8, 8, 10, 10]
        assert len({i.seed for i in items}) == 4

    def test_seeds_stable(self):
        cfg = ExperimentConfig(family="maxcut-random", n=[5], q=[0.3, 0.6], instances=3, seed=9)
        assert [i.seed for i in work_items(cfg)] == [i.seed for i in work_items(cfg)]


class TestRunExperiment:
    def test_ring_records(self, tmp_path):
        recs = list(run_experiment(ring_config(tmp_path)))
        assert [r.status for r in recs] == ["ok", "ok"]
        for r in recs:
            assert r.p_c == r.p_star == r.n // 2
            assert r.provenance["config_hash"]
            assert r.normalized_depths()[r.p_c - 1] == 1.0

    def test_resume_gives_identical_set(self, tmp_path):
        full_cfg = ring_config(tmp_path, n=[4, 5, 6], records_path=str(tmp_path / "full.jsonl"))
        full = [strip_volatile(r.to_dict()) for r in run_experiment(full_cfg)]

        part_cfg = ring_config(tmp_path, n=[4, 5, 6], records_path=str(tmp_path / "part.jsonl"))
        gen = run_experiment(part_cfg)
        next(gen)
        gen.close()
        # simulate a crash mid-write
        with open(part_cfg.records_path, "a") as f:
            f.write('{"record_id": "ring-n5-i0", "sta')
        resumed = list(run_experiment(part_cfg))
        assert len(resumed) == 2
        final = [strip_volatile(r.to_dict()) for r in load_records(part_cfg.records_path)]
        assert final == full

    def test_degenerate_instance(self, tmp_path):
        cfg = ExperimentConfig(
            family="maxcut-random", n=[3], q=[0.0], instances=1, seed=0, runs=2, p_max=3,
            records_path=str(tmp_path / "d.jsonl"),
        )
        (rec,) = run_experiment(cfg)
        assert rec.status == "degenerate" and rec.p_star == 0

    def test_failure_recorded_not_raised(self, tmp_path):
        cfg = ring_config(tmp_path, n=[10], eqd_p_max=2)
        (rec,) = run_experiment(cfg)
        assert rec.status == "error"
        assert rec.error["error"] == "not_found"

    def test_p_max_over_pc(self, tmp_path):
        cfg = ring_config(tmp_path, n=[8], p_max=150, p_max_over_pc=1.5)
        (rec,) = run_experiment(cfg)
        assert rec.result.p_max == 6


def fake_record(rid, p_c, raw_per_run, n=5, family="max2sat", m=10, eps=1e-8):
    """Record built from explicit per-run raw error curves."""
    traces = [
        {"run": i, "seed": i, "raw": raw, "params": [[[0.0, 0.0]] * (k + 1) for k in range(len(raw))], "wall_ms": []}
        for i, raw in enumerate(raw_per_run)
    ]
    p_max = max(len(r) for r in raw_per_run)
    result = {"instance_id": rid, "n": n, "e_g": 0.0, "eps": eps, "p_max": p_max, "p_c": p_c, "traces": traces}
    return SweepRecord.from_dict(
        {
            "record_id": rid, "status": "ok", "family": family, "cell": {"n": n, "m": m},
            "instance": {"n": n}, "provenance": {}, "p_c": p_c, "result": result,
        }
    )


class TestAggregations:
    def test_empty(self):
        assert aggregate_normalized([]) == []
        assert scaling_report([]) == []

    def test_single_solved_instance(self):
        rec = fake_record("a", 10, [[1.0] * 4 + [0.0] * 6])
        rows = aggregate_normalized([rec])
        fr = {round(r["p_over_pc"], 1): r["solved_fraction"] for r in rows}
        assert fr[0.4] == 0.0
        assert all(fr[x] == 1.0 for x in fr if x >= 0.5)

    def test_mean_success_over_solved_only(self):
        a = fake_record("a", 4, [[0.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0]])  # solved p*=1, success 0.5
        b = fake_record("b", 4, [[1.0, 1.0, 1.0, 1.0]])  # never solved
        rows = {r["p_over_pc"]: r for r in aggregate_normalized([a, b], bin_width=0.25)}
        assert rows[0.25]["solved_fraction"] == 0.5
        assert rows[0.25]["mean_success_solved"] == 0.5
        assert rows[0.25]["record_ids"] == "a"

    def test_ring_transition(self, tmp_path):
        recs = list(run_experiment(ring_config(tmp_path, n=[4, 6, 8], p_max=6)))
        rows = aggregate_normalized(recs)
        for r in rows:
            assert r["solved_fraction"] == (1.0 if r["p_over_pc"] >= 1.0 else 0.0)

    def test_scaling_sentinel_and_geomean(self):
        a = fake_record("a", 15, [[1.0, 0.0]], n=4, m=8)
        b = fake_record("b", 15, [[1.0, 1.0]], n=4, m=8)
        (row,) = scaling_report([a, b])
        assert row["geomean_p_c"] == 15.0
        assert row["sentinels"] == 1
        assert row["geomean_p_star"] == pytest.approx((2 * 15) ** 0.5)
        assert row["alpha"] == 2.0

    def test_scatter_counts(self):
        recs = [fake_record(str(i), 3, [[1.0, 0.0]]) for i in range(3)]
        (row,) = scatter_counts(recs)
        assert row["count"] == 3 and row["p_star"] == 2

    def test_recompute_from_disk(self, tmp_path):
        cfg = ring_config(tmp_path, n=[4, 5])
        live = list(run_experiment(cfg))
        disk = load_records(cfg.records_path)
        assert aggregate_normalized(live) == aggregate_normalized(disk)
        assert scaling_report(live) == scaling_report(disk)

    def test_csv_format(self, tmp_path):
        rec = fake_record("a", 2, [[1.0, 0.0]])
        paths = write_reports([rec], tmp_path / "rep")
        text = paths["normalized.csv"].read_text(encoding="utf-8")
        rows = list(csv.DictReader(io.StringIO(text)))
        assert rows[0]["p_over_pc"] == "0.1"
        assert rows_to_csv([]) == ""


class TestCli:
    def run(self, capsys, *argv):
        code = cli.main(list(argv))
        out = capsys.readouterr()
        return code, out.out, out.err

    def test_gen_and_eqd(self, tmp_path, capsys):
        inst = tmp_path / "ring.json"
        code, _, _ = self.run(capsys, "gen", "--family", "ring", "--n", "6", "--out", str(inst))
        assert code == 0
        d = json.loads(inst.read_text())
        assert d["optimal_depth"] == 3 and "proven" in d["optimal_depth_status"]
        code, out, _ = self.run(capsys, "eqd", str(inst), "--csv", str(tmp_path / "c.csv"))
        assert code == 0 and json.loads(out)["p_c"] == 3
        assert (tmp_path / "c.csv").read_text().startswith("depth,eqd,sample_ranks")

    def test_gen_many(self, tmp_path, capsys):
        out_path = tmp_path / "many.jsonl"
        self.run(capsys, "gen", "--family", "max2sat", "--n", "4", "--m", "8", "--count", "3", "--out", str(out_path))
        lines = out_path.read_text().splitlines()
        assert len(lines) == 3 and len(set(lines)) == 3

    def test_run(self, tmp_path, capsys):
        inst = tmp_path / "ring.json"
        self.run(capsys, "gen", "--family", "ring", "--n", "4", "--out", str(inst))
        code, out, _ = self.run(capsys, "run", str(inst), "--runs", "3", "--p-max", "3", "--traces", str(tmp_path / "t.jsonl"))
        assert code == 0 and json.loads(out)["p_star"] == 2
        assert len((tmp_path / "t.jsonl").read_text().splitlines()) == 9

    def test_sweep_and_report(self, tmp_path, capsys):
        cfg = {"family": "ring", "n": [4], "seed": 0, "runs": 2, "p_max": 4,
               "records_path": str(tmp_path / "rec.jsonl"), "report_dir": str(tmp_path / "rep")}
        (tmp_path / "cfg.json").write_text(json.dumps(cfg))
        code, out, _ = self.run(capsys, "sweep", str(tmp_path / "cfg.json"), "--quiet")
        assert code == 0 and json.loads(out)["new_records"]["ok"] == 1
        assert (tmp_path / "rep" / "scaling.csv").exists()
        code, out, _ = self.run(capsys, "report", str(tmp_path / "rec.jsonl"), "--out-dir", str(tmp_path / "r2"))
        assert code == 0 and json.loads(out)["records"] == 1

    def test_config_error_json(self, tmp_path, capsys):
        (tmp_path / "bad.json").write_text(json.dumps({"family": "ring", "n": [4], "seed": 0, "extra": 1}))
        code, _, err = self.run(capsys, "sweep", str(tmp_path / "bad.json"))
        assert code != 0
        assert json.loads(err)["error"] == "invalid_config"

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = self.run(capsys, "eqd", str(tmp_path / "nope.json"))
        assert code != 0 and "error" in json.loads(err)

    def test_eqd_not_found(self, tmp_path, capsys):
        inst = tmp_path / "ring.json"
        self.run(capsys, "gen", "--family", "ring", "--n", "10", "--out", str(inst))
        code, _, err = self.run(capsys, "eqd", str(inst), "--p-max", "2")
        assert code == 2 and json.loads(err)["curve"] == [2, 4]
