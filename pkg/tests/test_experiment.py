import csv
import json

import numpy as np
import pytest

from linrecon.cli import EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, main
from linrecon.data import save_schema, write_csv
from linrecon.datasets import random_population
from linrecon.experiment import (SUMMARY_COLUMNS, ConfigError, ExperimentConfig, ExperimentReport, load_config,
                                 run_experiment, score_records, tradeoff_table)

SMALL = {
    "dataset": "pop.csv", "schema": "schema.json",
    "generators": [{"variant": "NonPrivate"}], "m": [100], "attacks": ["recon"],
    "games": 10, "n": 40, "master_seed": 3, "workers": 1, "utility_games": 2,
    "utility": {"num_queries": 200, "p": 10},
}


@pytest.fixture
def workdir(tmp_path):
    pop = random_population([6, 5, 4, 3, 2], 400, np.random.default_rng(0))
    write_csv(pop, tmp_path / "pop.csv")
    save_schema(pop.schema, tmp_path / "schema.json")
    return tmp_path


def write_config(path, obj):
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


def test_counting_contract(workdir):
    cfg = load_config(write_config(workdir / "c.json", SMALL))
    report = run_experiment(cfg)
    out = workdir / "results"
    assert len((out / "records.jsonl").read_text().splitlines()) == 10
    rows = list(csv.DictReader(open(out / "summary.csv")))
    assert len(rows) == 1 and tuple(rows[0]) == SUMMARY_COLUMNS
    assert rows[0]["generator"] == "NonPrivate" and rows[0]["m"] == "100" and rows[0]["epsilon"] == ""
    assert report.games_played == 10 and report.failures == []
    saved = json.loads((out / "report.json").read_text())
    assert saved["games_played"] == 10 and len(saved["cells"]) == 1 and len(saved["tradeoff"]) == 1


def test_rerun_is_byte_identical_and_worker_independent(workdir):
    obj = {**SMALL, "generators": [{"variant": "NonPrivate"}, {"variant": "PrivBayes", "degree": 1}],
           "m": [50, 200], "epsilon": [1, 100], "attacks": ["recon", "dcr", "ml"], "games": 4}
    cfg = load_config(write_config(workdir / "c.json", obj))
    run_experiment(cfg)
    first = (workdir / "results" / "summary.csv").read_bytes()
    records = (workdir / "results" / "records.jsonl").read_text()
    run_experiment(cfg)
    assert (workdir / "results" / "summary.csv").read_bytes() == first
    cfg2 = load_config(write_config(workdir / "c2.json", {**obj, "workers": 2, "out": "r2"}))
    run_experiment(cfg2)
    assert (workdir / "r2" / "summary.csv").read_bytes() == first
    strip = [{k: v for k, v in json.loads(line).items() if not k.endswith("seconds")} for line in records.splitlines()]
    again = [{k: v for k, v in json.loads(line).items() if not k.endswith("seconds")}
             for line in (workdir / "r2" / "records.jsonl").read_text().splitlines()]
    assert strip == again


def test_summary_rows_are_sorted_and_epsilon_applies_to_private_generators(workdir):
    obj = {**SMALL, "generators": [{"variant": "PrivBayes", "degree": 1}, {"variant": "NonPrivate"}],
           "m": [200, 50], "epsilon": [10, 1], "attacks": ["ml", "dcr"], "games": 2, "utility_games": 0}
    run_experiment(load_config(write_config(workdir / "c.json", obj)))
    rows = list(csv.DictReader(open(workdir / "results" / "summary.csv")))
    keys = [(r["generator"], int(r["m"]), float(r["epsilon"]) if r["epsilon"] else -1.0, r["attack"]) for r in rows]
    assert keys == sorted(keys) and len(rows) == (2 + 2 * 2) * 2
    assert {r["epsilon"] for r in rows if r["generator"] == "NonPrivate"} == {""}
    assert all(r["mre"] == "" and r["tvd"] == "" for r in rows)


def test_no_temporary_files_are_left(workdir):
    run_experiment(load_config(write_config(workdir / "c.json", SMALL)))
    assert sorted(p.name for p in (workdir / "results").iterdir()) == ["records.jsonl", "report.json", "summary.csv"]


def test_every_config_problem_is_reported_at_once(workdir):
    bad = {"dataset": "builtin:nope", "generators": [{"variant": "RapDP", "delta": 2.0}, {"variant": "Magic"}],
           "m": [0, 10], "epsilon": [-1], "attacks": ["recon", {"kind": "recon", "k": 1}, "psychic"],
           "games": 0, "workers": 0, "colour": "blue"}
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_json(bad)
    text = "\n".join(err.value.problems)
    for needle in ("colour", "builtin:nope", "delta", "Magic", "m values", "epsilon values", "k must be >= 2",
                   "psychic", "games must be", "workers must be"):
        assert needle in text, needle
    assert len(err.value.problems) >= 10


def test_missing_keys_and_unreadable_files(tmp_path):
    with pytest.raises(ConfigError) as err:
        ExperimentConfig.from_json({})
    assert len(err.value.problems) == 4
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")
    (tmp_path / "broken.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "broken.json")


def test_attack_lists_expand_and_round_trip():
    cfg = ExperimentConfig.from_json({"dataset": "builtin:fire_like", "generators": [{"variant": "RAP", "iterations": 5}],
                                      "m": [10], "attacks": [{"kind": "recon", "k": [2, 3], "mode": ["marginal",
                                                                                                   "conditional"]}]})
    assert sorted(a.label for a in cfg.attacks) == ["recon", "recon-k2", "recon-k2-marginal", "recon-marginal"]
    again = ExperimentConfig.from_json(cfg.to_json())
    assert again.to_json() == cfg.to_json()
    assert 1 <= cfg.workers <= 32


def test_tradeoff_flags():
    report = {"cells": [{"generator": "G", "m": 100, "epsilon": None, "a_max": None,
                         "scores": {"a": {"accuracy": 0.55}, "b": {"accuracy": 0.62}, "c": {"accuracy": 0.58}},
                         "utility": {"mre_gt10": 0.1, "k_tvd": 0.05}},
                        {"generator": "H", "m": 100, "epsilon": 1.0, "a_max": 0.51,
                         "scores": {}, "utility": {"mre_gt10": 0.5, "k_tvd": 0.05}}]}
    rows = tradeoff_table(report)
    assert rows[0]["a_max"] == 0.62 and not rows[0]["privacy_ok"] and rows[0]["utility_ok"]
    assert rows[1]["privacy_ok"] and not rows[1]["utility_ok"]
    assert tradeoff_table(report, privacy_threshold=0.7)[0]["privacy_ok"]


def test_all_random_attacks_pass_the_privacy_flag(workdir):
    obj = {**SMALL, "attacks": [{"kind": "random", "name": "coin"}], "games": 300, "utility_games": 0}
    report = run_experiment(load_config(write_config(workdir / "c.json", obj)))
    (row,) = tradeoff_table(report)
    assert row["privacy_ok"] and abs(row["a_max"] - 0.5) <= 3 * np.sqrt(0.25 / 300)


def test_cli_exit_codes_and_subcommands(workdir, capsys):
    good = write_config(workdir / "good.json", SMALL)
    assert main(["run", str(good), "--quiet"]) == EXIT_OK
    assert main(["run", str(write_config(workdir / "bad.json", {**SMALL, "games": -1}))]) == EXIT_CONFIG
    assert "games must be" in capsys.readouterr().err

    # a population without unique quasi-identifiers makes every game fail
    flat = random_population([2, 2], 200, np.random.default_rng(0))
    flat = flat.with_rows(np.column_stack([np.zeros(200, np.int64), flat.secret]))
    write_csv(flat, workdir / "flat.csv")
    save_schema(flat.schema, workdir / "flat_schema.json")
    partial = write_config(workdir / "partial.json", {**SMALL, "dataset": "flat.csv", "schema": "flat_schema.json",
                                                      "games": 2, "out": "partial"})
    assert main(["run", str(partial), "--quiet"]) == EXIT_PARTIAL
    saved = json.loads((workdir / "partial" / "report.json").read_text())
    assert len(saved["failures"]) == 2 and saved["games_played"] == 0

    out = workdir / "results"
    assert main(["score", str(out / "records.jsonl"), "--out", str(workdir / "scores.json")]) == EXIT_OK
    scores = json.loads((workdir / "scores.json").read_text())
    report = json.loads((out / "report.json").read_text())
    assert scores[0]["scores"] == report["cells"][0]["scores"]
    a_max = report["cells"][0]["a_max"]
    assert main(["tradeoff", str(out / "report.json")]) == EXIT_OK
    table = list(csv.DictReader(capsys.readouterr().out.splitlines()))
    assert len(table) == 1 and table[0]["privacy_ok"] == str(a_max < 0.6)
    assert main(["tradeoff", str(out / "report.json"), "--privacy-threshold", str(a_max + 0.01)]) == EXIT_OK
    assert list(csv.DictReader(capsys.readouterr().out.splitlines()))[0]["privacy_ok"] == "True"
    assert main(["tradeoff", str(workdir / "absent.json")]) == EXIT_CONFIG


def test_cli_overrides(workdir):
    good = write_config(workdir / "good.json", SMALL)
    assert main(["run", str(good), "--quiet", "--seed", "11", "--out", str(workdir / "other"), "--workers", "2"]) == 0
    saved = json.loads((workdir / "other" / "report.json").read_text())
    assert saved["config"]["master_seed"] == 11 and saved["config"]["workers"] == 2


def test_builtin_dataset_and_report_round_trip(tmp_path):
    obj = {"dataset": "builtin:fire_like", "generators": [{"variant": "IndHist"}], "m": [100],
           "attacks": ["ml"], "games": 3, "n": 100, "out": str(tmp_path / "out"), "utility_games": 0}
    report = run_experiment(ExperimentConfig.from_json(obj))
    back = ExperimentReport.from_json(json.loads((tmp_path / "out" / "report.json").read_text()))
    assert back.cells == json.loads(json.dumps(report.cells)) and back.games_played == 3
    assert score_records(tmp_path / "out" / "records.jsonl")[0]["scores"]["ml"]["games"] == 3
