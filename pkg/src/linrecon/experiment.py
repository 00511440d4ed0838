"""Experiment grids over generators, synthetic sizes, privacy budgets and attacks.

A config is JSON::

    {
      "dataset": "data.csv", "schema": "schema.json",
      "generators": [{"variant": "NonPrivate"}, {"variant": "RapDP", "iterations": 500}],
      "m": [100, 1000000],
      "epsilon": [1, 10, 100],
      "attacks": ["dcr", "ml", {"kind": "recon", "k": [2, 3], "cap": 100000}],
      "games": 100, "n": 1000, "master_seed": 0, "workers": 4, "out": "results"
    }

``dataset`` may instead name a built-in stand-in population
(``"builtin:acs_like"`` or ``"builtin:fire_like"``). Epsilons apply to the
private generators only. List-valued ``k``, ``mode`` or ``cap`` in an
attack entry expand into one attack per value. ``workers`` defaults to
the available parallelism, capped at 32; it never changes results.

Game ``i`` uses the same seed in every cell, so cells differ only in what
the configuration changes (common random numbers).
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import DataError, Dataset, load_csv
from .datasets import acs_like, fire_like
from .game import AttackConfig, GameConfig, GameRecord, run_games, score_all
from .sdg import DP_VARIANTS, GeneratorConfig

BUILTINS = {"acs_like": acs_like, "fire_like": fire_like}
SUMMARY_COLUMNS = ("generator", "m", "epsilon", "attack", "accuracy", "sd", "auc", "mre", "tvd")
_TOP_KEYS = {"dataset", "schema", "generators", "m", "epsilon", "attacks", "games", "n", "master_seed", "workers",
             "out", "utility_games", "utility", "thresholds"}


def default_workers() -> int:
    """Available parallelism, capped at 32."""
    return max(1, min(len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1, 32))


class ConfigError(ValueError):
    """Raised with every problem found in a config."""

    def __init__(self, problems: Sequence[str]):
        self.problems = list(problems)
        super().__init__("invalid experiment config:\n  - " + "\n  - ".join(self.problems))


@dataclass
class GeneratorEntry:
    config: GeneratorConfig
    name: str

    @property
    def private(self) -> bool:
        return self.config.variant in DP_VARIANTS


@dataclass
class ExperimentConfig:
    dataset: str
    generators: list[GeneratorEntry]
    m: list[int]
    attacks: list[AttackConfig]
    schema: str | None = None
    epsilon: list[float] = field(default_factory=lambda: [1.0, 10.0, 100.0])
    games: int = 500
    n: int = 1000
    master_seed: int = 0
    workers: int = field(default_factory=default_workers)
    out: str = "results"
    utility_games: int = 10
    utility: dict = field(default_factory=lambda: {"num_queries": 1000, "k": 3, "p": 100})
    thresholds: dict = field(default_factory=lambda: {"utility": 0.20, "privacy": 0.60})
    base_dir: Path = field(default_factory=Path.cwd, repr=False)

    @classmethod
    def from_json(cls, obj: dict, base_dir: str | Path | None = None) -> "ExperimentConfig":
        """Parse and validate; every problem is reported in one ``ConfigError``."""
        errs: list[str] = []
        if not isinstance(obj, dict):
            raise ConfigError(["config must be a JSON object"])
        for key in sorted(set(obj) - _TOP_KEYS):
            errs.append(f"unknown key {key!r}")
        for key in ("dataset", "generators", "m", "attacks"):
            if key not in obj:
                errs.append(f"missing required key {key!r}")

        dataset = obj.get("dataset")
        if dataset is not None and not isinstance(dataset, str):
            errs.append("dataset must be a path or 'builtin:<name>'")
        elif isinstance(dataset, str) and dataset.startswith("builtin:"):
            if dataset[len("builtin:"):] not in BUILTINS:
                errs.append(f"unknown built-in dataset {dataset!r}; choose from {sorted(BUILTINS)}")
        elif isinstance(dataset, str) and not obj.get("schema"):
            errs.append("a dataset path needs a 'schema' path")

        ms = obj.get("m", [])
        ms = ms if isinstance(ms, list) else [ms]
        if "m" in obj and not ms:
            errs.append("m sweep is empty")
        for m in ms:
            if not isinstance(m, int) or isinstance(m, bool) or m < 1:
                errs.append(f"m values must be positive integers, got {m!r}")
        eps = obj.get("epsilon", [1.0, 10.0, 100.0])
        eps = eps if isinstance(eps, list) else [eps]
        for e in eps:
            if not isinstance(e, (int, float)) or isinstance(e, bool) or not e > 0:
                errs.append(f"epsilon values must be positive numbers, got {e!r}")

        gens: list[GeneratorEntry] = []
        raw_gens = obj.get("generators", [])
        if "generators" in obj and (not isinstance(raw_gens, list) or not raw_gens):
            errs.append("generators must be a nonempty list")
            raw_gens = []
        for i, g in enumerate(raw_gens):
            if not isinstance(g, dict):
                errs.append(f"generators[{i}] must be an object")
                continue
            g = dict(g)
            name = g.pop("name", None) or g.get("variant", "?")
            if "m" in g:
                errs.append(f"generators[{i}]: m comes from the sweep, not the generator entry")
                g.pop("m")
            try:
                cfg = GeneratorConfig.from_json({**g, "m": 1, "epsilon": g.get("epsilon", 1.0)})
            except (TypeError, ValueError) as exc:
                errs.append(f"generators[{i}]: {exc}")
                continue
            errs.extend(f"generators[{i}]: {p}" for p in cfg.problems())
            gens.append(GeneratorEntry(cfg, str(name)))
        names = [g.name for g in gens]
        for dup in sorted({x for x in names if names.count(x) > 1}):
            errs.append(f"generator name {dup!r} is used twice; add distinct 'name' fields")

        attacks: list[AttackConfig] = []
        raw_attacks = obj.get("attacks", [])
        if "attacks" in obj and (not isinstance(raw_attacks, list) or not raw_attacks):
            errs.append("attacks must be a nonempty list")
            raw_attacks = []
        for i, a in enumerate(raw_attacks):
            try:
                for spec in _expand_attack(a):
                    ac = AttackConfig.from_json(spec)
                    errs.extend(f"attacks[{i}]: {p}" for p in ac.problems())
                    attacks.append(ac)
            except (TypeError, ValueError) as exc:
                errs.append(f"attacks[{i}]: {exc}")
        labels = [a.label for a in attacks]
        for dup in sorted({x for x in labels if labels.count(x) > 1}):
            errs.append(f"attack label {dup!r} occurs twice")

        ints = {"games": 500, "n": 1000, "master_seed": 0, "workers": default_workers(), "utility_games": 10}
        vals = {}
        for key, default in ints.items():
            v = obj.get(key, default)
            if not isinstance(v, int) or isinstance(v, bool):
                errs.append(f"{key} must be an integer, got {v!r}")
                v = default
            vals[key] = v
        if vals["games"] < 1:
            errs.append("games must be >= 1")
        if vals["n"] < 2:
            errs.append("n must be >= 2")
        if vals["workers"] < 1:
            errs.append("workers must be >= 1")
        if vals["utility_games"] < 0:
            errs.append("utility_games must be >= 0")
        if vals["master_seed"] < 0:
            errs.append("master_seed must be >= 0")

        utility = {"num_queries": 1000, "k": 3, "p": 100, **obj.get("utility", {})}
        thresholds = {"utility": 0.20, "privacy": 0.60, **obj.get("thresholds", {})}
        if errs:
            raise ConfigError(errs)
        return cls(dataset=dataset, schema=obj.get("schema"), generators=gens, m=[int(m) for m in ms],
                   attacks=attacks, epsilon=[float(e) for e in eps], out=str(obj.get("out", "results")),
                   utility=utility, thresholds=thresholds, base_dir=Path(base_dir or Path.cwd()), **vals)

    def to_json(self) -> dict:
        gens = []
        for g in self.generators:
            j = g.config.to_json()
            j.pop("m")
            j.pop("epsilon", None)
            if g.name != g.config.variant:
                j["name"] = g.name
            gens.append(j)
        return {"dataset": self.dataset, "schema": self.schema, "generators": gens, "m": self.m,
                "epsilon": self.epsilon, "attacks": [a.to_json() for a in self.attacks], "games": self.games,
                "n": self.n, "master_seed": self.master_seed, "workers": self.workers, "out": self.out,
                "utility_games": self.utility_games, "utility": self.utility, "thresholds": self.thresholds}

    def load_dataset(self) -> Dataset:
        if self.dataset.startswith("builtin:"):
            return BUILTINS[self.dataset[len("builtin:"):]]()
        return load_csv(self.base_dir / self.dataset, self.base_dir / self.schema)

    def cells(self) -> list[tuple[GeneratorEntry, int, float | None]]:
        out = []
        for g in self.generators:
            for m in self.m:
                for e in (self.epsilon if g.private else [None]):
                    out.append((g, m, e))
        return out


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config {path} is not valid JSON: {exc}"]) from exc
    return ExperimentConfig.from_json(obj, base_dir=path.parent)


def _expand_attack(a) -> list:
    if isinstance(a, str):
        return [a]
    if not isinstance(a, dict):
        raise TypeError("attack entries are names or objects")
    listy = {k: v for k, v in a.items() if k in ("k", "mode", "cap") and isinstance(v, list)}
    if not listy:
        return [a]
    keys = sorted(listy)
    out = []
    for combo in itertools.product(*(listy[k] for k in keys)):
        spec = {**a, **dict(zip(keys, combo))}
        if "name" in a and len(list(itertools.product(*(listy[k] for k in keys)))) > 1:
            spec["name"] = a["name"] + "-" + "-".join(f"{k}{v}" for k, v in zip(keys, combo))
        out.append(spec)
    return out


@dataclass
class ExperimentReport:
    cells: list[dict]
    failures: list[dict]
    config: dict
    games_played: int

    def to_json(self) -> dict:
        return {"config": self.config, "games_played": self.games_played, "failures": self.failures,
                "cells": self.cells, "tradeoff": tradeoff_table(self, **_thr(self.config))}

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentReport":
        return cls(obj["cells"], obj.get("failures", []), obj.get("config", {}), obj.get("games_played", 0))


def _thr(config: dict) -> dict:
    t = config.get("thresholds", {})
    return {"utility_threshold": t.get("utility", 0.20), "privacy_threshold": t.get("privacy", 0.60)}


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def _sort_key(row: dict):
    eps = row["epsilon"]
    return (row["generator"], int(row["m"]), -1.0 if eps is None else float(eps), row["attack"])


def summary_csv(report: ExperimentReport) -> str:
    rows = []
    for cell in report.cells:
        util = cell.get("utility") or {}
        for attack, s in cell.get("scores", {}).items():
            rows.append({"generator": cell["generator"], "m": cell["m"], "epsilon": cell["epsilon"], "attack": attack,
                         "accuracy": s["accuracy"], "sd": s["sd"], "auc": s["auc"], "mre": util.get("mre_gt10"),
                         "tvd": util.get("k_tvd")})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in sorted(rows, key=_sort_key):
        w.writerow([_fmt(r[c]) for c in SUMMARY_COLUMNS])
    return buf.getvalue()


def _mean_utility(reports: list[dict]) -> dict | None:
    if not reports:
        return None
    mres = [r["mre_gt10"] for r in reports if r["mre_gt10"] is not None]
    return {"mre_gt10": float(np.mean(mres)) if mres else None,
            "k_tvd": float(np.mean([r["k_tvd"] for r in reports])),
            "games": len(reports)}


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentReport:
    """Play every cell of the grid and write records.jsonl, summary.csv and report.json under ``cfg.out``."""
    try:
        full = cfg.load_dataset()
    except (OSError, DataError) as exc:
        raise ConfigError([f"cannot load dataset: {exc}"]) from exc
    if full.n < cfg.n:
        raise ConfigError([f"dataset has {full.n} rows, fewer than n={cfg.n}"])
    out_dir = cfg.base_dir / cfg.out if not Path(cfg.out).is_absolute() else Path(cfg.out)
    lines: list[str] = []
    cells, failures, played = [], [], 0
    for gen, m, eps in cfg.cells():
        gcfg = gen.config.with_m(m).with_epsilon(eps if gen.private else None)
        game_cfg = GameConfig(gcfg, cfg.attacks, n=cfg.n, games=cfg.games, master_seed=cfg.master_seed,
                              utility_games=cfg.utility_games, utility_params=cfg.utility)
        records = run_games(full, game_cfg, workers=cfg.workers)
        tag = {"generator": gen.name, "m": m, "epsilon": eps}
        for r in records:
            lines.append(json.dumps({**tag, **r.to_json()}, sort_keys=True))
        failed = [r for r in records if r.failed]
        failures.extend({**tag, "game_index": r.game_index, "error": r.error} for r in failed)
        played += len(records) - len(failed)
        cell = {**tag, "games": len(records) - len(failed), "failed": len(failed)}
        if len(failed) < len(records):
            cell["scores"] = {k: v.to_json() for k, v in score_all(records).items()}
            cell["a_max"] = max(s["accuracy"] for s in cell["scores"].values())
            cell["utility"] = _mean_utility([r.utility for r in records if not r.failed and r.utility])
        else:
            cell["scores"], cell["a_max"], cell["utility"] = {}, None, None
        cells.append(cell)
        if progress:
            progress(cell)
    cells.sort(key=lambda c: (c["generator"], c["m"], -1.0 if c["epsilon"] is None else c["epsilon"]))
    report = ExperimentReport(cells, failures, cfg.to_json(), played)
    _atomic_write(out_dir / "records.jsonl", "".join(line + "\n" for line in lines))
    _atomic_write(out_dir / "summary.csv", summary_csv(report))
    _atomic_write(out_dir / "report.json", json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")
    return report


def read_records(path: str | Path) -> list[tuple[dict, GameRecord]]:
    """(cell tag, record) pairs from a records.jsonl file."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                tag = {k: obj.get(k) for k in ("generator", "m", "epsilon")}
                out.append((tag, GameRecord.from_json(obj)))
    return out


def score_records(path: str | Path) -> list[dict]:
    """Per-cell, per-attack score summaries recomputed from raw records."""
    groups: dict[tuple, list[GameRecord]] = {}
    for tag, rec in read_records(path):
        groups.setdefault((tag["generator"], tag["m"], tag["epsilon"]), []).append(rec)
    out = []
    for (g, m, e), recs in sorted(groups.items(), key=lambda kv: (str(kv[0][0]), kv[0][1] or 0,
                                                                  -1.0 if kv[0][2] is None else kv[0][2])):
        if all(r.failed for r in recs):
            out.append({"generator": g, "m": m, "epsilon": e, "scores": {}, "failed": len(recs)})
            continue
        scores = {k: v.to_json() for k, v in score_all(recs).items()}
        out.append({"generator": g, "m": m, "epsilon": e, "scores": scores, "failed": sum(r.failed for r in recs)})
    return out


@dataclass
class TradeoffRow:
    generator: str
    m: int
    epsilon: float | None
    a_max: float | None
    mre: float | None
    tvd: float | None
    utility_ok: bool
    privacy_ok: bool


def tradeoff_table(report: ExperimentReport | dict, utility_threshold: float = 0.20,
                   privacy_threshold: float = 0.60) -> list[dict]:
    """Best attack accuracy per cell next to its utility, with pass flags.

    A cell has utility when both errors are below ``utility_threshold`` and
    privacy when the best attack stays below ``privacy_threshold``.
    """
    cells = report.cells if isinstance(report, ExperimentReport) else report["cells"]
    rows = []
    for c in cells:
        util = c.get("utility") or {}
        mre, tvd = util.get("mre_gt10"), util.get("k_tvd")
        a_max = c.get("a_max")
        if a_max is None and c.get("scores"):
            a_max = max(s["accuracy"] for s in c["scores"].values())
        rows.append(TradeoffRow(
            c["generator"], c["m"], c["epsilon"], a_max, mre, tvd,
            utility_ok=mre is not None and tvd is not None and mre < utility_threshold and tvd < utility_threshold,
            privacy_ok=a_max is not None and a_max < privacy_threshold,
        ).__dict__)
    return rows
