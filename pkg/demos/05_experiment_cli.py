# %% [markdown]
# # Running an experiment grid from the command line
#
# An experiment is a JSON config: a dataset, generators, synthetic sizes,
# privacy budgets and attacks. ``linrecon run`` plays every cell and writes
# ``records.jsonl``, ``summary.csv`` and ``report.json``. ``score`` and
# ``tradeoff`` post-process them. Here the CLI is driven through ``main``.

# %%
from __future__ import annotations

import json
import tempfile
from pathlib import Path

from linrecon.cli import main

work = Path(tempfile.mkdtemp(prefix="linrecon-demo-"))
config = {
    "dataset": "builtin:fire_like",
    "generators": [{"variant": "NonPrivate"}, {"variant": "PrivBayes", "degree": 2}],
    "m": [100, 10_000],
    "epsilon": [1, 100],
    "attacks": [{"kind": "recon", "k": [2, 3]}, "dcr", "ml"],
    "games": 8, "n": 1000, "master_seed": 0, "workers": 1,
    "utility_games": 2, "out": "results",
}
(work / "experiment.json").write_text(json.dumps(config, indent=2))

# %%
code = main(["run", str(work / "experiment.json")])
print("exit code", code)
print((work / "results" / "summary.csv").read_text())

# %% [markdown]
# ## Scores from raw records, and the tradeoff table
#
# A cell keeps privacy when its best attack stays below the privacy
# threshold, and keeps utility when both error metrics stay below the
# utility threshold.

# %%
main(["score", str(work / "results" / "records.jsonl"), "--out", str(work / "scores.json")])
print(len(json.loads((work / "scores.json").read_text())), "cells rescored")
main(["tradeoff", str(work / "results" / "report.json")])

# %% [markdown]
# ## Invalid configs are rejected before any work starts

# %%
bad = {**config, "m": [0], "attacks": ["psychic"], "games": 0}
(work / "bad.json").write_text(json.dumps(bad))
print("exit code", main(["run", str(work / "bad.json")]))
