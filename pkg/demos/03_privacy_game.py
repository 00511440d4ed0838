# %% [markdown]
# # The attribute inference game
#
# Each game draws 1000 records, picks a target whose quasi-identifiers are
# unique, replaces its secret by a coin flip and hands synthetic data to the
# attacks. A coin-flip target means guessing the base rate wins only half
# the time, so accuracy above 0.5 is leakage.

# %%
from __future__ import annotations

import numpy as np

from linrecon.datasets import fire_like
from linrecon.game import AttackConfig, GameConfig, binomial_halfwidth, play_one, game_seed, run_games, score_all
from linrecon.sdg import GeneratorConfig

pop = fire_like()
attacks = [AttackConfig(), AttackConfig("dcr"), AttackConfig("ml"), AttackConfig("random")]

# %% [markdown]
# ## One game, step by step

# %%
rec = play_one(pop, GameConfig(GeneratorConfig("NonPrivate", 100_000), attacks), game_seed(0, 0))
print("target row", rec.target_row, "secret after the coin", rec.true_bit)
for name, g in rec.attacks.items():
    print(f"  {name:<7} guess {g['guess']} score {g['score']:.3f}")

# %% [markdown]
# ## Repeating the game
#
# Games are seeded from ``(master_seed, index)``, so every cell below sees
# the same samples and targets and only the generator changes.

# %%
games = 40
for gen in (GeneratorConfig("NonPrivate", 100), GeneratorConfig("NonPrivate", 100_000),
            GeneratorConfig("IndHist", 100_000)):
    summaries = score_all(run_games(pop, GameConfig(gen, attacks, games=games, master_seed=1)))
    row = "  ".join(f"{k} {v.accuracy:.2f}" for k, v in summaries.items())
    print(f"{gen.variant:<10} m={gen.m:<7} {row}")
print(f"chance band at {games} games: 0.5 +/- {binomial_halfwidth(games):.2f}")

# %% [markdown]
# ## Scores and ROC
#
# The reconstruction attack's score is the relaxed secret value for the
# target, so its ROC curve has many thresholds. DCR only emits its guess.

# %%
recs = run_games(pop, GameConfig(GeneratorConfig("NonPrivate", 1000), attacks[:3], games=games, master_seed=2))
for name, s in score_all(recs).items():
    auc = "n/a" if s.auc is None else f"{s.auc:.3f}"
    print(f"{name:<6} accuracy {s.accuracy:.2f} +/- {s.sd:.2f}  AUC {auc}  ROC points {len(s.fpr)}")
