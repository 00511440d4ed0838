# %% [markdown]
# # Differentially private generators against the attack
#
# The noise primitives first, then how the privacy budget of the private
# relaxed-projection generator changes what the attack can recover.

# %%
from __future__ import annotations

import numpy as np
from scipy import stats

from linrecon.datasets import fire_like
from linrecon.game import AttackConfig, GameConfig, run_games, score_all
from linrecon.mechanisms import analytic_gaussian_sigma, exponential_mechanism, gaussian_noise, laplace_noise
from linrecon.sdg import GeneratorConfig
from linrecon.sdg.rap import privacy_events

rng = np.random.default_rng(0)

# %% [markdown]
# ## Noise primitives

# %%
print("Laplace KS p:", round(stats.kstest(laplace_noise(1.5, 10_000, rng), "laplace", args=(0, 1.5)).pvalue, 3))
print("Gaussian KS p:", round(stats.kstest(gaussian_noise(0.3, 10_000, rng), "norm", args=(0, 0.3)).pvalue, 3))
for eps in (0.5, 1.0, 10.0):
    print(f"analytic Gaussian sigma at eps={eps}, delta=1e-6: {analytic_gaussian_sigma(eps, 1e-6):.3f}")
picks = np.bincount([exponential_mechanism([0.0, 1.0, 2.0], 2.0, 1.0, rng) for _ in range(5000)], minlength=3)
print("exponential mechanism picks:", picks / picks.sum())

# %% [markdown]
# ## Budget accounting
#
# Each round selects cells with the exponential mechanism and measures them
# with Gaussian noise. A round that would select every remaining cell skips
# selection, so a single round over the whole workload spends everything on
# one measurement.

# %%
for rounds, per_round in ((10, 50), (1, 100_000)):
    print(f"rounds={rounds} queries/round={per_round}: (select, measure) events =",
          privacy_events(22_456, rounds, per_round))

# %% [markdown]
# ## Attack accuracy across epsilon
#
# A short run; the acceptance suite plays 100 games per budget.

# %%
pop = fire_like()
games = 10
for eps in (1.0, 100.0):
    gen = GeneratorConfig("RapDP", 100_000, epsilon=eps, iterations=300, relaxed_rows=300, rounds=1,
                          queries_per_round=100_000)
    s = score_all(run_games(pop, GameConfig(gen, [AttackConfig()], games=games, master_seed=3)))["recon"]
    print(f"eps={eps:>5}: recon accuracy {s.accuracy:.2f} over {games} games")
