"""Linear reconstruction attacks on synthetic tabular data.

The package plays attribute inference games: a target's binary secret is
randomised, a synthetic data generator is run on the modified data, and
attacks try to recover the secret from the synthetic records and the
public quasi-identifiers. The main attack answers k-way marginal queries
on the synthetic data and solves a linear program for the secret column.
"""
from .attacks import (AttackGuess, QueryMode, ReconConfig, build_problem, dcr_attack, decode, ml_attack, nb_fit,
                      recon_attack, solve)
from .data import (AttributeDomain, Dataset, DomainSchema, QuasiIdentifierTable, load_csv, load_schema, split_secret,
                   subsample, unique_qi_indices)
from .game import AttackConfig, GameConfig, GameRecord, play_one, run_games, score, score_all
from .queries import MarginalQuery, QuerySet, enumerate_secret_queries, eval_fraction, evaluate_fractions
from .sdg import GeneratorConfig, generate
from .utility import k_tvd, mre_gt10, tvd_subset, utility_report

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "AttackGuess", "AttributeDomain", "Dataset", "DomainSchema", "GameConfig", "GameRecord",
    "GeneratorConfig", "MarginalQuery", "QuasiIdentifierTable", "QueryMode", "QuerySet", "ReconConfig",
    "build_problem", "dcr_attack", "decode", "enumerate_secret_queries", "eval_fraction", "evaluate_fractions",
    "generate", "k_tvd", "load_csv", "load_schema", "ml_attack", "mre_gt10", "nb_fit", "play_one", "recon_attack",
    "run_games", "score", "score_all", "solve", "split_secret", "subsample", "tvd_subset", "unique_qi_indices",
    "utility_report",
]
