"""Attribute inference attacks on synthetic data."""
from .baselines import (CategoricalNB, CollapsedSynth, EmptyDataset, collapse_by_mode, dcr_attack, dcr_guess,
                        ml_attack, nb_fit, random_guess)
from .lp import (AttackGuess, NoQueries, QueryMode, ReconConfig, ReconstructionProblem, ReconstructionSolution,
                 SolverError, SolverStatus, TargetNotFound, build_problem, decode, lp_text, lp_triplets,
                 recon_attack, solve)

__all__ = [
    "AttackGuess", "CategoricalNB", "CollapsedSynth", "EmptyDataset", "NoQueries", "QueryMode", "ReconConfig",
    "ReconstructionProblem", "ReconstructionSolution", "SolverError", "SolverStatus", "TargetNotFound",
    "build_problem", "collapse_by_mode", "dcr_attack", "dcr_guess", "decode", "lp_text", "lp_triplets",
    "ml_attack", "nb_fit", "random_guess", "recon_attack", "solve",
]
