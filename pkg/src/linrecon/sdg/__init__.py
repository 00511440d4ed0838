"""Synthetic data generators behind one configuration type.

``generate(cfg, d, rng)`` dispatches on ``cfg.variant``:

=========== ==========================================================
NonPrivate  resample ``d`` with replacement
IndHist     independent per-attribute histograms
BayNet      greedy Bayesian network of the given degree
PrivBayes   the same network fitted under epsilon-DP
RAP         relaxed projection onto all 3-way marginals
RapDP       adaptive relaxed projection under (epsilon, delta)-DP
=========== ==========================================================
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from ..data import Dataset
from .basic import gen_indhist, gen_nonprivate
from .bayesnet import BayesNetModel, DegreeTooLarge, fit_bayes_net, sample_bayes_net
from .rap import (NonFiniteLoss, RelaxedDataset, ThreeWayWorkload, rap_dp_fit, rap_fit,
                  round_relaxed)

VARIANTS = ("NonPrivate", "IndHist", "BayNet", "PrivBayes", "RAP", "RapDP")
_PARAMS = {
    "NonPrivate": (),
    "IndHist": (),
    "BayNet": ("degree",),
    "PrivBayes": ("degree", "epsilon"),
    "RAP": ("iterations", "relaxed_rows", "learning_rate"),
    "RapDP": ("iterations", "relaxed_rows", "learning_rate", "epsilon", "delta", "rounds", "queries_per_round"),
}
DP_VARIANTS = ("PrivBayes", "RapDP")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratorConfig:
    variant: str
    m: int
    degree: int = 3
    epsilon: float | None = None
    delta: float = 1e-6
    iterations: int = 2000
    relaxed_rows: int = 1000
    learning_rate: float = 1000.0
    rounds: int = 10
    queries_per_round: int = 50

    def problems(self) -> list[str]:
        """Every violated invariant, as messages (empty when valid)."""
        out = []
        if self.variant not in VARIANTS:
            return [f"unknown generator variant {self.variant!r}; expected one of {', '.join(VARIANTS)}"]
        used = _PARAMS[self.variant]
        if not isinstance(self.m, (int, np.integer)) or self.m < 1:
            out.append(f"{self.variant}: m must be a positive integer, got {self.m!r}")
        if "degree" in used and self.degree < 1:
            out.append(f"{self.variant}: degree must be >= 1")
        if "epsilon" in used and (self.epsilon is None or not self.epsilon > 0):
            out.append(f"{self.variant}: epsilon must be > 0, got {self.epsilon!r}")
        if "delta" in used and not 0 < self.delta < 1:
            out.append(f"{self.variant}: delta must lie in (0, 1)")
        if "iterations" in used and self.iterations < 1:
            out.append(f"{self.variant}: iterations must be >= 1")
        if "relaxed_rows" in used and self.relaxed_rows < 1:
            out.append(f"{self.variant}: relaxed_rows must be >= 1")
        if "learning_rate" in used and not self.learning_rate > 0:
            out.append(f"{self.variant}: learning_rate must be > 0")
        if "rounds" in used and (self.rounds < 1 or self.queries_per_round < 1):
            out.append(f"{self.variant}: rounds and queries_per_round must be >= 1")
        return out

    def validate(self) -> "GeneratorConfig":
        errs = self.problems()
        if errs:
            raise ConfigError("; ".join(errs))
        return self

    @property
    def is_private(self) -> bool:
        return self.variant in DP_VARIANTS

    def with_m(self, m: int) -> "GeneratorConfig":
        return GeneratorConfig(**{**asdict(self), "m": int(m)})

    def with_epsilon(self, epsilon: float | None) -> "GeneratorConfig":
        return GeneratorConfig(**{**asdict(self), "epsilon": epsilon})

    def to_json(self) -> dict:
        """Only the fields the variant uses."""
        out = {"variant": self.variant, "m": int(self.m)}
        for name in _PARAMS.get(self.variant, ()):
            out[name] = getattr(self, name)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "GeneratorConfig":
        known = {f.name for f in fields(cls)}
        extra = sorted(set(obj) - known)
        if extra:
            raise ConfigError(f"unknown generator fields: {', '.join(extra)}")
        if "variant" not in obj or "m" not in obj:
            raise ConfigError("generator config needs 'variant' and 'm'")
        return cls(**obj)


def generate(cfg: GeneratorConfig, d: Dataset, rng: np.random.Generator,
             workload: ThreeWayWorkload | None = None) -> Dataset:
    """Draw ``cfg.m`` synthetic records from ``d``.

    ``workload`` lets repeated RAP runs on one schema share the cell layout.
    """
    cfg.validate()
    v, m = cfg.variant, int(cfg.m)
    if v == "NonPrivate":
        return gen_nonprivate(d, m, rng)
    if v == "IndHist":
        return gen_indhist(d, m, rng)
    if v in ("BayNet", "PrivBayes"):
        model = fit_bayes_net(d, cfg.degree, cfg.epsilon if v == "PrivBayes" else None, rng)
        return d.with_rows(sample_bayes_net(model, m, rng))
    if v == "RAP":
        relaxed = rap_fit(d, cfg.iterations, cfg.relaxed_rows, cfg.learning_rate, rng, workload)
    else:
        relaxed = rap_dp_fit(d, cfg.epsilon, cfg.delta, cfg.rounds, cfg.queries_per_round, cfg.iterations,
                             cfg.relaxed_rows, cfg.learning_rate, rng, workload)
    return d.with_rows(round_relaxed(relaxed, m, rng))


__all__ = [
    "BayesNetModel", "ConfigError", "DegreeTooLarge", "GeneratorConfig", "NonFiniteLoss",
    "RelaxedDataset", "ThreeWayWorkload", "VARIANTS", "fit_bayes_net", "gen_indhist", "gen_nonprivate",
    "generate", "rap_dp_fit", "rap_fit", "round_relaxed", "sample_bayes_net",
]
