"""The attribute inference game, its repetition and scoring.

One game: subsample ``n`` records, pick a target with unique
quasi-identifiers, replace its secret by a fair coin, generate synthetic
data from the modified sample and ask every attack for the target's
secret. Attacks only ever see ``(S, x_u, X)``.

Every game draws from its own ``SeedSequence(master_seed, spawn_key=(i,))``,
so games are independent of each other, of worker scheduling and of how
many games are run.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .attacks.baselines import dcr_attack, ml_attack, random_guess
from .attacks.lp import AttackGuess, QueryMode, ReconConfig, recon_attack
from .data import Dataset, QuasiIdentifierTable, split_secret, subsample, unique_qi_indices
from .sdg import GeneratorConfig, ThreeWayWorkload, generate
from .utility import utility_report

ATTACK_KINDS = ("recon", "dcr", "ml", "random")

AttackFn = Callable[[Dataset, np.ndarray, QuasiIdentifierTable, np.random.Generator], AttackGuess]
GeneratorFn = Callable[[Dataset, np.random.Generator], Dataset]


class NoUniqueTarget(RuntimeError):
    pass


class EmptyRecords(ValueError):
    pass


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "recon"
    k: int = 3
    mode: str = "conditional"
    cap: int = 100_000
    alpha: float = 1.0
    name: str | None = None

    def problems(self) -> list[str]:
        out = []
        if self.kind not in ATTACK_KINDS:
            out.append(f"unknown attack kind {self.kind!r}; expected one of {', '.join(ATTACK_KINDS)}")
        if self.kind == "recon":
            if self.k < 2:
                out.append(f"recon: k must be >= 2, got {self.k}")
            if self.mode not in {m.value for m in QueryMode}:
                out.append(f"recon: mode must be 'marginal' or 'conditional', got {self.mode!r}")
            if self.cap < 1:
                out.append("recon: cap must be >= 1")
        if self.kind == "ml" and not self.alpha > 0:
            out.append("ml: alpha must be > 0")
        return out

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        if self.kind != "recon":
            return self.kind
        parts = []
        if self.k != 3:
            parts.append(f"k{self.k}")
        if self.mode != "conditional":
            parts.append(self.mode)
        if self.cap != 100_000:
            parts.append(f"q{self.cap}")
        return "-".join(["recon"] + parts)

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "recon":
            out.update(k=self.k, mode=self.mode, cap=self.cap)
        if self.kind == "ml":
            out["alpha"] = self.alpha
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, obj) -> "AttackConfig":
        if isinstance(obj, str):
            return cls(kind=obj)
        return cls(**obj)

    def run(self, s: Dataset, x_u: np.ndarray, x: QuasiIdentifierTable, rng: np.random.Generator) -> AttackGuess:
        if self.kind == "recon":
            return recon_attack(s, x_u, x, ReconConfig(self.k, self.mode, self.cap), rng)
        if self.kind == "dcr":
            return dcr_attack(s, x_u, rng)
        if self.kind == "ml":
            return ml_attack(s, x_u, self.alpha)
        return random_guess(rng)


@dataclass
class GameConfig:
    """``generator`` and entries of ``attacks`` may also be plain callables

    (``gen(d, rng) -> Dataset`` and ``attack(s, x_u, x, rng) -> AttackGuess``).
    """

    generator: GeneratorConfig | GeneratorFn
    attacks: Sequence[AttackConfig | AttackFn] = (AttackConfig(),)
    n: int = 1000
    games: int = 500
    master_seed: int = 0
    max_retries: int = 10
    utility_games: int = 0
    utility_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.games < 1:
            raise ValueError("games must be at least 1")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        labels = self.attack_labels()
        if len(set(labels)) != len(labels):
            raise ValueError(f"attack labels must be distinct, got {labels}")

    def attack_labels(self) -> list[str]:
        return [a.label if isinstance(a, AttackConfig) else getattr(a, "__name__", "attack") for a in self.attacks]


@dataclass
class GameRecord:
    game_index: int
    target_row: int | None
    true_bit: int | None
    attacks: dict[str, dict]
    retries: int = 0
    error: str | None = None
    utility: dict | None = None
    generator_seconds: float = field(default=0.0, compare=False)
    attack_seconds: dict[str, float] = field(default_factory=dict, compare=False)

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "GameRecord":
        known = {"game_index", "target_row", "true_bit", "attacks", "retries", "error", "utility",
                 "generator_seconds", "attack_seconds"}
        return cls(**{k: v for k, v in obj.items() if k in known})


def game_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(index,))


_WORKLOADS: dict[tuple[int, ...], ThreeWayWorkload] = {}


def _workload(cards) -> ThreeWayWorkload:
    cards = tuple(cards)
    if cards not in _WORKLOADS:
        _WORKLOADS[cards] = ThreeWayWorkload(cards)
    return _WORKLOADS[cards]


def _synthesize(cfg: GameConfig, d: Dataset, rng: np.random.Generator) -> Dataset:
    gen = cfg.generator
    if isinstance(gen, GeneratorConfig):
        wl = _workload(d.schema.cardinalities) if gen.variant in ("RAP", "RapDP") else None
        return generate(gen, d, rng, wl)
    return gen(d, rng)


def play_one(full: Dataset, cfg: GameConfig, seed, index: int = 0) -> GameRecord:
    """Run the six steps of one game; raises ``NoUniqueTarget`` once retries run out."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_sample, s_target, s_gen, s_attack, s_util = ss.spawn(5)
    r_sample, r_target, r_gen = (np.random.default_rng(s) for s in (s_sample, s_target, s_gen))
    attack_rngs = [np.random.default_rng(s) for s in s_attack.spawn(len(cfg.attacks))]

    # 1-2: a sample with at least one unique quasi-identifier tuple, and a target among them
    for retries in range(cfg.max_retries + 1):
        d = subsample(full, cfg.n, r_sample)
        x, y = split_secret(d)
        candidates = unique_qi_indices(x)
        if candidates:
            break
    else:
        raise NoUniqueTarget(f"no unique quasi-identifiers in {cfg.max_retries + 1} samples of {cfg.n}")
    u = int(candidates[r_target.integers(len(candidates))])
    # 3: the target's secret becomes a fair coin; no other cell changes
    y_prime = y.copy()
    y_prime[u] = r_target.integers(2)
    rows = d.rows.copy()
    rows[:, -1] = y_prime
    d_prime = d.with_rows(rows)
    # 4: synthetic data from the modified sample
    t0 = time.perf_counter()
    s = _synthesize(cfg, d_prime, r_gen)
    gen_seconds = time.perf_counter() - t0
    # 5-6: the adversary sees S, the target's quasi-identifiers and X only
    x_u = x.rows[u].copy()
    out, secs = {}, {}
    for label, attack, rng in zip(cfg.attack_labels(), cfg.attacks, attack_rngs):
        t0 = time.perf_counter()
        if isinstance(attack, AttackConfig):
            g = attack.run(s, x_u, x, rng)
        else:
            g = attack(s, x_u, x, rng)
        secs[label] = time.perf_counter() - t0
        out[label] = {"guess": int(g.guess), "score": float(g.score)}
    util = None
    if index < cfg.utility_games:
        util = utility_report(d_prime, s, np.random.default_rng(s_util), **cfg.utility_params).to_json()
    return GameRecord(index, u, int(y_prime[u]), out, retries, None, util, gen_seconds, secs)


def _play_safe(full: Dataset, cfg: GameConfig, index: int) -> GameRecord:
    try:
        return play_one(full, cfg, game_seed(cfg.master_seed, index), index)
    except Exception as exc:  # a failed game is recorded, never fatal to the batch
        return GameRecord(index, None, None, {}, error=f"{type(exc).__name__}: {exc}")


def _play_chunk(full: Dataset, cfg: GameConfig, indices: Sequence[int]) -> list[GameRecord]:
    return [_play_safe(full, cfg, i) for i in indices]


def run_games(full: Dataset, cfg: GameConfig, workers: int = 1, indices: Sequence[int] | None = None,
              on_record: Callable[[GameRecord], None] | None = None) -> list[GameRecord]:
    """Play ``cfg.games`` games (or just ``indices``); records come back in index order."""
    indices = list(range(cfg.games)) if indices is None else list(indices)
    if workers <= 1 or len(indices) <= 1:
        records = []
        for i in indices:
            rec = _play_safe(full, cfg, i)
            if on_record:
                on_record(rec)
            records.append(rec)
        return records
    chunks = [indices[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_play_chunk, [full] * len(chunks), [cfg] * len(chunks), chunks))
    records = sorted((r for part in parts for r in part), key=lambda r: r.game_index)
    if on_record:
        for rec in records:
            on_record(rec)
    return records


@dataclass
class ScoreSummary:
    attack: str
    games: int
    accuracy: float
    sd: float
    auc: float | None
    fpr: list[float]
    tpr: list[float]

    def to_json(self) -> dict:
        return asdict(self)


def roc_curve(truth, scores) -> tuple[np.ndarray, np.ndarray]:
    """ROC points from (0, 0) to (1, 1), one per distinct score threshold (``score >= thr`` is positive)."""
    truth = np.asarray(truth, dtype=np.int64)
    scores = np.asarray(scores, dtype=float)
    pos, neg = int(truth.sum()), int(len(truth) - truth.sum())
    order = np.argsort(-scores, kind="stable")
    s_sorted, t_sorted = scores[order], truth[order]
    ends = np.r_[np.nonzero(np.diff(s_sorted))[0], len(s_sorted) - 1]
    tp = np.cumsum(t_sorted)[ends]
    fp = (ends + 1) - tp
    tpr = np.r_[0.0, tp / pos] if pos else np.r_[0.0, np.zeros(len(ends))]
    fpr = np.r_[0.0, fp / neg] if neg else np.r_[0.0, np.zeros(len(ends))]
    return fpr, tpr


def auc_trapezoid(fpr, tpr) -> float:
    fpr, tpr = np.asarray(fpr), np.asarray(tpr)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def score(records: Sequence[GameRecord], attack: str | None = None) -> ScoreSummary:
    """Accuracy, the sample sd of the win indicator, and ROC/AUC of the attack's scores.

    AUC is ``None`` when only one secret value occurs among the games.
    """
    ok = [r for r in records if not r.failed]
    if not ok:
        raise EmptyRecords("no completed games to score")
    if attack is None:
        labels = list(ok[0].attacks)
        if len(labels) != 1:
            raise ValueError(f"several attacks recorded ({labels}); name one")
        attack = labels[0]
    truth = np.array([r.true_bit for r in ok])
    guess = np.array([r.attacks[attack]["guess"] for r in ok])
    scores = np.array([r.attacks[attack]["score"] for r in ok])
    wins = (guess == truth).astype(float)
    sd = float(wins.std(ddof=1)) if len(wins) > 1 else 0.0
    fpr, tpr = roc_curve(truth, scores)
    both = 0 < truth.sum() < len(truth)
    return ScoreSummary(attack, len(ok), float(wins.mean()), sd, auc_trapezoid(fpr, tpr) if both else None,
                        fpr.tolist(), tpr.tolist())


def score_all(records: Sequence[GameRecord]) -> dict[str, ScoreSummary]:
    ok = [r for r in records if not r.failed]
    if not ok:
        raise EmptyRecords("no completed games to score")
    return {a: score(ok, a) for a in ok[0].attacks}


def max_accuracy(summaries: dict[str, ScoreSummary]) -> float:
    """Best accuracy over attacks, all scored on the same games."""
    return max(s.accuracy for s in summaries.values())


def binomial_halfwidth(games: int, p: float = 0.5, sigmas: float = 3.0) -> float:
    return sigmas * math.sqrt(p * (1 - p) / games)
