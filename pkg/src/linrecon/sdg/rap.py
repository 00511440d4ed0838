"""Relaxed projection synthesizers over all 3-way marginals.

The synthetic dataset is relaxed to ``r`` rows of per-attribute probability
vectors, parameterised by softmax logits. The relaxed answer of a 3-way
cell is the row-average of the product of the three matching entries, so
every table is a sum of rank-one tensors and the gradient is exact.

Workload layout: for each attribute pair (b, c) with b >= 1 and c > b, one
block of shape ``(offset[b], card[b] * card[c])`` holds the tables of every
triple (a, b, c) with a < b. Row ``offset[a] + v_a`` of that block is the
slice for ``a = v_a``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..mechanisms import analytic_gaussian_sigma, exponential_top_k, gaussian_noise


class NonFiniteLoss(FloatingPointError):
    pass


class ThreeWayWorkload:
    """All 3-way marginal cells of a schema, evaluated on relaxed data."""

    def __init__(self, cards):
        self.cards = tuple(int(c) for c in cards)
        if len(self.cards) < 3:
            raise ValueError("3-way marginals need at least three attributes")
        self.offsets = np.concatenate([[0], np.cumsum(self.cards)]).astype(np.int64)
        self.width = int(self.offsets[-1])
        self.pairs = [(b, c) for b in range(1, len(self.cards)) for c in range(b + 1, len(self.cards))]
        sizes = [int(self.offsets[b]) * self.cards[b] * self.cards[c] for b, c in self.pairs]
        self.starts = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        self.size = int(self.starts[-1])
        self._triple_ids = None

    def __len__(self) -> int:
        return self.size

    def one_hot(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.int64)
        out = np.zeros((len(rows), self.width))
        for j in range(len(self.cards)):
            out[np.arange(len(rows)), self.offsets[j] + rows[:, j]] = 1.0
        return out

    def answers(self, probs: np.ndarray) -> np.ndarray:
        r = probs.shape[0]
        out = np.empty(self.size)
        for i, (b, c) in enumerate(self.pairs):
            kr = self._kr(probs, b, c)
            block = probs[:, : self.offsets[b]].T @ kr
            out[self.starts[i]:self.starts[i + 1]] = block.reshape(-1) / r
        return out

    def vjp(self, probs: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. ``probs`` of ``g . answers(probs)``."""
        return self._sweep(probs, g=g)[1]

    def loss_and_grad(self, probs: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None):
        """Squared error against ``target`` (restricted to ``mask``) and its gradient w.r.t. ``probs``."""
        return self._sweep(probs, target=target, mask=mask)

    def _sweep(self, probs, g=None, target=None, mask=None):
        # One pass over the pair blocks; each Khatri-Rao product is reused for both directions.
        r = probs.shape[0]
        grad = np.zeros_like(probs)
        loss = 0.0
        for i, (b, c) in enumerate(self.pairs):
            ob = self.offsets[b]
            cb, cc = self.cards[b], self.cards[c]
            lo, hi = self.starts[i], self.starts[i + 1]
            if mask is not None and not mask[lo:hi].any():
                continue
            kr = self._kr(probs, b, c)
            head = probs[:, :ob]
            if g is None:
                resid = (head.T @ kr).reshape(-1) / r - target[lo:hi]
                if mask is not None:
                    resid *= mask[lo:hi]
                loss += float(resid @ resid)
                gb = (2.0 / r) * resid.reshape(ob, cb * cc)
            else:
                gb = g[lo:hi].reshape(ob, cb * cc) / r
                if not gb.any():
                    continue
            grad[:, :ob] += kr @ gb.T
            dkr = (head @ gb).reshape(r, cb, cc)
            pb = probs[:, self.offsets[b]:self.offsets[b + 1]]
            pc = probs[:, self.offsets[c]:self.offsets[c + 1]]
            grad[:, self.offsets[b]:self.offsets[b + 1]] += np.einsum("rjk,rk->rj", dkr, pc)
            grad[:, self.offsets[c]:self.offsets[c + 1]] += np.einsum("rjk,rj->rk", dkr, pb)
        return loss, grad

    def _kr(self, probs, b, c):
        pb = probs[:, self.offsets[b]:self.offsets[b + 1]]
        pc = probs[:, self.offsets[c]:self.offsets[c + 1]]
        return (pb[:, :, None] * pc[:, None, :]).reshape(len(probs), -1)

    def triple_ids(self) -> np.ndarray:
        """For every cell, the index of its attribute triple (for sensitivity bookkeeping)."""
        if self._triple_ids is None:
            ids = np.empty(self.size, dtype=np.int64)
            d = len(self.cards)
            for i, (b, c) in enumerate(self.pairs):
                ob = int(self.offsets[b])
                attr_of_row = np.repeat(np.arange(b), self.cards[:b])
                tid = attr_of_row * d * d + b * d + c
                ids[self.starts[i]:self.starts[i + 1]] = np.repeat(tid, self.cards[b] * self.cards[c])
                assert len(attr_of_row) == ob
            self._triple_ids = ids
        return self._triple_ids


def softmax_blocks(theta: np.ndarray, offsets) -> np.ndarray:
    out = np.empty_like(theta)
    for lo, hi in zip(offsets[:-1], offsets[1:]):
        z = theta[:, lo:hi] - theta[:, lo:hi].max(axis=1, keepdims=True)
        e = np.exp(z)
        out[:, lo:hi] = e / e.sum(axis=1, keepdims=True)
    return out


def softmax_blocks_vjp(probs: np.ndarray, g: np.ndarray, offsets) -> np.ndarray:
    out = np.empty_like(g)
    for lo, hi in zip(offsets[:-1], offsets[1:]):
        p, gg = probs[:, lo:hi], g[:, lo:hi]
        out[:, lo:hi] = p * (gg - (p * gg).sum(axis=1, keepdims=True))
    return out


@dataclass
class RelaxedDataset:
    """``rows x sum(cards)`` matrix whose per-attribute blocks are probability simplices."""

    probs: np.ndarray
    cards: tuple[int, ...]
    losses: list[float] | None = None

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.cards)]).astype(np.int64)


def relaxed_loss(theta, workload: ThreeWayWorkload, target, mask=None):
    """Squared L2 query error of the relaxed dataset and its gradient in logit space."""
    probs = softmax_blocks(theta, workload.offsets)
    loss, grad = workload.loss_and_grad(probs, target, mask)
    return loss, softmax_blocks_vjp(probs, grad, workload.offsets)


def _descend(theta, workload, target, mask, iterations, lr, losses):
    for _ in range(iterations):
        loss, grad = relaxed_loss(theta, workload, target, mask)
        if not np.isfinite(loss) or not np.isfinite(grad).all():
            raise NonFiniteLoss("relaxed objective diverged; lower the learning rate")
        losses.append(loss)
        theta -= lr * grad
    return theta


def _init_theta(relaxed_rows, width, rng):
    return rng.normal(0.0, 1.0, size=(relaxed_rows, width))


def rap_fit(d: Dataset, iterations: int = 2000, relaxed_rows: int = 1000, learning_rate: float = 1000.0,
            rng: np.random.Generator | None = None, workload: ThreeWayWorkload | None = None) -> RelaxedDataset:
    """Fixed-step gradient descent on the squared error of every 3-way marginal."""
    rng = rng if rng is not None else np.random.default_rng()
    workload = workload or ThreeWayWorkload(d.schema.cardinalities)
    target = workload.answers(workload.one_hot(d.rows))
    theta = _init_theta(relaxed_rows, workload.width, rng)
    losses: list[float] = []
    theta = _descend(theta, workload, target, None, iterations, learning_rate, losses)
    losses.append(relaxed_loss(theta, workload, target)[0])
    return RelaxedDataset(softmax_blocks(theta, workload.offsets), workload.cards, losses)


def measurement_sensitivity(cell_ids: np.ndarray, workload: ThreeWayWorkload, n: int) -> float:
    """L2 sensitivity of a vector of 3-way cell fractions under replacing one record.

    A replaced record moves at most two cells of any one table, each by 1/n.
    """
    _, per_table = np.unique(workload.triple_ids()[cell_ids], return_counts=True)
    return float(np.sqrt(np.minimum(per_table, 2).sum())) / n


def privacy_events(size: int, rounds: int, queries_per_round: int) -> tuple[int, int]:
    """(selection events, measurement events) for an adaptive schedule.

    A round whose selection would take every remaining cell selects nothing
    privately and spends no budget on it; once the workload is used up the
    remaining rounds measure nothing either.
    """
    select = measure = 0
    remaining = size
    for _ in range(rounds):
        if remaining <= 0:
            break
        if queries_per_round < remaining:
            select += 1
        measure += 1
        remaining -= min(queries_per_round, remaining)
    return select, measure


def rap_dp_fit(d: Dataset, epsilon: float, delta: float = 1e-6, rounds: int = 10, queries_per_round: int = 50,
               iterations: int = 2000, relaxed_rows: int = 1000, learning_rate: float = 1000.0,
               rng: np.random.Generator | None = None,
               workload: ThreeWayWorkload | None = None) -> RelaxedDataset:
    """Adaptive select-measure-project loop under (epsilon, delta)-DP.

    Each round picks the cells with the largest current error via the
    exponential mechanism, measures them with calibrated Gaussian noise and
    runs ``iterations // rounds`` descent steps against every noisy
    measurement so far. Budget is split evenly over all events (basic
    composition); delta goes entirely to the Gaussian measurements.
    """
    rng = rng if rng is not None else np.random.default_rng()
    if epsilon <= 0 or not 0 < delta < 1:
        raise ValueError("need epsilon > 0 and 0 < delta < 1")
    if rounds < 1 or queries_per_round < 1:
        raise ValueError("rounds and queries_per_round must be positive")
    workload = workload or ThreeWayWorkload(d.schema.cardinalities)
    n = d.n
    true = workload.answers(workload.one_hot(d.rows))
    n_select, n_measure = privacy_events(workload.size, rounds, queries_per_round)
    eps_event = epsilon / (n_select + n_measure)
    delta_event = delta / n_measure

    theta = _init_theta(relaxed_rows, workload.width, rng)
    measured = np.zeros(workload.size, dtype=bool)
    noisy = np.zeros(workload.size)
    losses: list[float] = []
    steps = max(iterations // rounds, 1)
    for _ in range(rounds):
        free = np.nonzero(~measured)[0]
        if len(free) == 0:
            theta = _descend(theta, workload, noisy, measured, steps, learning_rate, losses)
            continue
        if queries_per_round < len(free):
            current = workload.answers(softmax_blocks(theta, workload.offsets))
            err = np.abs(current[free] - true[free])
            chosen = free[exponential_top_k(err, queries_per_round, eps_event, 1.0 / n, rng)]
        else:
            chosen = free
        sigma = analytic_gaussian_sigma(eps_event, delta_event, measurement_sensitivity(chosen, workload, n))
        noisy[chosen] = true[chosen] + gaussian_noise(sigma, len(chosen), rng)
        measured[chosen] = True
        theta = _descend(theta, workload, noisy, measured, steps, learning_rate, losses)
    losses.append(relaxed_loss(theta, workload, noisy, measured)[0])
    return RelaxedDataset(softmax_blocks(theta, workload.offsets), workload.cards, losses)


def round_relaxed(r: RelaxedDataset, m: int, rng: np.random.Generator, chunk: int = 1 << 17) -> np.ndarray:
    """Randomised rounding: pick a relaxed row uniformly, then sample each attribute from its block."""
    probs = r.probs
    offsets = r.offsets
    pick = rng.integers(0, len(probs), size=m)
    out = np.empty((m, len(r.cards)), dtype=np.int64)
    for j, c in enumerate(r.cards):
        cum = np.cumsum(probs[:, offsets[j]:offsets[j + 1]], axis=1)
        cum[:, -1] = 1.0
        u = rng.random(m)
        for lo in range(0, m, chunk):
            sl = slice(lo, lo + chunk)
            out[sl, j] = (u[sl, None] >= cum[pick[sl]]).sum(axis=1)
        np.minimum(out[:, j], c - 1, out=out[:, j])
    return out
