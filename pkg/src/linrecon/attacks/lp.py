"""Reconstruction of the secret column by linear programming.

The adversary knows the quasi-identifiers ``X`` of all ``n`` records and
reads query answers off the synthetic data. Each answer constrains a
relaxed secret vector ``t in [0, 1]^n``:

    Q_j({X | t}) = (1/n) * sum_{i matches j} [b_j t_i + (1 - b_j)(1 - t_i)]

and the attack picks the ``t`` with the smallest total absolute error over
all queries, then rounds the target's entry.

The L1 problem is solved through its dual,

    max  r.l - 1.mu   s.t.  A^T l <= mu,  -1 <= l <= 1,  mu >= 0,

whose constraint multipliers are the primal ``t``. HiGHS's interior point
method solves this form several times faster than the primal with its
``2q`` split error variables. If the dual solve breaks down numerically the
primal is solved directly.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ..data import Dataset, QuasiIdentifierTable
from ..queries import QuerySet, enumerate_secret_queries, evaluate_counts, sample_queries


class NoQueries(ValueError):
    pass


class TargetNotFound(LookupError):
    pass


class SolverError(RuntimeError):
    pass


class QueryMode(str, enum.Enum):
    MARGINAL = "marginal"
    CONDITIONAL = "conditional"


class SolverStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class ReconConfig:
    k: int = 3
    mode: QueryMode = QueryMode.CONDITIONAL
    cap: int = 100_000

    def __post_init__(self):
        object.__setattr__(self, "mode", QueryMode(str(self.mode).lower().split(".")[-1]))
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.cap < 1:
            raise ValueError("cap must be positive")


@dataclass
class ReconstructionProblem:
    """Queries over the secret plus their synthetic answers, aligned with ``x``.

    ``members`` holds, per query, the count of rows of ``x`` matching its
    quasi-identifier part; the sparse constraint matrix is built on demand.
    """

    x: QuasiIdentifierTable
    queries: QuerySet
    answers: np.ndarray
    members: np.ndarray = field(repr=False)
    dropped: int = 0
    _system: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.answers = np.asarray(self.answers, dtype=float)
        if len(self.answers) != len(self.queries):
            raise ValueError("one answer per query is required")
        if not np.isfinite(self.answers).all():
            raise ValueError("answers must be finite")

    @property
    def n(self) -> int:
        return self.x.n

    @property
    def q(self) -> int:
        return len(self.queries)

    def system(self) -> tuple[sparse.csr_matrix, np.ndarray]:
        """``(A, r)`` with ``e = r - A t`` the vector of query errors."""
        if self._system is None:
            self._system = _constraint_system(self)
        return self._system

    def errors(self, t) -> np.ndarray:
        a, r = self.system()
        return r - a @ np.asarray(t, dtype=float)

    def objective(self, t) -> float:
        return float(np.abs(self.errors(t)).sum())


@dataclass
class ReconstructionSolution:
    t: np.ndarray
    objective: float
    solver_status: SolverStatus


@dataclass(frozen=True)
class AttackGuess:
    guess: int
    score: float


def _match_rows(x_cells: np.ndarray, q_cells: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """All (query position, row) pairs with equal cell ids."""
    order = np.argsort(q_cells, kind="stable")
    sorted_cells = q_cells[order]
    lo = np.searchsorted(sorted_cells, x_cells, side="left")
    hi = np.searchsorted(sorted_cells, x_cells, side="right")
    width = hi - lo
    rows = np.repeat(np.arange(len(x_cells)), width)
    starts = np.repeat(lo - np.cumsum(width) + width, width)
    qpos = order[starts + np.arange(len(rows))]
    return qpos, rows


def _constraint_system(p: ReconstructionProblem) -> tuple[sparse.csr_matrix, np.ndarray]:
    n, qs = p.n, p.queries
    cards = p.x.cardinalities
    rows, cols, vals = [], [], []
    bit = qs.values[:, -1]
    for attrs, pos in QuerySet(qs.attrs[:, :-1], qs.values[:, :-1]).groups():
        shape = tuple(cards[a] for a in attrs)
        x_cells = np.ravel_multi_index(tuple(p.x.rows[:, a].astype(np.int64) for a in attrs), shape)
        q_cells = np.ravel_multi_index(tuple(qs.values[pos][:, i] for i in range(len(attrs))), shape)
        local, r = _match_rows(x_cells, q_cells)
        j = pos[local]
        rows.append(j)
        cols.append(r)
        vals.append(np.where(bit[j] == 1, 1.0, -1.0) / n)
    a = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(len(qs), n))
    # b = 0 queries count the rows with t_i = 0: Q = |M|/n - (1/n) sum t_i
    r = p.answers - np.where(bit == 1, 0.0, p.members / n)
    return a, r


def build_problem(s: Dataset, x: QuasiIdentifierTable, k: int = 3, mode: QueryMode | str = QueryMode.CONDITIONAL,
                  cap: int = 100_000, rng: np.random.Generator | None = None,
                  queries: QuerySet | None = None) -> ReconstructionProblem:
    """Enumerate the k-way secret queries, answer them on ``s`` and keep the defined ones.

    In conditional mode an answer is ``Q(S) / Q-(S) * Q-(X)`` where ``Q-``
    drops the secret; queries whose parent has no support in ``s`` are
    undefined and dropped. ``queries`` overrides the enumeration.
    """
    mode = QueryMode(mode)
    if x.cardinalities != s.schema.cardinalities[:-1]:
        raise ValueError("x must hold the quasi-identifiers of s's schema")
    if queries is None:
        queries = enumerate_secret_queries(s.schema, k)
        if len(queries) > cap:
            rng = rng if rng is not None else np.random.default_rng()
            queries = sample_queries(queries, cap, rng)
    parent = QuerySet(queries.attrs[:, :-1], queries.values[:, :-1])
    members = evaluate_counts(parent, x)
    counts = evaluate_counts(queries, s)
    if mode is QueryMode.MARGINAL:
        answers = counts / s.n
        keep = np.ones(len(queries), dtype=bool)
    else:
        parent_s = evaluate_counts(parent, s)
        keep = parent_s > 0
        answers = np.zeros(len(queries))
        answers[keep] = counts[keep] / parent_s[keep] * (members[keep] / x.n)
    if not keep.any():
        raise NoQueries(f"all {len(queries)} queries are undefined on the synthetic data")
    dropped = int((~keep).sum())
    if dropped:
        queries, answers, members = queries[np.nonzero(keep)[0]], answers[keep], members[keep]
    return ReconstructionProblem(x, queries, answers, members, dropped)


def solve(p: ReconstructionProblem, tol: float = 1e-7, max_iter: int | None = None) -> ReconstructionSolution:
    """Minimise the total absolute query error over ``t in [0, 1]^n``."""
    a, r = p.system()
    n = p.n
    # queries matching no row contribute the constant |r_j| whatever t is
    active = np.diff(a.indptr) > 0
    const = float(np.abs(r[~active]).sum())
    a_act, r_act = a[active], r[active]
    q = a_act.shape[0]
    max_iter = max_iter if max_iter is not None else 10 * (n + 2 * p.q)
    if q == 0:
        t = np.full(n, 0.5)
        return ReconstructionSolution(t, const, SolverStatus.OPTIMAL)

    opts = {"primal_feasibility_tolerance": tol, "dual_feasibility_tolerance": tol,
            "ipm_optimality_tolerance": tol, "maxiter": max_iter}
    c = np.concatenate([-r_act, np.ones(n)])
    a_ub = sparse.hstack([a_act.T, -sparse.eye(n)], format="csc")
    bounds = np.concatenate([np.c_[-np.ones(q), np.ones(q)], np.c_[np.zeros(n), np.full(n, np.inf)]])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(n), bounds=bounds, method="highs-ipm", options=opts)
    if res.status == 0:
        t = -res.ineqlin.marginals
        status = SolverStatus.OPTIMAL
    elif res.status == 1:
        marg = getattr(getattr(res, "ineqlin", None), "marginals", None)
        t = -marg if marg is not None and np.isfinite(marg).all() else np.full(n, 0.5)
        status = SolverStatus.ITERATION_LIMIT
    else:
        t, status = _solve_primal(a_act, r_act, opts)
    t = np.clip(t, 0.0, 1.0)
    return ReconstructionSolution(t, float(np.abs(r_act - a_act @ t).sum()) + const, status)


def _solve_primal(a, r, opts) -> tuple[np.ndarray, SolverStatus]:
    q, n = a.shape
    a_eq = sparse.hstack([a, sparse.eye(q), -sparse.eye(q)], format="csc")
    c = np.concatenate([np.zeros(n), np.ones(2 * q)])
    bounds = np.concatenate([np.c_[np.zeros(n), np.ones(n)], np.c_[np.zeros(2 * q), np.full(2 * q, np.inf)]])
    opts = {k: v for k, v in opts.items() if k != "ipm_optimality_tolerance"}
    res = linprog(c, A_eq=a_eq, b_eq=r, bounds=bounds, method="highs-ds", options=opts)
    if res.status == 0:
        return res.x[:n], SolverStatus.OPTIMAL
    if res.status == 1 and res.x is not None:
        return res.x[:n], SolverStatus.ITERATION_LIMIT
    if res.status == 1:
        return np.full(n, 0.5), SolverStatus.ITERATION_LIMIT
    # t = 1/2 with matching errors is always feasible, so anything else is a solver fault
    raise SolverError(f"LP solver failed: {res.message}")


def decode(sol: ReconstructionSolution, u: int, rng: np.random.Generator) -> AttackGuess:
    """Round ``t_u`` to the nearest bit; exactly 1/2 is a fair coin."""
    score = float(sol.t[u])
    if score > 0.5:
        guess = 1
    elif score < 0.5:
        guess = 0
    else:
        guess = int(rng.integers(2))
    return AttackGuess(guess, score)


def recon_attack(s: Dataset, x_u, x: QuasiIdentifierTable, cfg: ReconConfig = ReconConfig(),
                 rng: np.random.Generator | None = None) -> AttackGuess:
    rng = rng if rng is not None else np.random.default_rng()
    u = x.find(x_u)
    if u < 0:
        raise TargetNotFound("target quasi-identifiers do not occur in x")
    p = build_problem(s, x, cfg.k, cfg.mode, cfg.cap, rng)
    return decode(solve(p), u, rng)


def lp_text(p: ReconstructionProblem) -> str:
    """The primal in CPLEX LP format, readable by most external solvers.

    Variables: ``t<i>`` for the relaxed secrets, ``ep<j>``/``em<j>`` for the
    positive and negative parts of query error ``j``.
    """
    a, r = p.system()
    coo = a.tocoo()
    terms: list[list[str]] = [[] for _ in range(a.shape[0])]
    for j, i, v in zip(coo.row, coo.col, coo.data):
        terms[j].append(f"{v:+.17g} t{i}")
    out = ["\\ total absolute query error", "Minimize",
           " obj: " + " + ".join(f"ep{j} + em{j}" for j in range(p.q)), "Subject To"]
    for j in range(p.q):
        lhs = " ".join(terms[j])
        out.append(f" c{j}: {lhs} + ep{j} - em{j} = {r[j]:.17g}")
    out.append("Bounds")
    out.extend(f" 0 <= t{i} <= 1" for i in range(p.n))
    out.append("End")
    return "\n".join(out) + "\n"


def lp_triplets(p: ReconstructionProblem) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(row, col, value, rhs)`` of the error constraints ``A t + e = r``."""
    a, r = p.system()
    coo = a.tocoo()
    return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data, r
