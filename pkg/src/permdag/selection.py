"""DAG selection from data.

Candidate DAGs come from hard-thresholding the MCD factor of the
ridge-regularized inverse sample covariance along a grid of thresholds, then
from a greedy single-edge search started at each of those graphs. The same
is repeated on every leave-one-fold-out training set, and the pooled
candidates are all scored on the full data.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .dagwishart import DagScorer, PriorTemplate, sample_covariance
from .errors import InputError, InvalidFolds
from .graph import Dag
from .linalg import as_sym, mcd, spd_inverse

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SelectionConfig:
    ridge: float = 0.1
    n_thresholds: int = 3000
    sss_iters: int = 50
    sss_pool: int = 200
    cv_folds: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.ridge < 0:
            raise InputError("ridge must be >= 0")
        if self.n_thresholds < 1:
            raise InputError("n_thresholds must be >= 1")
        if self.sss_iters < 0 or self.sss_pool < 0:
            raise InputError("sss_iters and sss_pool must be >= 0")
        if self.cv_folds < 2:
            raise InvalidFolds("cv_folds must be >= 2")

    def to_dict(self) -> dict:
        return asdict(self)


def threshold_grid(values: NDArray, n_thresholds: int) -> NDArray:
    """Empirical quantiles of ``values`` at ranks ``k / n_thresholds``, ``k = 1..n``."""
    levels = np.arange(1, n_thresholds + 1) / n_thresholds
    return np.quantile(values, levels)


def candidate_graphs(S: ArrayLike, cfg: SelectionConfig) -> list[Dag]:
    """Threshold graphs of ``mcd((S + ridge I)^-1).L``, sparsest first.

    The empty DAG and the full-support DAG (threshold 0) are always included.
    """
    S = as_sym(S)
    p = S.shape[0]
    L = mcd(spd_inverse(S + cfg.ridge * np.eye(p))).L
    rows, cols = np.tril_indices(p, -1)
    mags = np.abs(L[rows, cols])
    nz = mags > 0
    rows, cols, mags = rows[nz], cols[nz], mags[nz]
    if mags.size == 0:
        return [Dag.empty(p)]
    order = np.argsort(-mags, kind="stable")
    sorted_desc = mags[order]
    taus = threshold_grid(mags, cfg.n_thresholds)
    # number of entries strictly above each threshold; 0 and all are forced
    asc = sorted_desc[::-1]
    counts = mags.size - np.searchsorted(asc, taus, side="right")
    counts = sorted(set(counts.tolist()) | {0, int(mags.size)})

    parents: list[list[int]] = [[] for _ in range(p)]
    out = []
    added = 0
    for c in counts:
        for e in order[added:c]:
            parents[cols[e]].append(int(rows[e]))
        added = c
        out.append(Dag.trusted(tuple(tuple(sorted(pa)) for pa in parents)))
    return out


def _climb_generic(seed: Dag, score: Callable[[Dag], float], iters: int) -> list[tuple[float, Dag]]:
    cur, cur_s = seed, score(seed)
    visited = []
    p = seed.p
    for _ in range(iters):
        best, best_s = None, cur_s
        for j in range(p):
            for i in range(j + 1, p):
                pa = set(cur.parents[j]) ^ {i}
                parents = list(cur.parents)
                parents[j] = tuple(sorted(pa))
                cand = Dag.trusted(tuple(parents))
                s = score(cand)
                if s > best_s:
                    best, best_s = cand, s
        if best is None:
            break
        cur, cur_s = best, best_s
        visited.append((cur_s, cur))
    return visited


def _climb_decomposable(seed: Dag, scorer: DagScorer, iters: int,
                        floor: float = -np.inf) -> list[tuple[float, Dag]]:
    # Each move only changes one vertex's parent set, so the best move per
    # vertex is cached and the global best comes off a heap. Visited DAGs
    # scoring below ``floor`` are not materialized.
    states = list(seed.parents)
    best_toggle = scorer.best_toggle
    cur_s = scorer(seed)
    heap = []
    for j, pa in enumerate(states):
        mv = best_toggle(j, pa)
        if mv is not None and mv[0] > 0:
            heap.append((-mv[0], j, mv[2]))
    heapq.heapify(heap)
    visited = []
    for _ in range(iters):
        if not heap:
            break
        neg, j, pa = heapq.heappop(heap)
        states[j] = pa
        cur_s -= neg
        if cur_s >= floor:
            visited.append((cur_s, Dag.trusted(tuple(states))))
        mv = best_toggle(j, pa)
        if mv is not None and mv[0] > 0:
            heapq.heappush(heap, (-mv[0], j, mv[2]))
    return visited


def sss_expand(seeds: Sequence[Dag], score: Callable[[Dag], float], cfg: SelectionConfig) -> list[Dag]:
    """Greedy single-edge-toggle search from every seed.

    Returns the de-duplicated seeds followed by the ``cfg.sss_pool`` best
    newly visited DAGs (highest score first, ties by parent lists).
    """
    unique = list(dict.fromkeys(seeds))
    if cfg.sss_iters == 0 or cfg.sss_pool == 0:
        return unique
    seen = set(unique)
    pool: dict[Dag, float] = {}
    worst: list[float] = []  # min-heap of pool scores, capped at sss_pool
    decomposable = isinstance(score, DagScorer)
    for seed in unique:
        if decomposable:
            floor = worst[0] if len(worst) >= cfg.sss_pool else -np.inf
            visited = _climb_decomposable(seed, score, cfg.sss_iters, floor)
        else:
            visited = _climb_generic(seed, score, cfg.sss_iters)
        for s, dag in visited:
            if dag in seen or dag in pool:
                continue
            pool[dag] = s
            if len(worst) < cfg.sss_pool:
                heapq.heappush(worst, s)
            elif s >= worst[0]:
                heapq.heapreplace(worst, s)
    if decomposable:
        pool = {dag: score(dag) for dag in pool}
    best = heapq.nsmallest(cfg.sss_pool, pool.items(), key=lambda kv: (-kv[1], kv[0]))
    return unique + [dag for dag, _ in best]


def cv_fold_indices(n: int, folds: int, rng: np.random.Generator) -> list[NDArray]:
    """Random split of ``range(n)`` into ``folds`` near-equal held-out index sets."""
    if folds < 2 or folds > n:
        raise InvalidFolds(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    return np.array_split(rng.permutation(n), folds)


def cv_partitions(Y: ArrayLike, folds: int, rng: np.random.Generator) -> list[NDArray]:
    """Leave-one-fold-out training sets of the rows of ``Y``."""
    Y = np.asarray(Y, dtype=float)
    held = cv_fold_indices(Y.shape[0], folds, rng)
    out = []
    for idx in held:
        mask = np.ones(Y.shape[0], dtype=bool)
        mask[idx] = False
        out.append(Y[mask])
    return out


@dataclass
class Selection:
    dag: Dag
    score: float
    n_candidates: int


def _rank_key(item: tuple[Dag, float]):
    dag, s = item
    return (-s, dag.n_edges, dag.parents)


def select_from_covariances(S: NDArray, n: int, train_covs: Sequence[NDArray],
                            prior: PriorTemplate, cfg: SelectionConfig) -> Selection:
    """Pool candidates from the full and training covariances; return the best.

    Candidate generation (thresholding and search) uses each covariance in
    turn while every score, including those steering the search, is the
    full-data marginal posterior.
    """
    scorer = DagScorer(S, n, prior)
    candidates: dict[Dag, None] = {}
    for C in [S, *train_covs]:
        seeds = candidate_graphs(C, cfg)
        for dag in sss_expand(seeds, scorer, cfg):
            candidates[dag] = None
    scored = [(dag, scorer(dag)) for dag in candidates]
    dag, s = min(scored, key=_rank_key)
    return Selection(dag, s, len(scored))


def training_covariances(Y: NDArray, held_out: Sequence[NDArray]) -> list[NDArray]:
    out = []
    for idx in held_out:
        mask = np.ones(Y.shape[0], dtype=bool)
        mask[idx] = False
        out.append(sample_covariance(Y[mask]))
    return out


def select_dag(Y: ArrayLike, prior: PriorTemplate, cfg: SelectionConfig,
               rng: np.random.Generator) -> Dag:
    """Highest-scoring DAG among all pooled candidates for data ``Y`` (rows = samples)."""
    Y = np.asarray(Y, dtype=float)
    n, p = Y.shape
    if n < cfg.cv_folds:
        raise InvalidFolds(f"need at least {cfg.cv_folds} rows, got {n}")
    if p == 1:
        return Dag.empty(1)
    held = cv_fold_indices(n, cfg.cv_folds, rng)
    sel = select_from_covariances(sample_covariance(Y), n, training_covariances(Y, held), prior, cfg)
    log.debug("selected DAG with %d edges from %d candidates", sel.dag.n_edges, sel.n_candidates)
    return sel.dag
