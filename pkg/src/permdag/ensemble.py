"""Permutation-ensemble estimator of a sparse precision matrix.

For each random variable ordering the data are relabeled, a DAG is selected
and its Cholesky factors are estimated, then the factors are mapped back to
the original labels and averaged. ``L`` averages are generally no longer
triangular. A BIC-like score picks a hard threshold for the averaged ``L``.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .dagwishart import DagWishartParams, PriorTemplate, map_estimate, mle_estimate, sample_covariance
from .errors import DimensionMismatch, EmptyEnsemble, InputError, InvalidFolds, NoValidThreshold, NotPositiveDefinite
from .graph import Dag
from .linalg import CholeskyParam, as_sym, compose, logdet
from .selection import SelectionConfig, cv_fold_indices, select_from_covariances, training_covariances

log = logging.getLogger(__name__)


class Variant(str, enum.Enum):
    DAGW_BIC = "dagw-bic"
    DAGW = "dagw"
    MLE = "mle"
    BAYES = "bayes"

    @property
    def label(self) -> str:
        return {"dagw-bic": "DAGW.BIC", "dagw": "DAGW", "mle": "MLE", "bayes": "BAYES"}[self.value]

    @classmethod
    def parse(cls, text: str) -> "Variant":
        key = text.strip().lower().replace("_", "-").replace(".", "-")
        try:
            return cls(key)
        except ValueError:
            raise InputError(f"unknown variant {text!r}; expected one of "
                             + ", ".join(v.value for v in cls)) from None


@dataclass(frozen=True)
class Permutation:
    """Bijection of ``0..p-1``; column ``j`` of permuted data is column ``sigma[j]``."""

    sigma: tuple[int, ...]

    def __post_init__(self):
        sigma = tuple(int(s) for s in self.sigma)
        if sorted(sigma) != list(range(len(sigma))):
            raise InputError(f"{sigma} is not a permutation of 0..{len(sigma) - 1}")
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def identity(cls, p: int) -> "Permutation":
        return cls(tuple(range(p)))

    @property
    def p(self) -> int:
        return len(self.sigma)

    def inverse(self) -> "Permutation":
        inv = np.empty(self.p, dtype=int)
        inv[list(self.sigma)] = np.arange(self.p)
        return Permutation(tuple(inv.tolist()))

    def matrix(self) -> NDArray:
        """``P`` with a single 1 in column ``j`` at row ``sigma[j]``."""
        P = np.zeros((self.p, self.p))
        P[list(self.sigma), np.arange(self.p)] = 1.0
        return P


def apply_permutation(Y: ArrayLike, perm: Permutation) -> NDArray:
    """``Y P_sigma``."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape[1] != perm.p:
        raise DimensionMismatch(f"data has {Y.shape[1]} columns, permutation has length {perm.p}")
    return Y[:, list(perm.sigma)]


def permute_sym(A: NDArray, perm: Permutation) -> NDArray:
    """``P^T A P``, the covariance of the permuted data when ``A`` is a covariance."""
    idx = list(perm.sigma)
    return A[np.ix_(idx, idx)]


def unpermute_factors(theta: CholeskyParam, perm: Permutation) -> tuple[NDArray, NDArray]:
    """``(P L P^T, P D P^T)``: factors estimated on permuted data in the original labels."""
    if theta.p != perm.p:
        raise DimensionMismatch(f"factors have p={theta.p}, permutation has length {perm.p}")
    idx = list(perm.sigma)
    L = np.empty_like(theta.L)
    L[np.ix_(idx, idx)] = theta.L
    D = np.empty_like(theta.D)
    D[idx] = theta.D
    return L, D


def ensemble_average(factors: Sequence[tuple[NDArray, NDArray]]) -> tuple[NDArray, NDArray, NDArray]:
    """Elementwise means ``(L_bar, D_bar)`` and ``L_bar diag(D_bar)^-1 L_bar^T``."""
    if len(factors) == 0:
        raise EmptyEnsemble("need at least one factor pair to average")
    L_sum = np.zeros_like(factors[0][0], dtype=float)
    D_sum = np.zeros_like(factors[0][1], dtype=float)
    for L, D in factors:
        if L.shape != L_sum.shape or D.shape != D_sum.shape:
            raise DimensionMismatch("factor shapes differ across the ensemble")
        L_sum += L
        D_sum += D
    K = len(factors)
    L_bar, D_bar = L_sum / K, D_sum / K
    return L_bar, D_bar, compose(L_bar, D_bar)


def hard_threshold(L: NDArray, tau: float) -> NDArray:
    """Zero the off-diagonal entries with ``|L_ij| <= tau``; the diagonal is kept."""
    out = np.where(np.abs(L) > tau, L, 0.0)
    np.fill_diagonal(out, np.diag(L))
    return out


@dataclass
class ThresholdChoice:
    tau_b: float
    L_tau: NDArray
    omega_tau: NDArray
    bic: float
    grid: NDArray
    scores: NDArray  # NaN where the thresholded precision is not positive definite


def bic_score(L_tau: NDArray, D: NDArray, S: NDArray, n: int) -> float:
    omega = compose(L_tau, D)
    edges = int(np.count_nonzero(L_tau))
    return n * float(np.sum(S * omega)) - n * logdet(omega) + math.log(n) * edges


def bic_threshold_select(L_bar: ArrayLike, D_bar: ArrayLike, S: ArrayLike, n: int,
                         grid_size: int = 50, grid: ArrayLike | None = None) -> ThresholdChoice:
    """Pick the hard threshold minimizing ``n tr(S W) - n log|W| + log(n) E``.

    ``W`` is the precision rebuilt from the thresholded factor and ``E`` counts
    all its nonzero entries, unit diagonal included. The default grid has
    ``grid_size`` evenly spaced points on ``[0, max |off-diagonal L_bar|]``.
    Ties go to the larger threshold; grid points giving a non positive
    definite ``W`` are skipped.
    """
    L_bar = np.asarray(L_bar, dtype=float)
    D_bar = np.asarray(D_bar, dtype=float)
    S = as_sym(S)
    if n < 2:
        raise InputError("BIC threshold selection needs n >= 2")
    if grid is None:
        if grid_size < 1:
            raise InputError("grid_size must be >= 1")
        off = np.abs(L_bar[~np.eye(L_bar.shape[0], dtype=bool)])
        top = float(off.max()) if off.size else 0.0
        grid = np.linspace(0.0, top, grid_size)
    grid = np.asarray(grid, dtype=float)
    scores = np.full(grid.shape, np.nan)
    best = None
    for idx, tau in enumerate(grid):
        L_tau = hard_threshold(L_bar, tau)
        try:
            score = bic_score(L_tau, D_bar, S, n)
        except NotPositiveDefinite:
            continue
        scores[idx] = score
        if best is None or score < best[0] or (score == best[0] and tau >= best[1]):
            best = (score, tau, L_tau)
    if best is None:
        raise NoValidThreshold("no grid point gives a positive definite precision estimate")
    score, tau, L_tau = best
    return ThresholdChoice(float(tau), L_tau, compose(L_tau, D_bar), float(score), grid, scores)


@dataclass
class EnsembleEstimate:
    variant: Variant
    L_bar: NDArray
    D_bar: NDArray
    omega_check: NDArray
    tau_b: float
    L_bar_tau: NDArray
    omega_check_tau: NDArray
    per_perm_dags: list[Dag] = field(default_factory=list)
    permutations: list[Permutation] = field(default_factory=list)

    @property
    def omega(self) -> NDArray:
        """The final estimate (thresholded when the variant thresholds)."""
        return self.omega_check_tau


@dataclass
class _PermFit:
    dag: Dag
    factors: dict[str, tuple[NDArray, NDArray]]


def _fit_one(S: NDArray, n: int, train_covs: list[NDArray], perm: Permutation,
             prior: PriorTemplate, cfg: SelectionConfig, kinds: tuple[str, ...]) -> _PermFit:
    S_p = permute_sym(S, perm)
    trains_p = [permute_sym(C, perm) for C in train_covs]
    prior_p = prior if prior.U is None else PriorTemplate(permute_sym(as_sym(prior.U), perm), prior.shape_offset)
    dag = select_from_covariances(S_p, n, trains_p, prior_p, cfg).dag
    out = {}
    if "map" in kinds:
        params = prior_p.params(dag)
        post = DagWishartParams(params.U + n * S_p, params.alpha + n)
        out["map"] = unpermute_factors(map_estimate(post, dag, n, prior_alpha=params.alpha), perm)
    if "mle" in kinds:
        out["mle"] = unpermute_factors(mle_estimate(S_p, dag), perm)
    return _PermFit(dag, out)


def _fit_star(args):
    return _fit_one(*args)


def _run_fits(jobs: list[tuple], workers: int) -> list[_PermFit]:
    if workers <= 1 or len(jobs) <= 1:
        return [_fit_star(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_fit_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def draw_permutations(p: int, K: int, rng: np.random.Generator) -> list[Permutation]:
    return [Permutation(tuple(rng.permutation(p).tolist())) for _ in range(K)]


def estimate_variants(Y: ArrayLike, variants: Sequence[Variant], K: int = 100,
                      cfg: SelectionConfig | None = None, prior: PriorTemplate | None = None,
                      rng: np.random.Generator | None = None, grid_size: int = 50,
                      permutations: Sequence[Permutation] | None = None,
                      workers: int = 1) -> dict[Variant, EnsembleEstimate]:
    """Fit several variants sharing one set of permutations and selected DAGs.

    The random stream is consumed in a fixed order (cross-validation split,
    then ``K`` permutations) so each variant's result does not depend on
    which other variants are requested. Every per-permutation fit is a pure
    function of the permuted data, which keeps the output identical for any
    worker count.
    """
    cfg = cfg or SelectionConfig()
    prior = prior or PriorTemplate()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    variants = [Variant(v) for v in variants]
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise DimensionMismatch("data must be an n x p matrix")
    n, p = Y.shape
    if n < 2 or K < 1:
        raise InputError("need n >= 2 and K >= 1")
    if n < cfg.cv_folds:
        raise InvalidFolds(f"need at least cv_folds={cfg.cv_folds} rows, got {n}")

    S = sample_covariance(Y)
    held = cv_fold_indices(n, cfg.cv_folds, rng)
    train_covs = training_covariances(Y, held)
    if permutations is None:
        permutations = draw_permutations(p, K, rng)
    permutations = list(permutations)
    for perm in permutations:
        if perm.p != p:
            raise DimensionMismatch(f"permutation length {perm.p} does not match p={p}")

    results: dict[Variant, EnsembleEstimate] = {}
    ensemble = [v for v in variants if v is not Variant.BAYES]
    if ensemble:
        kinds = tuple(sorted({"mle" if v is Variant.MLE else "map" for v in ensemble}))
        jobs = [(S, n, train_covs, perm, prior, cfg, kinds) for perm in permutations]
        fits = _run_fits(jobs, workers)
        dags = [f.dag for f in fits]
        for v in ensemble:
            kind = "mle" if v is Variant.MLE else "map"
            L_bar, D_bar, omega = ensemble_average([f.factors[kind] for f in fits])
            if v is Variant.DAGW_BIC:
                choice = bic_threshold_select(L_bar, D_bar, S, n, grid_size)
                tau, L_tau, omega_tau = choice.tau_b, choice.L_tau, choice.omega_tau
            else:
                tau, L_tau, omega_tau = 0.0, L_bar, omega
            results[v] = EnsembleEstimate(v, L_bar, D_bar, omega, tau, L_tau, omega_tau, dags, permutations)
    if Variant.BAYES in variants:
        ident = Permutation.identity(p)
        fit = _fit_one(S, n, train_covs, ident, prior, cfg, ("map",))
        L, D = fit.factors["map"]
        omega = compose(L, D)
        results[Variant.BAYES] = EnsembleEstimate(Variant.BAYES, L, D, omega, 0.0, L, omega, [fit.dag], [ident])
    return {v: results[v] for v in variants}


def estimate(Y: ArrayLike, K: int = 100, cfg: SelectionConfig | None = None,
             prior: PriorTemplate | None = None, variant: Variant | str = Variant.DAGW_BIC,
             rng: np.random.Generator | None = None, grid_size: int = 50,
             permutations: Sequence[Permutation] | None = None, workers: int = 1) -> EnsembleEstimate:
    """Permutation-ensemble estimate of the precision matrix of ``Y`` (rows = samples).

    ``BAYES`` is the single-ordering MAP on the original labels; ``DAGW`` and
    ``MLE`` average over ``K`` random orderings; ``DAGW_BIC`` also applies the
    BIC-selected hard threshold.
    """
    v = variant if isinstance(variant, Variant) else Variant.parse(variant)
    return estimate_variants(Y, [v], K, cfg, prior, rng, grid_size, permutations, workers)[v]
