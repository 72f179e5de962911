"""Simulation study: true precision generators, Gaussian sampling and losses."""

from __future__ import annotations

import csv
import enum
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular

from .dagwishart import PriorTemplate
from .ensemble import EnsembleEstimate, Variant, estimate_variants
from .errors import InputError, InvalidSpec, NotPositiveDefinite
from .graph import Dag, from_cholesky_support
from .linalg import as_sym, ldl, logdet, mcd
from .selection import SelectionConfig

log = logging.getLogger(__name__)

SUPPORT_TOL = 1e-10
MIN_PIVOT = 1e-8
MAX_RETRIES = 100
LOSS_NAMES = ("L1", "L2", "L3", "L4", "L5")


class Case(enum.IntEnum):
    BANDED = 1
    AR = 2
    SPARSE3PCT = 3
    COMPOUND = 4
    PERMUTED_COMPOUND = 5

    @property
    def slug(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "Case":
        if isinstance(value, Case):
            return value
        if isinstance(value, int) or (isinstance(value, str) and value.strip().isdigit()):
            try:
                return cls(int(value))
            except ValueError:
                raise InvalidSpec(f"unknown case {value!r}") from None
        key = str(value).strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise InvalidSpec(f"unknown case {value!r}") from None


@dataclass(frozen=True)
class ScenarioSpec:
    case: Case
    p: int
    n: int = 100
    reps: int = 20
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "case", Case.parse(self.case))
        if self.p < 1:
            raise InvalidSpec("p must be >= 1")
        if self.case is Case.BANDED and self.p < 3:
            raise InvalidSpec("the banded case needs p >= 3")
        if self.case in (Case.COMPOUND, Case.PERMUTED_COMPOUND) and self.p < 10:
            raise InvalidSpec("the compound cases need p >= 10")
        if self.n < 2:
            raise InvalidSpec("n must be >= 2")
        if self.reps < 1:
            raise InvalidSpec("reps must be >= 1")


def banded_omega(p: int) -> NDArray:
    return np.eye(p) + 0.5 * (np.eye(p, k=1) + np.eye(p, k=-1)) + 0.3 * (np.eye(p, k=2) + np.eye(p, k=-2))


def ar_omega(p: int, rho: float = 0.5) -> NDArray:
    """Inverse of ``rho^|i-j|``; tridiagonal in closed form."""
    c = 1.0 / (1.0 - rho * rho)
    omega = np.diag(np.full(p, c * (1.0 + rho * rho)))
    omega[0, 0] = omega[-1, -1] = c
    off = np.full(p - 1, -rho * c)
    omega += np.diag(off, 1) + np.diag(off, -1)
    if p == 1:
        omega[0, 0] = 1.0
    return omega


def compound_omega(p: int, block: int = 10, rho: float = 0.5) -> NDArray:
    omega = np.eye(p)
    omega[:block, :block] = rho
    np.fill_diagonal(omega, 1.0)
    return omega


def sparse_factor(p: int, rng: np.random.Generator, frac: float = 0.03) -> NDArray:
    """Unit lower-triangular factor with ``round(frac * p(p-1)/2)`` Unif(0,1) entries."""
    rows, cols = np.tril_indices(p, -1)
    k = int(round(frac * rows.size))
    pick = rng.choice(rows.size, size=k, replace=False)
    L = np.eye(p)
    L[rows[pick], cols[pick]] = rng.uniform(0.0, 1.0, size=k)
    return L


def make_omega(spec: ScenarioSpec, rng: np.random.Generator) -> tuple[NDArray, Dag]:
    """True precision matrix and the DAG given by its Cholesky support."""
    p = spec.p
    if spec.case is Case.BANDED:
        omega = banded_omega(p)
    elif spec.case is Case.AR:
        omega = ar_omega(p)
    elif spec.case is Case.COMPOUND:
        omega = compound_omega(p)
    elif spec.case is Case.PERMUTED_COMPOUND:
        perm = rng.permutation(p)
        omega = compound_omega(p)[np.ix_(perm, perm)]
    else:
        for attempt in range(MAX_RETRIES):
            L0 = sparse_factor(p, rng)
            omega = L0 @ L0.T
            if np.min(ldl(omega)[1]) >= MIN_PIVOT:
                break
            log.info("sparse case: ill-conditioned draw, retry %d", attempt + 1)
        else:
            raise NotPositiveDefinite(f"no well-conditioned sparse draw in {MAX_RETRIES} attempts")
        return omega, from_cholesky_support(L0)
    L = mcd(omega).L
    return omega, from_cholesky_support(L, SUPPORT_TOL * max(1.0, float(np.abs(L).max())))


def sample_gaussian(Omega0: ArrayLike, n: int, rng: np.random.Generator) -> NDArray:
    """``n`` i.i.d. rows from ``N(0, Omega0^-1)``.

    With ``Omega0 = L diag(D)^-1 L^T`` the covariance factors as ``R R^T`` for
    ``R = L^-T diag(D)^1/2``, and rows are ``Z R^T``.
    """
    theta = mcd(Omega0)
    Z = rng.standard_normal((n, theta.p))
    return solve_triangular(theta.L, (Z * np.sqrt(theta.D)).T, trans="T", lower=True).T


@dataclass(frozen=True)
class LossReport:
    L1: float
    L2: float
    L3: float
    L4: float
    L5: float

    def __post_init__(self):
        for name in LOSS_NAMES:
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def stein_loss(est: ArrayLike, Omega0: ArrayLike) -> float:
    """``tr(est Sigma0) - log det(est Sigma0) - p``."""
    est, Omega0 = as_sym(est), as_sym(Omega0)
    p = est.shape[0]
    tr = float(np.trace(np.linalg.solve(Omega0, est)))
    value = tr - (logdet(est) - logdet(Omega0)) - p
    # nonnegative in exact arithmetic
    return max(value, 0.0)


def losses(est: ArrayLike, Omega0: ArrayLike, Dag0: Dag) -> LossReport:
    est, Omega0 = as_sym(est), as_sym(Omega0)
    if est.shape != Omega0.shape or Dag0.p != est.shape[0]:
        raise InputError("estimate, truth and DAG dimensions differ")
    diff = est - Omega0
    mask = Dag0.adjacency()
    return LossReport(
        L1=stein_loss(est, Omega0),
        L2=float(np.abs(diff[mask]).sum()),
        L3=float((diff[mask] ** 2).sum()),
        L4=float(np.abs(diff).sum()),
        L5=float((diff ** 2).sum()),
    )


@dataclass
class BenchmarkConfig:
    methods: tuple[Variant, ...] = (Variant.DAGW_BIC, Variant.DAGW, Variant.MLE, Variant.BAYES)
    K: int = 100
    grid_size: int = 50
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    prior: PriorTemplate = field(default_factory=PriorTemplate)

    def __post_init__(self):
        self.methods = tuple(Variant(m) if not isinstance(m, Variant) else m for m in self.methods)
        if not self.methods:
            raise InputError("method list is empty")
        if len(set(self.methods)) != len(self.methods):
            raise InputError("duplicate methods")
        if self.K < 1:
            raise InputError("K must be >= 1")


@dataclass
class RepResult:
    rep: int
    losses: dict[Variant, LossReport]
    frobenius: dict[Variant, float]
    omega0: NDArray
    estimates: dict[Variant, NDArray]


def rep_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, rep]))


def run_rep(spec: ScenarioSpec, cfg: BenchmarkConfig, rep: int) -> RepResult:
    """One repetition: truth, data, every method, losses. Pure in ``(spec, cfg, rep)``."""
    rng = rep_rng(spec.seed, rep)
    omega0, dag0 = make_omega(spec, rng)
    Y = sample_gaussian(omega0, spec.n, rng)
    ests: dict[Variant, EnsembleEstimate] = estimate_variants(
        Y, cfg.methods, cfg.K, cfg.selection, cfg.prior, rng, cfg.grid_size)
    out = {v: e.omega for v, e in ests.items()}
    return RepResult(
        rep,
        {v: losses(w, omega0, dag0) for v, w in out.items()},
        {v: float(np.linalg.norm(w - omega0)) for v, w in out.items()},
        omega0,
        out,
    )


def _rep_star(args):
    return run_rep(*args)


@dataclass
class SummaryRow:
    case: Case
    p: int
    n: int
    method: Variant
    loss: str
    mean: float
    se: float | None
    reps: int
    seed: int


def summarize(spec: ScenarioSpec, results: Sequence[RepResult], methods: Sequence[Variant]) -> list[SummaryRow]:
    rows = []
    reps = len(results)
    for v in methods:
        for name in LOSS_NAMES:
            vals = np.array([getattr(r.losses[v], name) for r in results])
            se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else None
            rows.append(SummaryRow(spec.case, spec.p, spec.n, v, name, float(vals.mean()), se, reps, spec.seed))
    return rows


@dataclass
class BenchmarkResult:
    spec: ScenarioSpec
    reps: list[RepResult]
    rows: list[SummaryRow]

    def mean(self, method: Variant | str, loss: str) -> float:
        method = Variant(method)
        for row in self.rows:
            if row.method is method and row.loss == loss:
                return row.mean
        raise KeyError((method, loss))


def run_benchmark(spec: ScenarioSpec, cfg: BenchmarkConfig, workers: int = 1,
                  on_rep: Callable[[RepResult], None] | None = None) -> BenchmarkResult:
    """All repetitions of one scenario, in rep order regardless of ``workers``."""
    jobs = [(spec, cfg, rep) for rep in range(spec.reps)]
    results: list[RepResult] = []
    if workers <= 1 or len(jobs) == 1:
        for job in jobs:
            results.append(_rep_star(job))
            if on_rep:
                on_rep(results[-1])
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(_rep_star, jobs):
                results.append(res)
                if on_rep:
                    on_rep(res)
    return BenchmarkResult(spec, results, summarize(spec, results, cfg.methods))


SUMMARY_HEADER = ("case", "p", "n", "method", "loss", "mean", "se", "reps", "seed")
REP_HEADER = ("case", "p", "n", "rep", "method", "loss", "value", "seed")


def _num(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def summary_csv_rows(rows: Sequence[SummaryRow]) -> list[list[str]]:
    return [[r.case.slug, str(r.p), str(r.n), r.method.label, r.loss, _num(r.mean), _num(r.se),
             str(r.reps), str(r.seed)] for r in rows]


def rep_csv_rows(spec: ScenarioSpec, res: RepResult) -> list[list[str]]:
    out = []
    for v, rep in res.losses.items():
        for name, value in rep.as_dict().items():
            out.append([spec.case.slug, str(spec.p), str(spec.n), str(res.rep), v.label, name,
                        _num(value), str(spec.seed)])
    return out


def format_summary_csv(rows: Sequence[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    writer.writerows(summary_csv_rows(rows))
    return buf.getvalue()
