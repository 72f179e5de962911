import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from permdag.dagwishart import sample_covariance
from permdag.ensemble import Variant
from permdag.errors import InputError, InvalidSpec, NotPositiveDefinite
from permdag.graph import Dag, from_cholesky_support
from permdag.linalg import mcd
from permdag.selection import SelectionConfig
from permdag.simbench import (BenchmarkConfig, Case, LossReport, ScenarioSpec, format_summary_csv, losses,
                              make_omega, rep_rng, run_benchmark, sample_gaussian, stein_loss)

from conftest import random_spd

TINY = BenchmarkConfig(methods=(Variant.DAGW_BIC, Variant.BAYES), K=2,
                       selection=SelectionConfig(n_thresholds=10, sss_iters=5, sss_pool=10))


def omega_of(case, p, seed=0):
    return make_omega(ScenarioSpec(case, p, 100, 1, seed), np.random.default_rng(seed))


def test_spec_validation():
    with pytest.raises(InvalidSpec):
        ScenarioSpec(Case.BANDED, 2)
    with pytest.raises(InvalidSpec):
        ScenarioSpec(Case.COMPOUND, 9)
    with pytest.raises(InvalidSpec):
        ScenarioSpec(Case.AR, 5, n=1)
    with pytest.raises(InvalidSpec):
        ScenarioSpec(Case.AR, 5, reps=0)
    with pytest.raises(InvalidSpec):
        ScenarioSpec("nope", 5)
    assert ScenarioSpec("banded", 3).case is Case.BANDED
    assert ScenarioSpec(3, 10).case is Case.SPARSE3PCT
    assert Case.parse("permuted-compound") is Case.PERMUTED_COMPOUND


def test_banded_example():
    omega, dag = omega_of(Case.BANDED, 3)
    np.testing.assert_array_equal(omega, [[1, 0.5, 0.3], [0.5, 1, 0.5], [0.3, 0.5, 1]])
    assert dag == Dag.full(3)
    _, dag = omega_of(Case.BANDED, 8)
    assert dag == Dag(tuple(tuple(j for j in (i + 1, i + 2) if j < 8) for i in range(8)))


def test_ar_example():
    omega, dag = omega_of(Case.AR, 2)
    np.testing.assert_allclose(omega, [[4 / 3, -2 / 3], [-2 / 3, 4 / 3]], atol=1e-15)
    omega, dag = omega_of(Case.AR, 7)
    sigma = 0.5 ** np.abs(np.subtract.outer(np.arange(7), np.arange(7)))
    np.testing.assert_allclose(omega @ sigma, np.eye(7), atol=1e-13)
    assert dag == Dag(tuple((i + 1,) if i < 6 else () for i in range(7)))


def test_compound_example():
    omega, _ = omega_of(Case.COMPOUND, 10)
    np.testing.assert_array_equal(omega, np.full((10, 10), 0.5) + 0.5 * np.eye(10))
    omega, dag = omega_of(Case.COMPOUND, 14)
    np.testing.assert_array_equal(omega[10:, 10:], np.eye(4))
    assert np.all(omega[:10, 10:] == 0)
    assert dag.n_edges == 45


def test_sparse_case_count_and_support():
    for p in (10, 30, 50):
        omega, dag = omega_of(Case.SPARSE3PCT, p, seed=p)
        assert dag.n_edges == round(0.03 * p * (p - 1) / 2)
        theta = mcd(omega)
        # Omega = L0 L0^T with unit D, so the factor is L0 up to roundoff
        np.testing.assert_allclose(theta.D, 1.0, rtol=1e-12)
        assert from_cholesky_support(theta.L, 1e-10) == dag


def test_permuted_compound_is_a_relabeling():
    omega4, _ = omega_of(Case.COMPOUND, 12)
    omega5, _ = omega_of(Case.PERMUTED_COMPOUND, 12, seed=3)
    perm = np.random.default_rng(3).permutation(12)
    np.testing.assert_array_equal(omega5, omega4[np.ix_(perm, perm)])


def test_cases_3_and_5_rerandomize_per_rep():
    spec = ScenarioSpec(Case.SPARSE3PCT, 30, 100, 2, 0)
    a, _ = make_omega(spec, rep_rng(0, 0))
    b, _ = make_omega(spec, rep_rng(0, 1))
    assert not np.array_equal(a, b)
    spec = ScenarioSpec(Case.BANDED, 30, 100, 2, 0)
    np.testing.assert_array_equal(make_omega(spec, rep_rng(0, 0))[0], make_omega(spec, rep_rng(0, 1))[0])


@pytest.mark.parametrize("case", list(Case))
@pytest.mark.parametrize("p", [10, 30, 50, 100])
def test_all_generated_omegas_are_pd(case, p):
    omega, dag = omega_of(case, p, seed=p)
    theta = mcd(omega)
    assert np.all(theta.D > 0)
    assert np.array_equal(omega, omega.T)
    assert dag.p == p


def test_sampler_shapes_and_determinism():
    omega, _ = omega_of(Case.BANDED, 5)
    assert sample_gaussian(omega, 1, np.random.default_rng(0)).shape == (1, 5)
    np.testing.assert_array_equal(sample_gaussian(omega, 7, np.random.default_rng(4)),
                                  sample_gaussian(omega, 7, np.random.default_rng(4)))
    with pytest.raises(NotPositiveDefinite):
        sample_gaussian([[1.0, 2.0], [2.0, 1.0]], 3, np.random.default_rng(0))


def test_sampler_identity_law_of_large_numbers():
    Y = sample_gaussian(np.eye(6), 10_000, np.random.default_rng(1))
    assert np.abs(sample_covariance(Y) - np.eye(6)).max() <= 0.1


def test_sampler_covariance_consistency():
    omega, _ = omega_of(Case.AR, 8)
    sigma = np.linalg.inv(omega)
    rng = np.random.default_rng(2)
    errs = [np.abs(sample_covariance(sample_gaussian(omega, n, rng)) - sigma).max() for n in (100, 1000, 10_000)]
    assert errs[0] > errs[1] > errs[2]


def test_loss_at_truth_is_zero():
    omega, dag = omega_of(Case.BANDED, 6)
    rep = losses(omega, omega, dag)
    assert rep == LossReport(0.0, 0.0, 0.0, 0.0, 0.0)


def test_loss_scaled_truth():
    omega = np.array([[2.0, 0.5], [0.5, 1.0]])
    rep = losses(2 * omega, omega, Dag(((1,), ())))
    assert rep.L1 == pytest.approx(2 - 2 * math.log(2), abs=1e-14)
    assert rep.L1 == pytest.approx(0.6137, abs=1e-4)


def test_loss_single_diagonal_offset():
    omega, dag = omega_of(Case.BANDED, 3)
    est = omega.copy()
    est[0, 0] += 0.1
    rep = losses(est, omega, dag)
    assert rep.L2 == 0.0 and rep.L3 == 0.0
    assert rep.L4 == pytest.approx(0.1, abs=1e-15)
    assert rep.L5 == pytest.approx(0.01, abs=1e-15)


def test_loss_off_diagonal_offset_on_support():
    omega, dag = omega_of(Case.BANDED, 4)
    est = omega.copy()
    est[1, 0] += 0.2
    est[0, 1] += 0.2
    rep = losses(est, omega, dag)
    # (1, 0) is an edge; its mirror (0, 1) is not a parent position
    assert rep.L2 == pytest.approx(0.2, abs=1e-15)
    assert rep.L4 == pytest.approx(0.4, abs=1e-15)
    assert rep.L3 == pytest.approx(0.04, abs=1e-15)
    assert rep.L5 == pytest.approx(0.08, abs=1e-15)


def test_loss_dimension_checks():
    with pytest.raises(InputError):
        losses(np.eye(3), np.eye(2), Dag.empty(2))
    with pytest.raises(NotPositiveDefinite):
        stein_loss([[1.0, 2.0], [2.0, 1.0]], np.eye(2))
    with pytest.raises(ValueError):
        LossReport(-1.0, 0, 0, 0, 0)


def test_stein_loss_strictly_positive_off_truth():
    rng = np.random.default_rng(5)
    omega, _ = omega_of(Case.BANDED, 6)
    for _ in range(100):
        E = rng.normal(0, 0.05, (6, 6))
        est = omega + (E + E.T) / 2
        assert stein_loss(est, omega) > 0


def test_support_losses_bounded_by_global():
    rng = np.random.default_rng(6)
    for _ in range(100):
        p = int(rng.integers(3, 12))
        omega, dag = make_omega(ScenarioSpec(Case.BANDED, p), rng)
        est = random_spd(rng, p, 0.2)
        rep = losses(est, omega, dag)
        assert rep.L2 <= rep.L4 and rep.L3 <= rep.L5


def test_global_losses_are_relabeling_invariant():
    rng = np.random.default_rng(7)
    omega4, dag4 = omega_of(Case.COMPOUND, 12)
    spec5 = ScenarioSpec(Case.PERMUTED_COMPOUND, 12, seed=9)
    omega5, dag5 = make_omega(spec5, np.random.default_rng(9))
    perm = np.random.default_rng(9).permutation(12)
    est4 = random_spd(rng, 12, 0.1)
    est5 = est4[np.ix_(perm, perm)]
    r4, r5 = losses(est4, omega4, dag4), losses(est5, omega5, dag5)
    assert r4.L4 == pytest.approx(r5.L4, rel=1e-14)
    assert r4.L5 == pytest.approx(r5.L5, rel=1e-14)
    assert r4.L1 == pytest.approx(r5.L1, rel=1e-9)


def test_single_rep_benchmark():
    res = run_benchmark(ScenarioSpec(Case.BANDED, 5, 30, 1, 0), TINY)
    assert len(res.rows) == 2 * 5
    for row in res.rows:
        assert row.se is None
        assert row.mean == getattr(res.reps[0].losses[row.method], row.loss)
    text = format_summary_csv(res.rows)
    assert text.splitlines()[0] == "case,p,n,method,loss,mean,se,reps,seed"
    assert text.splitlines()[1].startswith("banded,5,30,DAGW.BIC,L1,")
    assert text.splitlines()[1].split(",")[6] == ""


def test_benchmark_statistics_and_callback():
    seen = []
    res = run_benchmark(ScenarioSpec(Case.AR, 5, 30, 3, 4), TINY, on_rep=lambda r: seen.append(r.rep))
    assert seen == [0, 1, 2]
    vals = np.array([r.losses[Variant.BAYES].L4 for r in res.reps])
    row = next(r for r in res.rows if r.method is Variant.BAYES and r.loss == "L4")
    assert row.mean == pytest.approx(vals.mean())
    assert row.se == pytest.approx(vals.std(ddof=1) / math.sqrt(3))
    assert res.mean("bayes", "L4") == row.mean


def test_benchmark_workers_match_sequential():
    spec = ScenarioSpec(Case.SPARSE3PCT, 10, 30, 3, 1)
    a = run_benchmark(spec, TINY, workers=1)
    b = run_benchmark(spec, TINY, workers=2)
    assert format_summary_csv(a.rows) == format_summary_csv(b.rows)


def test_benchmark_config_validation():
    with pytest.raises(InputError):
        BenchmarkConfig(methods=())
    with pytest.raises(InputError):
        BenchmarkConfig(methods=(Variant.DAGW, Variant.DAGW))
    with pytest.raises(InputError):
        BenchmarkConfig(K=0)
