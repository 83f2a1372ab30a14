import numpy as np
import pytest

from randimpute.core import Dataset, Stratification, ValidationError
from randimpute.impute import (
    GibbsConfig,
    ImputationError,
    complete_cases,
    mean_impute,
    mi_design_stage,
    mi_outcome_stage,
    regression_impute,
    run_outcome_chain,
    tabulate_counts,
)
from randimpute.infer import fit_logistic, rubin_combine
from randimpute.rngkit import derive_stream
from randimpute.simgen import ScenarioConfig, generate_dataset

from conftest import random_binary_dataset
from oracles import REFERENCE_THETA_COUNTS, posterior_predictive_x2


def _ds(t, y, x1, x2):
    return Dataset.from_arrays(t, y, np.array(x1, float), np.array(x2, float))


nan = np.nan


def test_tabulate_reference_table(reference_dataset):
    table = tabulate_counts(reference_dataset)
    assert tuple(table.counts[0]) == REFERENCE_THETA_COUNTS
    assert table.sizes[0] == 1000


def test_tabulate_fully_observed_and_strata():
    ds = random_binary_dataset(np.random.default_rng(0), 200, 0, 0)
    assert tabulate_counts(ds).counts[0, 4:].sum() == 0
    y1 = Dataset.from_arrays(ds.t, np.ones(ds.n), ds.x1, ds.x2)
    table = tabulate_counts(y1, "by-TY")
    assert (table.sizes > 0).sum() == 2
    assert table.sizes.sum() == 200
    assert tuple(table.stratum((1, 1))) == tuple(tabulate_counts(y1.subset(y1.t == 1)).counts[0])


def test_every_unit_counted_once():
    ds = random_binary_dataset(np.random.default_rng(1), 500)
    for s in Stratification:
        assert tabulate_counts(ds, s).counts.sum() == 500


def test_design_stage_no_missing_is_identity():
    ds = random_binary_dataset(np.random.default_rng(2), 40, 0, 0)
    for c in mi_design_stage(ds, "icin", "none", 3, derive_stream(0, 0)):
        assert np.array_equal(c.x1, ds.x1) and np.array_equal(c.x2, ds.x2)


def test_design_stage_symmetric_single_unit():
    # balanced complete cases; one unit missing X2
    x1 = [0, 0, 1, 1] * 500 + [1]
    x2 = [0, 1, 0, 1] * 500 + [nan]
    ds = _ds([0] * 2001, [0] * 2001, x1, x2)
    out = mi_design_stage(ds, "icin", "none", 10_000, derive_stream(1, 0))
    freq = np.mean([c.x2[-1] for c in out])
    assert freq == pytest.approx(0.5, abs=0.02)


@pytest.mark.parametrize("restriction", ["icin", "mar"])
def test_design_stage_matches_posterior_predictive_oracle(restriction):
    gen = np.random.default_rng(3)
    ds = random_binary_dataset(gen, 40, 0.3, 0.3)
    counts = tabulate_counts(ds).counts[0]
    out = mi_design_stage(ds, restriction, "none", 4000, derive_stream(3, 1))
    for x1v in (0, 1):
        units = np.flatnonzero((ds.d1 == 0) & (ds.d2 == 1) & (ds.x1 == x1v))
        if not units.size:
            continue
        i = units[0]
        freq = np.mean([c.x2[i] for c in out])
        assert freq == pytest.approx(posterior_predictive_x2(counts, x1v, 10_000, restriction=restriction), abs=0.02)


def test_methods_preserve_observed(scenario_data):
    obs, _ = scenario_data
    s = derive_stream(4, 0)
    binary = (
        mi_design_stage(obs, "icin", "by-T", 2, s)
        + mi_outcome_stage(obs, "mar", "none", GibbsConfig(burnin=5, thin=2, m=2), s)
        + [regression_impute(obs, "none", s)]
    )
    results = binary + [mean_impute(obs, "by-TY")]
    o1 = obs.d1 == 0
    o2 = obs.d2 == 0
    for c in results:
        assert np.array_equal(c.x1[o1], obs.x1[o1]) and np.array_equal(c.x2[o2], obs.x2[o2])
        for k in ("t", "y", "d1", "d2"):
            assert np.array_equal(getattr(c, k), getattr(obs, k))
    for c in binary:
        assert np.all(np.isin(c.x1, (0, 1))) and np.all(np.isin(c.x2, (0, 1)))


def test_respecting_randomization_changes_little():
    diffs = []
    for r in range(6):
        obs, _ = generate_dataset(ScenarioConfig(), derive_stream(20, r))
        est = {}
        for strat in ("none", "by-T"):
            fits = [fit_logistic(c) for c in mi_design_stage(obs, "icin", strat, 60, derive_stream(21, r).child(strat))]
            est[strat] = rubin_combine([f.coef[3] for f in fits], [f.covariance[3, 3] for f in fits]).qbar
        diffs.append(est["none"] - est["by-T"])
    assert abs(np.mean(diffs)) < 0.01


def test_outcome_stage_with_flat_outcome_matches_design_stage():
    gen = np.random.default_rng(5)
    ds = random_binary_dataset(gen, 300, 0.0, 0.4)
    cfg = GibbsConfig(burnin=20, thin=1, m=1500, beta_prior_variance=1e-12)
    ry = run_outcome_chain(ds, "icin", cfg, derive_stream(5, 0))[0]
    r = mi_design_stage(ds, "icin", "none", 1500, derive_stream(5, 1))
    miss = ds.d2 == 1
    f_ry = np.mean([c.x2[miss].mean() for c in ry])
    f_r = np.mean([c.x2[miss].mean() for c in r])
    assert f_ry == pytest.approx(f_r, abs=0.02)


def test_outcome_chain_returns_draws(scenario_data):
    obs, _ = scenario_data
    seen = []
    kept, draws = run_outcome_chain(obs, "icin", GibbsConfig(burnin=3, thin=2, m=4), derive_stream(6, 0), seen.append)
    assert len(kept) == 4 and draws.shape == (4, 5)
    assert [g.iteration for g in seen] == [5, 7, 9, 11]
    assert np.array_equal(seen[-1].beta.as_array(), draws[-1])


def test_outcome_stage_by_ty_is_design_stage(scenario_data):
    obs, _ = scenario_data
    a = mi_outcome_stage(obs, "icin", "by-TY", GibbsConfig(m=3), derive_stream(7, 0))
    b = mi_design_stage(obs, "icin", "by-TY", 3, derive_stream(7, 0))
    assert all(np.array_equal(x.x1, y.x1) and np.array_equal(x.x2, y.x2) for x, y in zip(a, b))
    with pytest.raises(ValueError):
        mi_outcome_stage(obs, "icin", "by-T", GibbsConfig(m=3), derive_stream(7, 0))


def test_gibbs_config_validation():
    with pytest.raises(ValidationError):
        GibbsConfig(burnin=0)
    with pytest.raises(ValidationError):
        GibbsConfig(beta_prior_variance=-1)
    assert GibbsConfig().iterations == 500 + 50 * 100


def test_mean_impute():
    ds = _ds([0] * 5, [0] * 5, [1, 1, 0, 0, nan], [1, 0, 1, 1, 1])
    c = mean_impute(ds)
    assert c.x1[-1] == 0.5 and list(c.x1[:4]) == [1, 1, 0, 0]
    assert np.array_equal(mean_impute(_ds([0, 1], [0, 1], [0, 1], [1, 1])).x1, [0, 1])


def test_mean_impute_empty_stratum():
    ds = _ds([0, 0, 1, 1], [0, 1, 0, 1], [1, 0, 1, 0], [1, 0, 0, nan])
    with pytest.raises(ImputationError, match="no observed x2 in stratum \\(T=1, Y=1\\)"):
        mean_impute(ds, "by-TY")


def test_mean_r_equals_mean_nr_when_arm_means_coincide():
    ds = _ds([0, 0, 0, 1, 1, 1], [0] * 6, [1, 0, nan, 0, 1, nan], [1, nan, 0, 1, nan, 0])
    assert np.array_equal(mean_impute(ds, "none").x1, mean_impute(ds, "by-T").x1)
    assert np.array_equal(mean_impute(ds, "none").x2, mean_impute(ds, "by-T").x2)


def test_regression_impute_symmetric():
    gen = np.random.default_rng(8)
    n = 40_000
    x1 = gen.integers(0, 2, n).astype(float)
    x2 = gen.integers(0, 2, n).astype(float)
    miss = gen.random(n) < 0.5
    x2[miss] = nan
    ds = _ds(gen.integers(0, 2, n), gen.integers(0, 2, n), x1, x2)
    c = regression_impute(ds, "none", derive_stream(8, 0))
    assert c.x2[miss].mean() == pytest.approx(0.5, abs=0.02)


def test_regression_impute_both_missing_uses_marginal():
    gen = np.random.default_rng(9)
    n = 20_000
    x1 = (gen.random(n) < 0.8).astype(float)
    x2 = np.where(gen.random(n) < 0.2, 1 - x1, x1)
    both = gen.random(n) < 0.3
    x1[both] = nan
    x2[both] = nan
    c = regression_impute(_ds(np.zeros(n), np.zeros(n), x1, x2), "none", derive_stream(9, 0))
    assert c.x1[both].mean() == pytest.approx(0.8, abs=0.02)
    # X2 drawn from the X2 ~ X1 model given the drawn X1
    agree = np.mean(c.x1[both] == c.x2[both])
    assert agree == pytest.approx(0.8, abs=0.02)


def test_regression_identity_and_separation():
    ds = random_binary_dataset(np.random.default_rng(10), 50, 0, 0)
    c = regression_impute(ds, "by-T", derive_stream(0, 0))
    assert np.array_equal(c.x1, ds.x1)
    sep = _ds([0] * 6, [0] * 6, [0, 0, 0, 1, 1, nan], [0, 0, 0, 1, 1, 1])
    with pytest.raises(ImputationError, match="separated in stratum \\(all units\\)"):
        regression_impute(sep, "none", derive_stream(0, 0))


def test_complete_cases(reference_dataset):
    assert complete_cases(reference_dataset).n == 388
    ds = random_binary_dataset(np.random.default_rng(11), 30, 0, 0)
    assert complete_cases(ds) == ds
    with pytest.raises(ImputationError):
        complete_cases(_ds([0, 1], [0, 1], [nan, 1], [0, nan]))
