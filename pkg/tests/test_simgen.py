import itertools

import numpy as np
import pytest

from randimpute.core import ThetaVector, ValidationError
from randimpute.identify import build_identified_joint, check_identification, observed_theta
from randimpute.identify import IdentifiedJoint, Restriction
from randimpute.rngkit import derive_stream
from randimpute.simgen import (
    LoglinearSpec,
    ScenarioConfig,
    generate_dataset,
    loglinear_cell_probs,
    loglinear_expected_counts,
)


def generator_joint(spec=LoglinearSpec(), r1=0.35, r2=0.40):
    pi = loglinear_cell_probs(spec)
    p = np.empty((2, 2, 2, 2))
    for d1, d2 in itertools.product((0, 1), repeat=2):
        pd = (r1 if d1 else 1 - r1) * (r2 if d2 else 1 - r2)
        p[:, :, d1, d2] = pd * pi[:, :, d1, d2]
    return p


def test_expected_counts_formula():
    m = loglinear_expected_counts(LoglinearSpec())
    assert m[0, 0, 0, 0] == pytest.approx(np.exp(5))
    assert m[1, 1, 1, 1] == pytest.approx(np.exp(5 + 0.3 - 0.5 + 0.009 + 0.05 + 0.5 + 0.75 + 1 + 0.25))


def test_loglinear_overflow():
    with pytest.raises(ValueError, match="overflow"):
        loglinear_expected_counts(LoglinearSpec(lambda0=800))


def test_cell_probs_normalized_per_pattern():
    pi = loglinear_cell_probs(LoglinearSpec())
    assert np.allclose(pi.sum(axis=(0, 1)), 1.0)


def test_loglinear_generator_is_icin():
    # conditional odds ratios of the generating table equal 1
    p = generator_joint()
    theta = ThetaVector(observed_theta(IdentifiedJoint(p, 1.0, Restriction.ICIN, None)))
    joint = build_identified_joint(theta, "icin")
    # ICIN identification recovers the generating table exactly
    assert np.max(np.abs(joint.p - p)) < 1e-14
    assert check_identification(joint).passed()


def test_exact_covariate_law():
    p = generator_joint().sum(axis=(2, 3))
    assert p[1].sum() == pytest.approx(0.69698, abs=5e-5)
    assert p[1, 1] / p[1].sum() == pytest.approx(0.58272, abs=5e-5)
    assert p[0, 1] / p[0].sum() == pytest.approx(0.45875, abs=5e-5)


def test_large_sample_rates():
    cfg = ScenarioConfig(n=1_000_000)
    _, full = generate_dataset(cfg, derive_stream(3, 0))
    obs, _ = generate_dataset(cfg, derive_stream(3, 0))
    x1 = full.x1.astype(bool)
    assert full.x1.mean() == pytest.approx(0.69698, abs=0.003)
    assert full.x2[x1].mean() == pytest.approx(0.58272, abs=0.003)
    assert full.x2[~x1].mean() == pytest.approx(0.45875, abs=0.003)
    assert obs.d1.mean() == pytest.approx(0.35, abs=0.003)
    assert obs.d2.mean() == pytest.approx(0.40, abs=0.003)
    assert obs.t.mean() == pytest.approx(0.5, abs=0.003)


def test_mcar_law():
    _, full = generate_dataset(ScenarioConfig(mechanism="mcar", n=400_000), derive_stream(4, 0))
    x1 = full.x1.astype(bool)
    assert full.x1.mean() == pytest.approx(0.7, abs=0.003)
    assert full.x2[x1].mean() == pytest.approx(0.6, abs=0.004)
    assert full.x2[~x1].mean() == pytest.approx(0.45, abs=0.005)


def test_scenario2_rates_by_arm():
    obs, _ = generate_dataset(ScenarioConfig(scenario=2, n=200_000), derive_stream(5, 0))
    t = obs.t.astype(bool)
    assert obs.d1[t].mean() == pytest.approx(0.35, abs=0.006)
    assert obs.d2[~t].mean() == pytest.approx(0.10, abs=0.006)


def test_scenario3_truth_and_outcome_shift():
    cfg = ScenarioConfig(scenario=3, n=200_000)
    assert cfg.truth.bd1 == -0.6 and cfg.truth.bd2 == -0.4
    obs, _ = generate_dataset(cfg, derive_stream(6, 0))
    obs1, _ = generate_dataset(ScenarioConfig(n=200_000), derive_stream(6, 0))
    assert obs.y[obs.d1 == 1].mean() < obs1.y[obs1.d1 == 1].mean() - 0.05


def test_observed_entries_match_before_deletion(scenario_data):
    obs, full = scenario_data
    keep1 = obs.d1 == 0
    assert np.array_equal(obs.x1[keep1], full.x1[keep1])
    assert np.array_equal(obs.y, full.y) and not full.d1.any()


def test_reproducible():
    a = generate_dataset(ScenarioConfig(n=50), derive_stream(1, 2))[0]
    b = generate_dataset(ScenarioConfig(n=50), derive_stream(1, 2))[0]
    assert a == b


@pytest.mark.parametrize(
    "kw",
    [dict(scenario=4), dict(mechanism="nmar"), dict(n=0), dict(rates=((0.1, 1.5), (0.1, 0.1))), dict(association="mid")],
)
def test_config_validation(kw):
    with pytest.raises(ValidationError):
        ScenarioConfig(**kw)
