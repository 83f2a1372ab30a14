"""Synthetic randomized experiments with missing binary covariates.

Three missingness scenarios are supported:

1. (D1, D2) independent of treatment;
2. missingness rates that differ by treatment arm;
3. as scenario 1, with (D1, D2) entering the outcome model.

Covariates are drawn either MCAR (a fixed covariate law, then independent
deletion) or from a loglinear model for the (X1, X2, D1, D2) table whose
two-way terms make the mechanism ICIN.
"""

from __future__ import annotations

import itertools
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .core import Dataset, OutcomeCoefficients, ValidationError
from .rngkit import RngStream


@dataclass(frozen=True)
class LoglinearSpec:
    lambda0: float = 5.0
    lx1: float = 0.3
    lx2: float = -0.5
    ld1: float = 0.009
    ld2: float = 0.05
    lx1x2: float = 0.5
    lx1d2: float = 0.75
    lx2d1: float = 1.0
    ld1d2: float = 0.25

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not np.isfinite(v):
                raise ValidationError(f"loglinear coefficient {k} not finite")

    def log_mean(self, x1, x2, d1, d2):
        return (
            self.lambda0
            + self.lx1 * x1
            + self.lx2 * x2
            + self.ld1 * d1
            + self.ld2 * d2
            + self.lx1x2 * x1 * x2
            + self.lx1d2 * x1 * d2
            + self.lx2d1 * x2 * d1
            + self.ld1d2 * d1 * d2
        )


def loglinear_expected_counts(spec: LoglinearSpec) -> np.ndarray:
    """Expected counts m[x1, x2, d1, d2] = exp(loglinear predictor)."""
    m = np.empty((2, 2, 2, 2))
    with np.errstate(over="raise"):
        try:
            for x1, x2, d1, d2 in itertools.product((0, 1), repeat=4):
                m[x1, x2, d1, d2] = np.exp(spec.log_mean(x1, x2, d1, d2))
        except FloatingPointError as exc:
            raise ValueError("loglinear coefficients out of range: exp overflow") from exc
    if not np.all(np.isfinite(m)):
        raise ValueError("loglinear coefficients out of range: exp overflow")
    return m


def loglinear_cell_probs(spec: LoglinearSpec) -> np.ndarray:
    """pi[x1, x2, d1, d2]: for each (d1, d2), a distribution over (x1, x2)."""
    m = loglinear_expected_counts(spec)
    return m / m.sum(axis=(0, 1), keepdims=True)


# MCAR covariate law: P(X1=1) and P(X2=1 | X1)
MCAR_P_X1 = 0.7
MCAR_P_X2_GIVEN_X1 = (0.45, 0.6)

HIGH = OutcomeCoefficients(b0=0.0, b1=0.8, b2=0.9, bt=0.3, btx2=0.5)
LOW = OutcomeCoefficients(b0=0.0, b1=0.02, b2=0.05, bt=0.3, btx2=0.015)


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation setting.

    Missingness rates are P(D1=1), P(D2=1) per arm as ``((control), (treated))``
    pairs; by default they are filled in from the scenario number.
    """

    scenario: int = 1
    mechanism: str = "icin"
    association: str = "high"
    n: int = 1000
    treatment_prob: float = 0.5
    truth: Optional[OutcomeCoefficients] = None
    rates: Optional[tuple] = None
    loglinear: LoglinearSpec = field(default_factory=LoglinearSpec)

    def __post_init__(self):
        if self.scenario not in (1, 2, 3):
            raise ValidationError("scenario must be 1, 2 or 3")
        mech = self.mechanism.lower()
        if mech not in ("mcar", "icin"):
            raise ValidationError("mechanism must be 'mcar' or 'icin'")
        object.__setattr__(self, "mechanism", mech)
        if self.association not in ("high", "low"):
            raise ValidationError("association must be 'high' or 'low'")
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if not 0 <= self.treatment_prob <= 1:
            raise ValidationError("treatment_prob must lie in [0, 1]")
        if self.truth is None:
            truth = HIGH if self.association == "high" else LOW
            if self.scenario == 3:
                truth = replace(truth, bd1=-0.6, bd2=-0.4)
            object.__setattr__(self, "truth", truth)
        elif isinstance(self.truth, dict):
            object.__setattr__(self, "truth", OutcomeCoefficients(**self.truth))
        if isinstance(self.loglinear, dict):
            object.__setattr__(self, "loglinear", LoglinearSpec(**self.loglinear))
        if self.rates is None:
            if self.scenario == 2:
                rates = ((0.10, 0.10), (0.35, 0.40))
            else:
                rates = ((0.35, 0.40), (0.35, 0.40))
            object.__setattr__(self, "rates", rates)
        rates = tuple(tuple(float(r) for r in arm) for arm in self.rates)
        if len(rates) != 2 or any(len(a) != 2 for a in rates):
            raise ValidationError("rates must be ((d1_control, d2_control), (d1_treated, d2_treated))")
        if any(not 0 <= r <= 1 for a in rates for r in a):
            raise ValidationError("missingness rates must lie in [0, 1]")
        object.__setattr__(self, "rates", rates)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["truth"] = {k: v for k, v in asdict(self.truth).items() if v is not None}
        out["loglinear"] = asdict(self.loglinear)
        out["rates"] = [list(a) for a in self.rates]
        return out


def _logistic(eta):
    return 1.0 / (1.0 + np.exp(-eta))


def generate_dataset(config: ScenarioConfig, stream: RngStream) -> tuple[Dataset, Dataset]:
    """Draw one experiment; returns (observed data, data before deletion)."""
    gen = stream.gen
    n = config.n
    t = (gen.random(n) < config.treatment_prob).astype(np.int8)
    rates = np.asarray(config.rates)  # [arm, covariate]
    r1 = rates[t, 0]
    r2 = rates[t, 1]

    if config.mechanism == "mcar":
        x1 = (gen.random(n) < MCAR_P_X1).astype(np.int8)
        p2 = np.where(x1 == 1, MCAR_P_X2_GIVEN_X1[1], MCAR_P_X2_GIVEN_X1[0])
        x2 = (gen.random(n) < p2).astype(np.int8)
        d1 = (gen.random(n) < r1).astype(np.int8)
        d2 = (gen.random(n) < r2).astype(np.int8)
    else:
        d1 = (gen.random(n) < r1).astype(np.int8)
        d2 = (gen.random(n) < r2).astype(np.int8)
        pi = loglinear_cell_probs(config.loglinear)
        # rows of cell probabilities over (x1, x2) codes 0..3 = 2*x1 + x2
        table = pi.transpose(2, 3, 0, 1).reshape(2, 2, 4)[d1, d2]
        cum = np.cumsum(table, axis=1)
        u = gen.random(n)[:, None] * cum[:, -1:]
        code = np.minimum((cum <= u).sum(axis=1), 3)
        x1 = (code // 2).astype(np.int8)
        x2 = (code % 2).astype(np.int8)

    b = config.truth
    eta = b.b1 * x1 + b.b2 * x2 + b.bt * t + b.btx2 * t * x2
    if config.scenario == 3:
        eta = eta + (b.bd1 or 0.0) * d1 + (b.bd2 or 0.0) * d2
    y = (gen.random(n) < _logistic(eta)).astype(np.int8)

    full = Dataset.from_arrays(t, y, x1, x2, np.zeros(n), np.zeros(n))
    observed = Dataset.from_arrays(t, y, x1, x2, d1, d2)
    return observed, full
