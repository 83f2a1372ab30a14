"""Missing-covariate handling: multiple imputation in the design and outcome
stages, single mean and stochastic-regression imputation, complete cases.

Method names map onto (function, stratification) pairs:

========  =====================  ==============
method    function               stratification
========  =====================  ==============
MI-R      mi_design_stage        none
MI-NR     mi_design_stage        by-T
MI-NRY    mi_design_stage        by-TY
MI-RY     mi_outcome_stage       none
Mean-*    mean_impute            none/by-T/by-TY
Reg-*     regression_impute      none/by-T/by-TY
CCA       complete_cases         (n/a)
========  =====================  ==============
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (
    CompletedDataset,
    Dataset,
    OutcomeCoefficients,
    Stratification,
    StratifiedTheta,
    ThetaVector,
    ValidationError,
    theta_cell,
)
from .identify import IdentificationError, IdentifiedJoint, Restriction, build_identified_joint
from .infer import FitError, design_matrix, draw_beta, fit_logistic_matrix
from .rngkit import RngStream, sample_categorical_rows, sample_dirichlet, sample_mvnormal

__all__ = [
    "CountTable",
    "GibbsConfig",
    "GibbsState",
    "ImputationError",
    "tabulate_counts",
    "mi_design_stage",
    "mi_outcome_stage",
    "run_outcome_chain",
    "mean_impute",
    "regression_impute",
    "complete_cases",
]


class ImputationError(RuntimeError):
    """An imputation method could not produce completed data."""


def _strat(s) -> Stratification:
    return s if isinstance(s, Stratification) else Stratification(s)


@dataclass(frozen=True, eq=False)
class CountTable:
    """Observed-cell counts, one row of 9 per stratum (theta ordering)."""

    stratification: Stratification
    counts: np.ndarray  # (n_strata, 9) int

    @property
    def sizes(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def stratum(self, key) -> np.ndarray:
        return self.counts[self.stratification.keys().index(tuple(key))]


def tabulate_counts(dataset: Dataset, strat: Stratification | str = Stratification.NONE) -> CountTable:
    strat = _strat(strat)
    cell = theta_cell(dataset.x1, dataset.x2, dataset.d1, dataset.d2)
    s = strat.stratum_index(dataset.t, dataset.y)
    flat = np.bincount(s * 9 + cell, minlength=9 * strat.n_strata)
    counts = flat.reshape(strat.n_strata, 9)
    counts.setflags(write=False)
    return CountTable(strat, counts)


# ---------------------------------------------------------------------------
# drawing missing values from identified joints


def _draw_posterior_theta(table: CountTable, stream: RngStream) -> StratifiedTheta:
    """Dirichlet(counts + 1/K) over all 9K cells, K = number of strata."""
    k = table.counts.size
    p = sample_dirichlet(stream, table.counts.ravel() + 1.0 / k)
    return StratifiedTheta.from_flat(table.stratification, p)


def _candidate_weights(joint: IdentifiedJoint, x1, x2, d1, d2) -> dict:
    """Per-pattern (rows, weights) of candidate completions.

    Single-missing rows get weights over the missing covariate value (0, 1);
    doubly-missing rows get weights over codes 2*x1 + x2.
    """
    p = joint.p
    out = {}
    idx = np.flatnonzero((d1 == 0) & (d2 == 1))
    if idx.size:
        out["01"] = (idx, p[x1[idx], :, 0, 1])
    idx = np.flatnonzero((d1 == 1) & (d2 == 0))
    if idx.size:
        out["10"] = (idx, p[:, x2[idx], 1, 0].T)
    idx = np.flatnonzero((d1 == 1) & (d2 == 1))
    if idx.size:
        out["11"] = (idx, np.broadcast_to(p[:, :, 1, 1].reshape(1, 4), (idx.size, 4)))
    return out


def _apply_draws(x1, x2, cands: dict, stream: RngStream, likelihood: Optional[Callable] = None):
    """Draw every missing entry in place; ``likelihood(rows, x1c, x2c)`` reweights candidates."""
    for pat, (rows, w) in cands.items():
        if pat == "01":
            c1 = np.repeat(x1[rows, None], 2, axis=1)
            c2 = np.broadcast_to(np.array([0, 1]), w.shape)
        elif pat == "10":
            c1 = np.broadcast_to(np.array([0, 1]), w.shape)
            c2 = np.repeat(x2[rows, None], 2, axis=1)
        else:
            c1 = np.broadcast_to(np.array([0, 0, 1, 1]), w.shape)
            c2 = np.broadcast_to(np.array([0, 1, 0, 1]), w.shape)
        if likelihood is not None:
            w = w * likelihood(rows, c1, c2)
        if not np.all(np.isfinite(w)) or np.any(w.sum(axis=1) <= 0):
            raise IdentificationError(f"undefined extrapolation for pattern {pat}")
        k = sample_categorical_rows(stream, w)
        pick = np.arange(rows.size)
        x1[rows] = c1[pick, k]
        x2[rows] = c2[pick, k]


def _impute_from_theta(dataset, theta: StratifiedTheta, restriction, stream, x1, x2, likelihood=None):
    strat = theta.stratification
    sidx = strat.stratum_index(dataset.t, dataset.y)
    incomplete = ~dataset.complete_mask
    for s, key in enumerate(strat.keys()):
        members = np.flatnonzero((sidx == s) & incomplete)
        if not members.size:
            continue
        tv, _ = theta.tables[key]
        try:
            joint = build_identified_joint(tv, restriction)
        except IdentificationError as exc:
            where = "" if key == () else f" in stratum {key}"
            raise IdentificationError(f"{exc}{where}", exc.margin) from exc
        cands = _candidate_weights(joint, x1[members], x2[members], dataset.d1[members], dataset.d2[members])
        # remap candidate rows to dataset positions
        cands = {k: (members[r], w) for k, (r, w) in cands.items()}
        _apply_draws(x1, x2, cands, stream, likelihood)


def mi_design_stage(
    dataset: Dataset,
    restriction: Restriction | str = Restriction.ICIN,
    strat: Stratification | str = Stratification.NONE,
    m: int = 100,
    stream: RngStream = None,
) -> list[CompletedDataset]:
    """Multiple imputation from the posterior of the observed-data table.

    Each of the ``m`` copies uses a fresh draw of the stratified cell
    probabilities, so the copies are exchangeable.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    restriction = Restriction.parse(restriction)
    table = tabulate_counts(dataset, strat)
    out = []
    for _ in range(m):
        theta = _draw_posterior_theta(table, stream)
        x1 = dataset.x1.astype(np.int64)
        x2 = dataset.x2.astype(np.int64)
        _impute_from_theta(dataset, theta, restriction, stream, x1, x2)
        out.append(CompletedDataset.fill(dataset, x1, x2))
    return out


# ---------------------------------------------------------------------------
# outcome-stage data augmentation


@dataclass(frozen=True)
class GibbsConfig:
    burnin: int = 500
    thin: int = 50
    m: int = 100
    beta_prior_variance: float = 100.0

    def __post_init__(self):
        for name in ("burnin", "thin", "m"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError(f"gibbs {name} must be a positive integer")
        if not self.beta_prior_variance > 0:
            raise ValidationError("beta_prior_variance must be positive")

    @property
    def iterations(self) -> int:
        return self.burnin + self.thin * self.m


@dataclass
class GibbsState:
    theta: ThetaVector
    beta: OutcomeCoefficients
    omega: Optional[np.ndarray]
    completed: CompletedDataset
    iteration: int = 0


def _bernoulli_loglik_factor(eta, y):
    # P(Y = y | eta) for the logistic link
    return 1.0 / (1.0 + np.exp(np.where(y == 1, -eta, eta)))


def run_outcome_chain(
    dataset: Dataset,
    restriction: Restriction | str = Restriction.ICIN,
    cfg: GibbsConfig = GibbsConfig(),
    stream: RngStream = None,
    on_retain: Optional[Callable[[GibbsState], None]] = None,
) -> tuple[list[CompletedDataset], np.ndarray]:
    """Gibbs sampler over (theta, beta, X_mis) with the logistic outcome model.

    Returns the retained completed datasets and the matching beta draws
    (shape ``(m, 5)``).
    """
    restriction = Restriction.parse(restriction)
    table = tabulate_counts(dataset, Stratification.NONE)
    t = dataset.t.astype(float)
    y = dataset.y.astype(np.int64)
    kappa = y - 0.5
    prior_prec = np.eye(5) / cfg.beta_prior_variance
    x1 = dataset.x1.astype(np.int64)
    x2 = dataset.x2.astype(np.int64)

    # start: beta = 0, covariates from one design-stage draw
    beta = np.zeros(5)
    theta = _draw_posterior_theta(table, stream)
    _impute_from_theta(dataset, theta, restriction, stream, x1, x2)

    def likelihood(rows, c1, c2):
        tr = t[rows, None]
        eta = beta[0] + beta[1] * c1 + beta[2] * c2 + beta[3] * tr + beta[4] * tr * c2
        return _bernoulli_loglik_factor(eta, y[rows, None])

    kept, draws = [], []
    has_missing = not np.all(dataset.complete_mask)
    for it in range(1, cfg.iterations + 1):
        theta = _draw_posterior_theta(table, stream)
        X = design_matrix(x1, x2, t)
        try:
            beta = draw_beta(X, kappa, beta, prior_prec, stream)
        except (ValueError, FloatingPointError) as exc:
            raise ImputationError(f"chain failure at iteration {it}: {exc}") from exc
        if has_missing:
            _impute_from_theta(dataset, theta, restriction, stream, x1, x2, likelihood)
        if it > cfg.burnin and (it - cfg.burnin) % cfg.thin == 0:
            completed = CompletedDataset.fill(dataset, x1, x2)
            kept.append(completed)
            draws.append(beta.copy())
            if on_retain is not None:
                on_retain(GibbsState(theta.tables[()][0], OutcomeCoefficients.from_array(beta), None, completed, it))
    return kept, np.array(draws)


def mi_outcome_stage(
    dataset: Dataset,
    restriction: Restriction | str = Restriction.ICIN,
    strat: Stratification | str = Stratification.NONE,
    cfg: GibbsConfig = GibbsConfig(),
    stream: RngStream = None,
) -> list[CompletedDataset]:
    """MI-RY (``strat='none'``) or MI-NRY (``strat='by-TY'``)."""
    strat = _strat(strat)
    if strat is Stratification.BY_TY:
        return mi_design_stage(dataset, restriction, strat, cfg.m, stream)
    if strat is not Stratification.NONE:
        raise ValueError("outcome-stage imputation supports stratification 'none' or 'by-TY'")
    return run_outcome_chain(dataset, restriction, cfg, stream)[0]


# ---------------------------------------------------------------------------
# single imputation


def _stratum_label(strat: Stratification, key) -> str:
    if strat is Stratification.NONE:
        return "all units"
    names = ("T", "Y")
    return ", ".join(f"{n}={v}" for n, v in zip(names, key))


def mean_impute(dataset: Dataset, strat: Stratification | str = Stratification.NONE) -> CompletedDataset:
    """Replace each missing covariate by its observed mean within the stratum."""
    strat = _strat(strat)
    sidx = strat.stratum_index(dataset.t, dataset.y)
    x1 = dataset.x1.astype(float)
    x2 = dataset.x2.astype(float)
    for s, key in enumerate(strat.keys()):
        in_s = sidx == s
        for name, x, d in (("x1", x1, dataset.d1), ("x2", x2, dataset.d2)):
            miss = in_s & (d == 1)
            if not miss.any():
                continue
            obs = in_s & (d == 0)
            if not obs.any():
                raise ImputationError(f"no observed {name} in stratum ({_stratum_label(strat, key)})")
            x[miss] = dataset.x1[obs].mean() if name == "x1" else dataset.x2[obs].mean()
    return CompletedDataset.fill(dataset, x1, x2)


def _expit(eta):
    return 1.0 / (1.0 + np.exp(-eta))


def _drawn_conditional(resp, pred, stream, label, which):
    """Fit resp ~ pred on complete cases and draw coefficients from N(MLE, cov)."""
    X = np.column_stack([np.ones(pred.size), pred])
    try:
        fit = fit_logistic_matrix(X, resp)
    except FitError as exc:
        raise ImputationError(f"{which} regression failed in stratum ({label}): {exc}") from exc
    if fit.separation_flag:
        raise ImputationError(f"{which} regression separated in stratum ({label})")
    return sample_mvnormal(stream, fit.coef, fit.covariance)


def regression_impute(
    dataset: Dataset, strat: Stratification | str = Stratification.NONE, stream: RngStream = None
) -> CompletedDataset:
    """Stochastic single imputation from complete-case logistic regressions."""
    strat = _strat(strat)
    sidx = strat.stratum_index(dataset.t, dataset.y)
    cc = dataset.complete_mask
    x1 = dataset.x1.astype(np.int64)
    x2 = dataset.x2.astype(np.int64)
    gen = stream.gen
    for s, key in enumerate(strat.keys()):
        in_s = sidx == s
        miss1 = in_s & (dataset.d1 == 1) & (dataset.d2 == 0)
        miss2 = in_s & (dataset.d1 == 0) & (dataset.d2 == 1)
        both = in_s & (dataset.d1 == 1) & (dataset.d2 == 1)
        if not (miss1.any() or miss2.any() or both.any()):
            continue
        label = _stratum_label(strat, key)
        ref = in_s & cc
        if not ref.any():
            raise ImputationError(f"no complete cases in stratum ({label})")
        c1 = dataset.x1[ref].astype(float)
        c2 = dataset.x2[ref].astype(float)
        if miss1.any():
            g = _drawn_conditional(c1, c2, stream, label, "X1~X2")
            p = _expit(g[0] + g[1] * x2[miss1])
            x1[miss1] = gen.random(p.size) < p
        if miss2.any() or both.any():
            g = _drawn_conditional(c2, c1, stream, label, "X2~X1")
            if both.any():
                succ = c1.sum()
                p1 = gen.beta(succ + 0.5, c1.size - succ + 0.5)
                x1[both] = gen.random(int(both.sum())) < p1
            rows = miss2 | both
            p = _expit(g[0] + g[1] * x1[rows])
            x2[rows] = gen.random(p.size) < p
    return CompletedDataset.fill(dataset, x1, x2)


def complete_cases(dataset: Dataset) -> Dataset:
    mask = dataset.complete_mask
    if not mask.any():
        raise ImputationError("no complete cases")
    return dataset.subset(mask)
