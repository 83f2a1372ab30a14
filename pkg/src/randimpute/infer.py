"""Logistic analysis model fitting, the Polya-Gamma coefficient update,
Rubin's combining rules and simulation summaries."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .core import CompletedDataset, Dataset, OutcomeCoefficients
from .rngkit import RngStream, sample_polya_gamma_array

INTERACTION = "with-interaction"
ITT = "itt-no-interaction"

SEPARATION_BOUND = 15.0
SCORE_TOL = 1e-8
MAX_ITER = 100


class FitError(RuntimeError):
    """The logistic fit failed (rank deficiency or non-convergence)."""


def _parse_model(model: str) -> str:
    aliases = {"interaction": INTERACTION, "itt": ITT, INTERACTION: INTERACTION, ITT: ITT}
    try:
        return aliases[model]
    except KeyError:
        raise ValueError(f"unknown analysis model {model!r}") from None


def design_matrix(x1, x2, t, model: str = INTERACTION) -> np.ndarray:
    """Rows (1, x1, x2, t, t*x2), or (1, x1, x2, t) for the ITT model."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    t = np.asarray(t, dtype=float)
    cols = [np.ones_like(t), x1, x2, t]
    if _parse_model(model) == INTERACTION:
        cols.append(t * x2)
    return np.column_stack(cols)


def _as_arrays(data, model):
    if isinstance(data, Dataset):
        if np.any(data.d1) or np.any(data.d2):
            raise ValueError("dataset has missing covariates; impute or take complete cases first")
    return design_matrix(data.x1, data.x2, data.t, model), np.asarray(data.y, dtype=float)


def _expit(eta):
    return 0.5 * (1.0 + np.tanh(0.5 * eta))


def loglik(beta, X, y, w=None) -> float:
    eta = X @ beta
    w = np.ones_like(y) if w is None else w
    return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))


def score(beta, X, y, w=None) -> np.ndarray:
    w = np.ones_like(y) if w is None else w
    return X.T @ (w * (y - _expit(X @ beta)))


def information(beta, X, w=None) -> np.ndarray:
    """Observed (= expected) information of the logistic log-likelihood."""
    mu = _expit(X @ beta)
    w = np.ones(X.shape[0]) if w is None else w
    return (X * (w * mu * (1.0 - mu))[:, None]).T @ X


@dataclass
class FitResult:
    coef: np.ndarray
    covariance: np.ndarray
    converged: bool
    iterations: int
    separation_flag: bool
    model: str = INTERACTION

    @property
    def coefficients(self) -> OutcomeCoefficients:
        return OutcomeCoefficients.from_array(self.coef)

    def estimate(self, name: str) -> tuple[float, float]:
        """(point estimate, variance) for a named coefficient."""
        i = {"b0": 0, "b1": 1, "b2": 2, "bt": 3, "btx2": 4}[name]
        return float(self.coef[i]), float(self.covariance[i, i])


def _collapse(X, y, w):
    """Group identical design rows into binomial counts."""
    rows, inv = np.unique(X, axis=0, return_inverse=True)
    inv = inv.ravel()
    n = np.bincount(inv, weights=w, minlength=rows.shape[0])
    s = np.bincount(inv, weights=w * y, minlength=rows.shape[0])
    return rows, n, s


def fit_logistic_matrix(X, y, weights=None, model: str = INTERACTION) -> FitResult:
    """Maximum likelihood by iteratively reweighted least squares."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, dtype=float)
    rows, n, s = _collapse(X, y, w)
    p = X.shape[1]
    if np.linalg.matrix_rank(rows) < p:
        raise FitError("design matrix is rank deficient")

    beta = np.zeros(p)
    trace = []
    separated = False
    for it in range(1, MAX_ITER + 1):
        mu = _expit(rows @ beta)
        g = rows.T @ (s - n * mu)
        gmax = float(np.max(np.abs(g)))
        trace.append(gmax)
        if gmax <= SCORE_TOL:
            info = (rows * (n * mu * (1 - mu))[:, None]).T @ rows
            cov = np.linalg.inv(info)
            return FitResult(beta, 0.5 * (cov + cov.T), True, it - 1, False, model)
        info = (rows * (n * mu * (1 - mu))[:, None]).T @ rows
        try:
            step = np.linalg.solve(info, g)
        except np.linalg.LinAlgError as exc:
            raise FitError("singular information matrix") from exc
        beta = beta + step
        if np.any(np.abs(beta) > SEPARATION_BOUND):
            separated = True
            break

    mu = _expit(rows @ beta)
    info = (rows * (n * mu * (1 - mu))[:, None]).T @ rows
    if not separated:
        raise FitError(
            f"IRLS did not converge in {MAX_ITER} iterations; "
            f"max|score| first/last = {trace[0]:.3g}/{trace[-1]:.3g}"
        )
    cov = np.linalg.pinv(info)
    return FitResult(beta, 0.5 * (cov + cov.T), False, len(trace), True, model)


def fit_logistic(completed: CompletedDataset | Dataset, model: str = INTERACTION) -> FitResult:
    model = _parse_model(model)
    X, y = _as_arrays(completed, model)
    return fit_logistic_matrix(X, y, model=model)


# ---------------------------------------------------------------------------
# Bayesian update


def draw_beta(X, kappa, beta, prior_precision, stream: RngStream) -> np.ndarray:
    """One Polya-Gamma Gibbs update of logistic coefficients (array interface)."""
    omega = sample_polya_gamma_array(stream, X @ beta)
    prec = (X * omega[:, None]).T @ X + prior_precision
    try:
        chol = np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as exc:
        raise ValueError("posterior precision not positive definite") from exc
    # mean = prec^{-1} X' kappa; draw = mean + L^{-T} e
    m = np.linalg.solve(chol.T, np.linalg.solve(chol, X.T @ kappa))
    e = stream.gen.standard_normal(X.shape[1])
    out = m + np.linalg.solve(chol.T, e)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite coefficient draw")
    return out


def sample_beta_conditional(
    completed: CompletedDataset | Dataset,
    current_beta,
    prior_variance: float,
    stream: RngStream,
    model: str = INTERACTION,
) -> OutcomeCoefficients:
    """Exact full-conditional draw of beta given the completed data.

    Prior is Normal(0, prior_variance * I).
    """
    if not prior_variance > 0:
        raise ValueError("prior_variance must be positive")
    X, y = _as_arrays(completed, model)
    beta = current_beta.as_array() if isinstance(current_beta, OutcomeCoefficients) else np.asarray(current_beta, float)
    beta = beta[: X.shape[1]]
    prior_prec = np.eye(X.shape[1]) / prior_variance
    return OutcomeCoefficients.from_array(draw_beta(X, y - 0.5, beta, prior_prec, stream))


# ---------------------------------------------------------------------------
# Combining and summarizing


@dataclass(frozen=True)
class PooledEstimate:
    qbar: float
    w: float
    b: float
    t_var: float
    df: float
    ci: tuple
    level: float
    m: int

    @property
    def se(self) -> float:
        return float(np.sqrt(self.t_var))


DF_CAP = 1e6


def rubin_combine(estimates: Sequence[float], variances: Sequence[float], level: float = 0.95) -> PooledEstimate:
    q = np.asarray(estimates, dtype=float)
    u = np.asarray(variances, dtype=float)
    if q.shape != u.shape:
        raise ValueError("estimates and variances differ in length")
    m = q.size
    if m < 2:
        raise ValueError("need at least 2 imputations")
    if np.any(u < 0):
        raise ValueError("negative variance")
    _check_level(level)
    qbar = float(q.mean())
    w = float(u.mean())
    b = float(q.var(ddof=1))
    inflated = (1.0 + 1.0 / m) * b
    t_var = w + inflated
    if inflated == 0:
        df = DF_CAP
    else:
        # a tiny but nonzero b would overflow; the cap applies there too
        with np.errstate(over="ignore", divide="ignore"):
            df = float(min(DF_CAP, (m - 1) * (1.0 + np.float64(w) / inflated) ** 2))
    half = stats.t.ppf(0.5 * (1 + level), df) * np.sqrt(t_var)
    return PooledEstimate(qbar, w, b, t_var, float(df), (qbar - half, qbar + half), level, m)


def _check_level(level):
    if not 0 < level < 1:
        raise ValueError("confidence level must lie in (0, 1)")


def wald_interval(estimate: float, variance: float, level: float = 0.95) -> tuple[float, float]:
    _check_level(level)
    if variance < 0:
        raise ValueError("negative variance")
    half = stats.norm.ppf(0.5 * (1 + level)) * np.sqrt(variance)
    return (estimate - half, estimate + half)


@dataclass
class MetricsRow:
    method: str
    coefficient: str
    abs_bias: float
    mc_sd: float
    se: float
    coverage: float
    avg_ci_length: float
    n_used: int
    n_failed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def aggregate_metrics(
    records: Sequence[tuple],
    truth: float,
    method: str = "",
    coefficient: str = "",
    n_failed: int = 0,
) -> MetricsRow:
    """Monte Carlo summary of (estimate, variance, (lower, upper)) records."""
    if len(records) < 2:
        raise ValueError("need at least 2 successful replications")
    est = np.array([r[0] for r in records], dtype=float)
    var = np.array([r[1] for r in records], dtype=float)
    lo = np.array([r[2][0] for r in records], dtype=float)
    hi = np.array([r[2][1] for r in records], dtype=float)
    return MetricsRow(
        method=method,
        coefficient=coefficient,
        abs_bias=float(abs(est.mean() - truth)),
        mc_sd=float(est.std(ddof=1)),
        se=float(np.sqrt(var.mean())),
        coverage=float(np.mean((lo <= truth) & (truth <= hi))),
        avg_ci_length=float(np.mean(hi - lo)),
        n_used=len(records),
        n_failed=int(n_failed),
    )
