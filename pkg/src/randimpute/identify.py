"""Non-parametric identification of the (X1, X2, D1, D2) table.

Given the nine observed-data probabilities, build the unique 16-cell
full-data distribution satisfying either itemwise conditionally independent
non-response (ICIN) or the MAR equating rule, and derive the per-pattern
extrapolation distributions used for imputation.

Cell arrays are indexed ``p[x1, x2, d1, d2]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import MissingnessPattern, ThetaVector


class Restriction(str, Enum):
    ICIN = "icin"
    MAR = "mar"

    @classmethod
    def parse(cls, value) -> "Restriction":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class IdentificationError(ValueError):
    """The observed-data table does not determine a full-data distribution."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


@dataclass(frozen=True, eq=False)
class IdentifiedJoint:
    p: np.ndarray
    c: float
    restriction: Restriction
    source: ThetaVector

    def pattern_table(self, pattern: MissingnessPattern | tuple) -> np.ndarray:
        d1, d2 = _code(pattern)
        return self.p[:, :, d1, d2]


def _code(pattern) -> tuple[int, int]:
    if isinstance(pattern, MissingnessPattern):
        return pattern.code
    d1, d2 = pattern
    return int(d1), int(d2)


def _complete_margins(theta: ThetaVector):
    cc = theta.complete_table()
    m1 = cc.sum(axis=1)  # f(x1, D=00)
    m2 = cc.sum(axis=0)  # f(x2, D=00)
    for j, m in ((1, m1), (2, m2)):
        for v in (0, 1):
            if m[v] <= 0:
                raise IdentificationError(
                    f"identification degenerate: complete-case margin f(x{j}={v}, D=00) is zero",
                    margin=(j, v),
                )
    return cc, m1, m2


def build_identified_joint(theta: ThetaVector, restriction: Restriction | str = Restriction.ICIN) -> IdentifiedJoint:
    """Full-data distribution implied by ``theta`` under ``restriction``.

    ICIN multiplies the complete-case table by the pattern-specific odds
    factors f(x_j, D)/f(x_j, D=00); the doubly-missing cells carry the
    normalizer C so that they sum to P(D=11). MAR equates each pattern's
    conditional of the missing part given the observed part with the
    complete-case conditional.
    """
    if not isinstance(theta, ThetaVector):
        theta = ThetaVector(theta)
    restriction = Restriction.parse(restriction)
    cc, m1, m2 = _complete_margins(theta)
    f01 = theta.x1_mass_01()
    f10 = theta.x2_mass_10()
    p = np.empty((2, 2, 2, 2))
    p[:, :, 0, 0] = cc

    if restriction is Restriction.ICIN:
        r1 = f01 / m1  # exp(eta_01(x1))
        r2 = f10 / m2  # exp(eta_10(x2))
        p[:, :, 0, 1] = cc * r1[:, None]
        p[:, :, 1, 0] = cc * r2[None, :]
        base = cc * r1[:, None] * r2[None, :]
        c = float(base.sum())
        p[:, :, 1, 1] = base * (theta.both_missing / c)
    else:
        c = 1.0
        p[:, :, 0, 1] = (cc / m1[:, None]) * f01[:, None]
        p[:, :, 1, 0] = (cc / m2[None, :]) * f10[None, :]
        p[:, :, 1, 1] = (cc / cc.sum()) * theta.both_missing

    p.setflags(write=False)
    return IdentifiedJoint(p, c, restriction, theta)


def observed_theta(joint: IdentifiedJoint) -> np.ndarray:
    """Observed-data implications of a full-data table, in theta ordering."""
    p = joint.p
    s01 = p[:, :, 0, 1].sum(axis=1)
    s10 = p[:, :, 1, 0].sum(axis=0)
    return np.array(
        [
            p[0, 0, 0, 0],
            p[0, 1, 0, 0],
            p[1, 0, 0, 0],
            p[1, 1, 0, 0],
            s01[1],
            s01[0],
            s10[1],
            s10[0],
            p[:, :, 1, 1].sum(),
        ]
    )


def extrapolation_dist(joint: IdentifiedJoint, pattern, x_obs=None) -> np.ndarray:
    """f(X_mis | X_obs, D) for one pattern and observed value.

    Returns a length-2 vector over the missing covariate for single-missing
    patterns (``x_obs`` is the observed covariate's value), or a 2x2 table
    over (x1, x2) for the doubly-missing pattern.
    """
    d1, d2 = _code(pattern)
    if (d1, d2) == (0, 0):
        raise ValueError("nothing to extrapolate: pattern (0,0) has no missing values")
    if (d1, d2) == (0, 1):
        w = joint.p[int(x_obs), :, 0, 1]
    elif (d1, d2) == (1, 0):
        w = joint.p[:, int(x_obs), 1, 0]
    else:
        w = joint.p[:, :, 1, 1]
    total = w.sum()
    if not total > 0:
        raise IdentificationError(f"undefined extrapolation: zero mass for pattern {d1}{d2}, x_obs={x_obs}")
    return w / total


@dataclass
class DiagnosticsReport:
    restriction: Restriction
    marginalization_error: float
    total_mass_error: float
    restriction_error: float
    checks: dict = field(default_factory=dict)

    def passed(self, marg_tol: float = 1e-12, restriction_tol: float = 1e-10) -> bool:
        return self.marginalization_error <= marg_tol and self.restriction_error <= restriction_tol

    def to_text(self) -> str:
        lines = [
            f"restriction = {self.restriction.value}",
            f"marginalization_error = {self.marginalization_error:.3e}",
            f"total_mass_error = {self.total_mass_error:.3e}",
            f"restriction_error = {self.restriction_error:.3e}",
        ]
        lines += [f"{k} = {v:.3e}" for k, v in self.checks.items()]
        lines.append(f"passed = {str(self.passed()).lower()}")
        return "\n".join(lines)


def _conditional_odds_ratio_errors(p: np.ndarray) -> dict:
    out = {}
    for other in (0, 1):
        for d_other in (0, 1):
            # X1 vs D1 given (X2, D2)
            t = p[:, other, :, d_other]
            if np.all(t > 0):
                out[f"or_x1_d1|x2={other},d2={d_other}"] = abs(t[1, 1] * t[0, 0] / (t[1, 0] * t[0, 1]) - 1.0)
            # X2 vs D2 given (X1, D1)
            t = p[other, :, d_other, :]
            if np.all(t > 0):
                out[f"or_x2_d2|x1={other},d1={d_other}"] = abs(t[1, 1] * t[0, 0] / (t[1, 0] * t[0, 1]) - 1.0)
    return out


def _conditional(w: np.ndarray) -> np.ndarray | None:
    s = w.sum()
    return w / s if s > 0 else None


def _mar_errors(joint: IdentifiedJoint) -> dict:
    p = joint.p
    cc = p[:, :, 0, 0]
    out = {}
    for v in (0, 1):
        ref = _conditional(cc[v, :])  # f(x2 | x1=v, D=00)
        for d in ((0, 1), (1, 1)):
            got = _conditional(p[v, :, d[0], d[1]])
            if ref is not None and got is not None:
                out[f"x2|x1={v},D={d[0]}{d[1]}"] = float(np.max(np.abs(got - ref)))
        ref = _conditional(cc[:, v])  # f(x1 | x2=v, D=00)
        for d in ((1, 0), (1, 1)):
            got = _conditional(p[:, v, d[0], d[1]])
            if ref is not None and got is not None:
                out[f"x1|x2={v},D={d[0]}{d[1]}"] = float(np.max(np.abs(got - ref)))
    ref = _conditional(cc)
    got = _conditional(p[:, :, 1, 1])
    if ref is not None and got is not None:
        out["x1,x2|D=11"] = float(np.max(np.abs(got - ref)))
    return out


def check_identification(joint: IdentifiedJoint) -> DiagnosticsReport:
    """Marginalization error plus the restriction-specific check; never raises."""
    try:
        marg = float(np.max(np.abs(observed_theta(joint) - joint.source.p)))
        total = float(abs(joint.p.sum() - 1.0))
        if joint.restriction is Restriction.ICIN:
            checks = _conditional_odds_ratio_errors(joint.p)
        else:
            checks = _mar_errors(joint)
        r_err = max(checks.values()) if checks else 0.0
    except Exception:  # malformed joint
        return DiagnosticsReport(joint.restriction, float("inf"), float("inf"), float("inf"))
    return DiagnosticsReport(joint.restriction, marg, total, float(r_err), checks)
