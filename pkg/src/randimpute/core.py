"""Domain value types: units, datasets, observed-data probability vectors.

Datasets are stored column-wise as numpy arrays. Covariate absence is held
in explicit missingness masks (``d1``, ``d2``); the value arrays carry a
placeholder 0 under the mask which is never exposed through ``units``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np


class ValidationError(ValueError):
    """Input data violates a domain invariant."""


@dataclass(frozen=True)
class Unit:
    t: int
    y: int
    x1: Optional[float] = None
    x2: Optional[float] = None

    @property
    def d1(self) -> int:
        return int(self.x1 is None)

    @property
    def d2(self) -> int:
        return int(self.x2 is None)


@dataclass(frozen=True)
class MissingnessPattern:
    d1: int
    d2: int

    def __post_init__(self):
        if self.d1 not in (0, 1) or self.d2 not in (0, 1):
            raise ValidationError(f"invalid missingness pattern ({self.d1},{self.d2})")

    @property
    def code(self) -> tuple[int, int]:
        return (self.d1, self.d2)

    def __str__(self):
        return f"{self.d1}{self.d2}"


PATTERNS = tuple(MissingnessPattern(a, b) for a in (0, 1) for b in (0, 1))


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Randomized experiment with two maybe-missing binary covariates."""

    t: np.ndarray
    y: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray

    @property
    def n(self) -> int:
        return int(self.t.shape[0])

    def __len__(self):
        return self.n

    @property
    def units(self) -> list[Unit]:
        return [
            Unit(
                int(self.t[i]),
                int(self.y[i]),
                None if self.d1[i] else int(self.x1[i]),
                None if self.d2[i] else int(self.x2[i]),
            )
            for i in range(self.n)
        ]

    @property
    def complete_mask(self) -> np.ndarray:
        return (self.d1 == 0) & (self.d2 == 0)

    def subset(self, mask) -> "Dataset":
        return Dataset(*(getattr(self, k)[mask] for k in ("t", "y", "x1", "x2", "d1", "d2")))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("t", "y", "x1", "x2", "d1", "d2")
        )

    @classmethod
    def from_arrays(cls, t, y, x1, x2, d1=None, d2=None) -> "Dataset":
        """Build from arrays; covariate entries that are NaN (or flagged by ``d``) are missing."""
        t = np.asarray(t)
        y = np.asarray(y)
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        m1 = np.isnan(x1) if d1 is None else np.asarray(d1, dtype=bool)
        m2 = np.isnan(x2) if d2 is None else np.asarray(d2, dtype=bool)
        n = t.shape[0]
        if not (y.shape == x1.shape == x2.shape == m1.shape == m2.shape == (n,)):
            raise ValidationError("column lengths differ")
        if n < 1:
            raise ValidationError("dataset must contain at least one unit")
        _check_binary(t, "treatment")
        _check_binary(y, "outcome")
        for name, x, m in (("x1", x1, m1), ("x2", x2, m2)):
            vals = x[~m]
            if not np.all((vals == 0) | (vals == 1)):
                raise ValidationError(f"covariate {name} not binary")
        return cls(
            _frozen(t, np.int8),
            _frozen(y, np.int8),
            _frozen(np.where(m1, 0, np.nan_to_num(x1)), np.int8),
            _frozen(np.where(m2, 0, np.nan_to_num(x2)), np.int8),
            _frozen(m1, np.int8),
            _frozen(m2, np.int8),
        )


def _check_binary(a: np.ndarray, what: str) -> None:
    a = np.asarray(a, dtype=float)
    if np.any(np.isnan(a)):
        raise ValidationError(f"{what} missing")
    if not np.all((a == 0) | (a == 1)):
        raise ValidationError(f"{what} not binary")


def validate_dataset(raw: Iterable[Unit] | Dataset) -> Dataset:
    """Check a sequence of units and return a :class:`Dataset`.

    Missingness indicators are recomputed from covariate absence. Treatment
    and outcome must be present and binary.
    """
    if isinstance(raw, Dataset):
        return Dataset.from_arrays(raw.t, raw.y, raw.x1, raw.x2, raw.d1, raw.d2)
    units = list(raw)
    if not units:
        raise ValidationError("dataset must contain at least one unit")
    for i, u in enumerate(units):
        if u.t is None:
            raise ValidationError(f"unit {i}: treatment missing")
        if u.y is None:
            raise ValidationError(f"unit {i}: outcome missing")
        if u.t not in (0, 1):
            raise ValidationError(f"unit {i}: treatment not binary")
        if u.y not in (0, 1):
            raise ValidationError(f"unit {i}: outcome not binary")
    nan = float("nan")
    return Dataset.from_arrays(
        [u.t for u in units],
        [u.y for u in units],
        [nan if u.x1 is None else u.x1 for u in units],
        [nan if u.x2 is None else u.x2 for u in units],
    )


def theta_cell(x1: np.ndarray, x2: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """Map units to their observed-data cell 0..8 (theta_1..theta_9 ordering)."""
    x1 = np.asarray(x1, dtype=np.int64)
    x2 = np.asarray(x2, dtype=np.int64)
    d1 = np.asarray(d1, dtype=bool)
    d2 = np.asarray(d2, dtype=bool)
    cell = 2 * x1 + x2
    # theta_5 is X1=1, theta_6 is X1=0 (note the reversed order)
    cell = np.where(~d1 & d2, 5 - x1, cell)
    cell = np.where(d1 & ~d2, 7 - x2, cell)
    cell = np.where(d1 & d2, 8, cell)
    return cell


@dataclass(frozen=True, eq=False)
class ThetaVector:
    """The nine observed-data probabilities.

    Order: P(00,D=00), P(01,D=00), P(10,D=00), P(11,D=00), P(X1=1,D=01),
    P(X1=0,D=01), P(X2=1,D=10), P(X2=0,D=10), P(D=11).
    """

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.shape != (9,):
            raise ValidationError("theta must have 9 entries")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValidationError("theta entries must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError(f"theta does not sum to 1 (sum={p.sum():.17g})")
        object.__setattr__(self, "p", _frozen(p, float))

    @classmethod
    def from_counts(cls, counts) -> "ThetaVector":
        c = np.asarray(counts, dtype=float)
        return cls(c / c.sum())

    def complete_table(self) -> np.ndarray:
        """f(x1, x2, D=00) as a 2x2 array."""
        return self.p[:4].reshape(2, 2)

    def x1_mass_01(self) -> np.ndarray:
        """f(x1, D=01) indexed by x1."""
        return np.array([self.p[5], self.p[4]])

    def x2_mass_10(self) -> np.ndarray:
        """f(x2, D=10) indexed by x2."""
        return np.array([self.p[7], self.p[6]])

    @property
    def both_missing(self) -> float:
        return float(self.p[8])

    def __eq__(self, other):
        return isinstance(other, ThetaVector) and np.array_equal(self.p, other.p)

    def __repr__(self):
        return f"ThetaVector({np.array2string(self.p, precision=4)})"


class Stratification(str, Enum):
    NONE = "none"
    BY_T = "by-T"
    BY_TY = "by-TY"

    @property
    def n_strata(self) -> int:
        return {"none": 1, "by-T": 2, "by-TY": 4}[self.value]

    def keys(self) -> list[tuple[int, ...]]:
        if self is Stratification.NONE:
            return [()]
        if self is Stratification.BY_T:
            return [(0,), (1,)]
        return [(t, y) for t in (0, 1) for y in (0, 1)]

    def stratum_index(self, t: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Integer stratum id per unit, aligned with :meth:`keys`."""
        t = np.asarray(t, dtype=np.int64)
        if self is Stratification.NONE:
            return np.zeros_like(t)
        if self is Stratification.BY_T:
            return t
        return 2 * t + np.asarray(y, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class StratifiedTheta:
    stratification: Stratification
    tables: Mapping[tuple[int, ...], tuple[ThetaVector, float]]

    def __post_init__(self):
        if len(self.tables) != self.stratification.n_strata:
            raise ValidationError("stratum count does not match stratification")
        w = np.array([v[1] for v in self.tables.values()])
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("stratum weights must be nonnegative and sum to 1")

    @classmethod
    def from_flat(cls, strat: Stratification, p: np.ndarray) -> "StratifiedTheta":
        """Split a flat (9 * n_strata) probability vector into per-stratum tables."""
        p = np.asarray(p, dtype=float).reshape(strat.n_strata, 9)
        tables = {}
        for key, row in zip(strat.keys(), p):
            w = row.sum()
            tables[key] = (ThetaVector(row / w), float(w))
        return cls(strat, tables)


COEF_NAMES = ("b0", "b1", "b2", "bt", "btx2")


@dataclass(frozen=True)
class OutcomeCoefficients:
    b0: float = 0.0
    b1: float = 0.0
    b2: float = 0.0
    bt: float = 0.0
    btx2: float = 0.0
    bd1: Optional[float] = None
    bd2: Optional[float] = None

    def __post_init__(self):
        for k, v in self.__dict__.items():
            if v is not None and not np.isfinite(v):
                raise ValidationError(f"coefficient {k} not finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.b0, self.b1, self.b2, self.bt, self.btx2], dtype=float)

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "OutcomeCoefficients":
        a = [float(v) for v in a]
        if len(a) == 4:  # ITT model: no interaction
            a = a + [0.0]
        return cls(*a[:5])


@dataclass(frozen=True, eq=False)
class CompletedDataset:
    """A dataset with every covariate filled in.

    ``x1``/``x2`` are floats: imputed entries are 0/1 except under mean
    imputation. ``imputed1``/``imputed2`` record which entries were filled.
    """

    t: np.ndarray
    y: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    imputed1: np.ndarray = field(default=None)
    imputed2: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.imputed1 is None:
            object.__setattr__(self, "imputed1", np.asarray(self.d1, dtype=bool))
        if self.imputed2 is None:
            object.__setattr__(self, "imputed2", np.asarray(self.d2, dtype=bool))

    @property
    def n(self) -> int:
        return int(self.t.shape[0])

    @classmethod
    def fill(cls, data: Dataset, x1: np.ndarray, x2: np.ndarray) -> "CompletedDataset":
        """Combine observed entries of ``data`` with fill values where missing."""
        m1 = data.d1.astype(bool)
        m2 = data.d2.astype(bool)
        return cls(
            data.t,
            data.y,
            _frozen(np.where(m1, x1, data.x1), float),
            _frozen(np.where(m2, x2, data.x2), float),
            data.d1,
            data.d2,
            m1,
            m2,
        )

    @classmethod
    def from_complete(cls, data: Dataset) -> "CompletedDataset":
        if np.any(data.d1) or np.any(data.d2):
            raise ValidationError("dataset has missing covariates")
        return cls.fill(data, data.x1, data.x2)

    def subset(self, mask) -> "CompletedDataset":
        return CompletedDataset(
            *(getattr(self, k)[mask] for k in ("t", "y", "x1", "x2", "d1", "d2", "imputed1", "imputed2"))
        )

    @property
    def units(self) -> list[Unit]:
        return [
            Unit(int(self.t[i]), int(self.y[i]), float(self.x1[i]), float(self.x2[i]))
            for i in range(self.n)
        ]
