"""Seeded random streams and the sampling primitives built on them.

Every stream is derived from ``(master_seed, index, *keys)`` through
:class:`numpy.random.SeedSequence`, so a replication's draws do not depend
on the order in which replications are scheduled.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

__all__ = [
    "RngStream",
    "derive_stream",
    "sample_dirichlet",
    "sample_categorical",
    "sample_categorical_rows",
    "sample_polya_gamma",
    "sample_polya_gamma_array",
    "sample_mvnormal",
]

# truncation point of the alternating-series sampler for J*(1, z)
_TRUNC = 0.64
_PI2 = np.pi * np.pi


@dataclass(eq=False)
class RngStream:
    """A single-owner generator tagged with the key it was derived from."""

    gen: np.random.Generator
    label: tuple

    def child(self, name: str | int) -> "RngStream":
        """Derive an independent sub-stream, e.g. one per imputation method."""
        key = name if isinstance(name, int) else zlib.crc32(str(name).encode())
        return _make(self.label + (key,))

    def uniform(self, size=None):
        return self.gen.random(size)


def _make(label: tuple) -> RngStream:
    seed, *keys = label
    ss = np.random.SeedSequence(entropy=int(seed) % 2**64, spawn_key=tuple(int(k) for k in keys))
    return RngStream(np.random.Generator(np.random.PCG64(ss)), label)


def derive_stream(master_seed: int, index: int) -> RngStream:
    if index < 0:
        raise ValueError("stream index must be nonnegative")
    return _make((int(master_seed), int(index)))


def sample_dirichlet(stream: RngStream, alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size < 2:
        raise ValueError("alpha must be a vector of length >= 2")
    if not np.all(alpha > 0) or not np.all(np.isfinite(alpha)):
        raise ValueError("Dirichlet concentration parameters must be positive")
    p = stream.gen.dirichlet(alpha)
    return p / p.sum()


def _check_probs(probs: np.ndarray, tol: float = 1e-9) -> None:
    if np.any(probs < 0):
        raise ValueError("negative probability")
    if abs(probs.sum() - 1.0) > tol:
        raise ValueError(f"probabilities not normalized (sum={probs.sum():.12g})")


def sample_categorical(stream: RngStream, probs) -> int:
    probs = np.asarray(probs, dtype=float)
    _check_probs(probs)
    c = np.cumsum(probs)
    u = stream.gen.random() * c[-1]
    return int(min(np.searchsorted(c, u, side="right"), probs.size - 1))


def sample_categorical_rows(stream: RngStream, weights: np.ndarray) -> np.ndarray:
    """One categorical draw per row of an (n, k) array of unnormalized weights."""
    weights = np.asarray(weights, dtype=float)
    c = np.cumsum(weights, axis=1)
    u = stream.gen.random(weights.shape[0]) * c[:, -1]
    idx = (c <= u[:, None]).sum(axis=1)
    return np.minimum(idx, weights.shape[1] - 1)


def sample_mvnormal(stream: RngStream, mean, covariance) -> np.ndarray:
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    if cov.shape != (mean.size, mean.size):
        raise ValueError("covariance shape does not match mean")
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-14):
        raise ValueError("covariance not symmetric")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance not positive definite") from exc
    return mean + chol @ stream.gen.standard_normal(mean.size)


# ---------------------------------------------------------------------------
# Polya-Gamma PG(1, z)


def _series_coef(n: int, x: np.ndarray) -> np.ndarray:
    """n-th coefficient of the alternating series for the J*(1) density."""
    k = (n + 0.5) * np.pi
    out = np.empty_like(x)
    hi = x > _TRUNC
    out[hi] = k * np.exp(-0.5 * k * k * x[hi])
    xl = x[~hi]
    out[~hi] = np.exp(-1.5 * (np.log(0.5 * np.pi) + np.log(xl)) + np.log(k) - 2.0 * (n + 0.5) ** 2 / xl)
    return out


def _exp_branch_prob(z: np.ndarray) -> np.ndarray:
    """Mixture weight of the truncated-exponential proposal piece."""
    t = _TRUNC
    fz = _PI2 / 8 + 0.5 * z * z
    b = np.sqrt(1.0 / t) * (t * z - 1.0)
    a = -np.sqrt(1.0 / t) * (t * z + 1.0)
    x0 = np.log(fz) + fz * t
    q_over_p = 4.0 / np.pi * (np.exp(x0 - z + log_ndtr(b)) + np.exp(x0 + z + log_ndtr(a)))
    return 1.0 / (1.0 + q_over_p)


def _truncated_invgauss(gen: np.random.Generator, z: np.ndarray) -> np.ndarray:
    """Inverse-Gaussian(1/z, 1) draws truncated to (0, TRUNC)."""
    t = _TRUNC
    out = np.empty_like(z)
    small = z < 1.0 / t

    # mean above the truncation point: proposals from 1/chi^2_1 restricted to (0, t)
    idx = np.flatnonzero(small)
    while idx.size:
        e1 = gen.standard_exponential(idx.size)
        e2 = gen.standard_exponential(idx.size)
        ok = e1 * e1 <= 2.0 * e2 / t
        cand = idx[ok]
        x = t / (1.0 + t * e1[ok]) ** 2
        accept = gen.random(cand.size) <= np.exp(-0.5 * z[cand] ** 2 * x)
        out[cand[accept]] = x[accept]
        done = np.zeros(idx.size, dtype=bool)
        done[np.flatnonzero(ok)[accept]] = True
        idx = idx[~done]

    idx = np.flatnonzero(~small)
    while idx.size:
        mu = 1.0 / z[idx]
        yy = gen.standard_normal(idx.size) ** 2
        mu_y = mu * yy
        x = mu + 0.5 * mu * mu_y - 0.5 * mu * np.sqrt(4.0 * mu_y + mu_y * mu_y)
        flip = gen.random(idx.size) > mu / (mu + x)
        x = np.where(flip, mu * mu / x, x)
        keep = x < t
        out[idx[keep]] = x[keep]
        idx = idx[~keep]
    return out


def sample_polya_gamma_array(stream: RngStream, z) -> np.ndarray:
    """Exact PG(1, z_i) draws for every entry of ``z``.

    Alternating-series rejection sampler for J*(1, |z|/2) with a mixed
    truncated-exponential / truncated-inverse-Gaussian proposal; the PG
    draw is J*/4.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("Polya-Gamma tilt must be finite")
    shape = z.shape
    h = 0.5 * np.abs(z.ravel())
    gen = stream.gen
    out = np.empty_like(h)
    fz = _PI2 / 8 + 0.5 * h * h
    p_exp = _exp_branch_prob(h)

    pending = np.arange(h.size)
    while pending.size:
        hz = h[pending]
        use_exp = gen.random(pending.size) < p_exp[pending]
        x = np.empty(pending.size)
        n_exp = int(use_exp.sum())
        x[use_exp] = _TRUNC + gen.standard_exponential(n_exp) / fz[pending[use_exp]]
        if n_exp < pending.size:
            x[~use_exp] = _truncated_invgauss(gen, hz[~use_exp])

        s = _series_coef(0, x)
        u = gen.random(pending.size) * s
        accepted = np.zeros(pending.size, dtype=bool)
        live = np.arange(pending.size)
        n = 0
        while live.size:
            n += 1
            a_n = _series_coef(n, x[live])
            if n % 2:
                s[live] -= a_n
                hit = u[live] <= s[live]
                accepted[live[hit]] = True
                live = live[~hit]
            else:
                s[live] += a_n
                live = live[u[live] <= s[live]]
        out[pending[accepted]] = 0.25 * x[accepted]
        pending = pending[~accepted]
    return out.reshape(shape)


def sample_polya_gamma(stream: RngStream, z: float) -> float:
    if not np.isfinite(z):
        raise ValueError("Polya-Gamma tilt must be finite")
    return float(sample_polya_gamma_array(stream, np.array([z]))[0])
