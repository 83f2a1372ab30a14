"""Polya-Gamma draws and the augmented logistic-regression Gibbs step.

Checks sampled PG(1, z) means against tanh(z/2)/(2z), then runs the
beta-update alone on a fully observed dataset and compares the posterior
draws with the maximum-likelihood fit.
"""

import numpy as np

from randimpute import Dataset, GibbsConfig, derive_stream, fit_logistic
from randimpute.impute import run_outcome_chain
from randimpute.rngkit import sample_polya_gamma_array

stream = derive_stream(7, 0)
print("z      sample mean   exact mean")
for z in (0.0, 0.5, 2.0, 5.0):
    draws = sample_polya_gamma_array(stream, np.full(50_000, z))
    exact = 0.25 if z == 0 else np.tanh(z / 2) / (2 * z)
    print(f"{z:<6} {draws.mean():.5f}       {exact:.5f}")

gen = np.random.default_rng(1)
n = 800
t, x1, x2 = (gen.integers(0, 2, n) for _ in range(3))
eta = -0.4 + 0.8 * x1 + 0.9 * x2 + 0.3 * t + 0.5 * t * x2
y = (gen.random(n) < 1 / (1 + np.exp(-eta))).astype(int)
data = Dataset.from_arrays(t, y, x1, x2)

mle = fit_logistic(data)
# with nothing missing the chain reduces to the beta update
_, draws = run_outcome_chain(data, "icin", GibbsConfig(burnin=300, thin=5, m=1000), derive_stream(7, 1))
print("\ncoef   MLE (SE)            posterior mean (SD)")
for j, name in enumerate(("b0", "b1", "b2", "bt", "btx2")):
    se = np.sqrt(mle.covariance[j, j])
    print(f"{name:<6} {mle.coef[j]:+.3f} ({se:.3f})    {draws[:, j].mean():+.3f} ({draws[:, j].std():.3f})")
