"""
Gaussian-process regression on one dimension
============================================

Fit an exact GP to a handful of noisy points, pick kernel hyperparameters
by marginal likelihood, and look at how the predictive variance grows away
from the data.
"""

import numpy as np

from rfan import gp

rng = np.random.default_rng(0)
x = np.sort(rng.uniform(-2, 2, 12))
y = np.sin(2 * x) + 0.1 * rng.standard_normal(x.size)

# grid search over kernel family, lengthscale, signal and noise variance
fit = gp.fit_gp(x[:, None], y)
print("chosen kernel:", fit.kernel.label(), " noise variance:", round(fit.noise_variance_original, 4))
print("log marginal likelihood:", round(fit.log_marginal_likelihood, 3))

grid = np.linspace(-4, 4, 9)
mean, var = gp.predict(fit, grid[:, None])
for g, m, v in zip(grid, mean, var):
    print(f"x={g:+.1f}  mean={m:+.3f}  sd={np.sqrt(v):.3f}  truth={np.sin(2 * g):+.3f}")

# a few posterior function draws on a coarse grid
draws = gp.sample_posterior(fit, grid[:, None], 3, rng)
print("three posterior draws at x=0:", np.round(draws[:, 4], 3))
