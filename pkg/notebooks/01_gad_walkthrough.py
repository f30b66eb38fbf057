# %% [markdown]
# # Diversity as an ellipse area
#
# Each predicted mode's endpoint becomes a small Gaussian. The mixture is
# collapsed to a single covariance, and the area of its uncertainty
# ellipse (sqrt of the determinant) measures how spread out the modes are.
# This script walks through that for a handful of toy predictions.

# %%
from __future__ import annotations

import numpy as np

from predeval import PredictionSet, collapse, diversity_area, eigen2, gad, modes_as_gmm

rng = np.random.default_rng(0)
t = np.arange(1, 16) * 0.1


def straight(vx, vy=0.0):
    return np.stack([vx * t, vy * t], axis=1)


# %% [markdown]
# Six identical modes: the only spread left is the per-mode sigma0 = 0.5 m,
# so the collapsed covariance is 0.25 I and the area is 0.25.

# %%
same = PredictionSet("a1", np.repeat(straight(10.0)[None], 6, axis=0))
g = modes_as_gmm(same, t=14)
print("collapsed:\n", collapse(g).matrix)
print("area:", diversity_area(collapse(g)))

# %% [markdown]
# Fan the modes out laterally. The between-mode scatter now dominates
# the y-variance, and the area grows with it.

# %%
for spread in (0.0, 0.5, 1.0, 2.0):
    modes = np.stack([straight(10.0, vy) for vy in np.linspace(-spread, spread, 6)])
    area = diversity_area(collapse(modes_as_gmm(PredictionSet("a1", modes), t=14)))
    print(f"lateral speed spread {spread:3.1f} m/s -> endpoint area {area:.3f} m^2")

# %% [markdown]
# The area comes from the closed-form 2x2 eigensystem. Product and sum of
# the eigenvalues reproduce det and trace.

# %%
b = rng.standard_normal((2, 2))
cov = b @ b.T
l1, l2, _ = eigen2(cov)
print(l1 * l2, np.linalg.det(cov))
print(l1 + l2, np.trace(cov))

# %% [markdown]
# GAD averages the per-step area over the horizon and over all agents.

# %%
fan = PredictionSet("a1", np.stack([straight(10.0, vy) for vy in np.linspace(-1, 1, 6)]))
print("GAD, one tight agent:", gad([same]))
print("GAD, tight + fanned:", gad([same, fan]))
