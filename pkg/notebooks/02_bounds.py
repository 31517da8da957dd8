# %% [markdown]
# # Lower bounds at the demo schedule
#
# The unbiased bound is `trace(Pi R^-1) / I^w`.  With Gaussian noise of
# standard deviation 0.1 the Fisher information `I^w` is 100.

# %%
import numpy as np

from nilmbound import (
    AffineBias,
    SamplingGrid,
    bound_asymptotic,
    bound_biased,
    bound_biased_simplified,
    bound_unbiased,
    data,
    r_continuous,
    r_discrete,
)

s = data.demo_scenario()
iw = s.noise.fisher_information()
rd = r_discrete(s.catalog, s.tau, s.grid)
print("R_d =\n", np.round(rd.matrix, 4))
print("condition number:", f"{rd.condition_estimate:.3g}")
print("unbiased bound:", bound_unbiased(rd, s.weights, iw).value)

# %% [markdown]
# A biased attacker with an affine mean `mu(tau) = A tau + b` trades the
# variance term for a squared-bias term.  As written, that term is the
# squared mean itself, so it dominates here; the centered variant uses
# `mu(tau) - tau` instead.

# %%
bias = AffineBias(0.9 * np.eye(3), np.zeros(3))
print("biased bound:", bound_biased(rd, s.weights, iw, bias, s.tau).value)
simplified, c1, c2 = bound_biased_simplified(rd, s.weights, iw, bias, s.tau)
print("centered:", bound_biased(rd, s.weights, iw, bias, s.tau, "centered").value)
print(f"simplified bound: {simplified.value:.6g}  (c1={c1:.3g}, c2={c2:.3g})")

# %% [markdown]
# The continuous-time bound is the limit of dense sampling.  Scaled by the
# grid step it approaches the discrete bound as the grid is refined.

# %%
rc = r_continuous(s.catalog, s.tau, s.quadrature)
for k in (21, 42, 84, 168, 336):
    g = SamplingGrid.linspace(0.0, 10.0, k)
    d = bound_unbiased(r_discrete(s.catalog, s.tau, g), s.weights, iw).value
    c = bound_asymptotic(rc, s.weights, iw, g.spacing).value
    print(f"k={k:4d}  discrete {d:.6g}  continuous {c:.6g}  rel diff {abs(d / c - 1):.2e}")

# %% [markdown]
# Two identical appliances starting together cannot be told apart.  The
# correlation matrix is singular and the bound is infinite.

# %%
twins = data.interchangeable_scenario()
r = r_discrete(twins.catalog, twins.tau, twins.grid)
print(twins.catalog.labels, twins.tau, "->", bound_unbiased(r).value)
