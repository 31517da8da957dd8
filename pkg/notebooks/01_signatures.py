# %% [markdown]
# # Load signatures and the demo catalog
#
# A signature is a smooth, compactly supported power profile `f(t)` on
# `[0, T]`.  The Fisher information about a start time comes from `f'`, so
# every signature type also provides its first and second derivatives.

# %%
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nilmbound import data
from nilmbound.simulate import aggregate

FIG = Path(__file__).resolve().parent / "figures"
FIG.mkdir(exist_ok=True)

scenario = data.demo_scenario()
catalog = scenario.catalog
for label, sig in zip(catalog.labels, catalog.signatures):
    print(f"{label:12s} {sig.kind:18s} duration {sig.duration:g}")

# %% [markdown]
# Profiles and their derivatives.  Both vanish at the support ends.

# %%
fig, axes = plt.subplots(3, 1, figsize=(7, 7), sharex=True)
for label, sig in zip(catalog.labels, catalog.signatures):
    t = np.linspace(-0.2, sig.duration + 0.2, 400)
    for order, ax in enumerate(axes):
        ax.plot(t, sig.eval(t, order), label=label)
for order, ax in enumerate(axes):
    ax.set_ylabel(["f", "f'", "f''"][order])
axes[0].legend()
axes[-1].set_xlabel("t")
fig.savefig(FIG / "signatures.png", dpi=120)

# %% [markdown]
# The aggregate seen by the meter at the demo schedule, noiseless and noisy.

# %%
from nilmbound import generate

m = generate(catalog, scenario.tau, scenario.grid, scenario.noise, seed=0)
fine = np.linspace(scenario.grid.times[0], scenario.grid.times[-1], 800)
fig, ax = plt.subplots(figsize=(7, 3))
ax.plot(fine, aggregate(catalog, scenario.tau, fine), label="noiseless")
ax.plot(scenario.grid.times, m.y, "o", ms=4, label="metered")
ax.legend()
fig.savefig(FIG / "aggregate.png", dpi=120)
print("samples:", scenario.grid.times.size, "spacing:", scenario.grid.spacing)
