# %% [markdown]
# # Bound surface over two start times
#
# Fix the third appliance and sweep the first two start times.  Cells where
# the schedule is unidentifiable are capped.

# %%
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from nilmbound import data, sweep_2d

FIG = Path(__file__).resolve().parent / "figures"
FIG.mkdir(exist_ok=True)

s = data.demo_scenario()
axis = np.linspace(0.0, 8.0, 60)
surfaces = {f: sweep_2d(s.problem(f), 0, 1, [0.0, 0.0, 0.0], axis, axis) for f in ("discrete", "continuous")}
for flavor, res in surfaces.items():
    meta = res.metadata()
    print(f"{flavor:10s} capped {meta['capped_count']:4d}  max finite {np.max(res.values[~res.capped]):.4g}")

# %%
fig, axes = plt.subplots(1, 2, figsize=(10, 4), sharey=True)
for ax, (flavor, res) in zip(axes, surfaces.items()):
    im = ax.pcolormesh(res.grid_j, res.grid_i, np.log10(res.display_values), shading="auto")
    ax.set_title(flavor)
    ax.set_xlabel(s.catalog.labels[1])
    fig.colorbar(im, ax=ax, label="log10 bound")
axes[0].set_ylabel(s.catalog.labels[0])
fig.savefig(FIG / "sweep.png", dpi=120)

# %% [markdown]
# The twin scenario has a ridge of capped cells along the diagonal.

# %%
twins = data.interchangeable_scenario()
axis = np.linspace(0.0, 8.0, 9)
res = sweep_2d(twins.problem(), 0, 1, twins.tau, axis, axis)
print("capped cells:", np.argwhere(res.capped).tolist())
