# %% [markdown]
# # Worst-case locality of a few classic curves
#
# A locality measure asks how spread out a piece of a curve can get compared
# with the area it covers. Here we bound the worst case for the Hilbert order
# and for two Peano variants, and then look at why Z-order has no finite bound.

# %%
from sfcq import builtin, compute_worst, supported_measures

hilbert = builtin("hilbert")
print(hilbert.description)
print([m.value for m in supported_measures(hilbert)])

# %% [markdown]
# `compute_worst` keeps refining probes until the certified interval is
# narrower than `gap`. The endpoints are exact numbers; `lower_f` and
# `upper_f` are their float views.

# %%
res = compute_worst(hilbert, "wl2", gap=1e-3)
print(f"Hilbert WL2 in [{res.lower_f:.5f}, {res.upper_f:.5f}] after {res.probes_explored} probes")

# %%
for name in ("gp", "balanced-gp", "meurthe"):
    order = builtin(name)
    row = []
    for m in ("wl-inf", "wl2", "wba"):
        r = compute_worst(order, m, gap=1e-2)
        row.append(f"{m}={0.5 * (r.lower_f + r.upper_f):.3f}")
    print(f"{name:12s}", *row)

# %% [markdown]
# Z-order jumps across the square at every level, so the lower bound keeps
# growing. The search stops once it passes a cap and reports the measure as
# suspected unbounded.

# %%
z = compute_worst(builtin("z-order"), "wba", gap=1e-2)
print(f"z-order WBA lower bound {z.lower_f:.1f}, unbounded suspected: {z.unbounded_suspected}")

# %% [markdown]
# On a finite grid the worst section can be found by brute force. Those values
# creep up towards the certified bound as the grid gets finer.

# %%
from sfcq import grid_oracle

for depth in range(1, 6):
    print(depth, float(grid_oracle(hilbert, "wl2", depth)))
