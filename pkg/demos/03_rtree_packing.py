# %% [markdown]
# # Packing points into R-tree leaves along a curve
#
# Sort the points along a scanning order, cut the sorted list into blocks of
# `B` points and keep each block's bounding box. A random point query touches
# as many blocks as there are boxes containing it, so its expected cost equals
# the total box area. For random lines the cost follows the total perimeter.

# %%
import numpy as np
from gmpy2 import mpq

from sfcq import builtin, pack_blocks, simulate_queries

rng = np.random.default_rng(0)
points = [(mpq(int(x), 10 ** 6), mpq(int(y), 10 ** 6)) for x, y in rng.integers(0, 10 ** 6, (20000, 2))]

# %%
layouts = {name: pack_blocks(builtin(name), points, 100) for name in ("hilbert", "gp", "z-order")}
for name, layout in layouts.items():
    print(f"{name:8s} blocks={len(layout.blocks)} area={float(layout.total_area):.3f} "
          f"perimeter={float(layout.total_perimeter):.2f}")

# %% [markdown]
# The simulated query costs line up with the totals above.

# %%
for name, layout in layouts.items():
    pq = simulate_queries(layout, "point", 20000, seed=1)
    lq = simulate_queries(layout, "line", 20000, seed=1)
    print(f"{name:8s} point={pq.mean:.3f}±{pq.stderr:.3f} line={lq.mean:.2f}±{lq.stderr:.2f}")

# %% [markdown]
# ABA is the continuous counterpart. Leaf boxes of finitely many points are
# smaller than the boxes of the curve sections they come from, so the packed
# total sits below the ABA estimate.

# %%
from sfcq import estimate_average

print(estimate_average(builtin("hilbert"), "aba", samples=20, m_min=200, m_max=200).mean,
      float(layouts["hilbert"].total_area))
