# %% [markdown]
# The cutting-plane bracket on the Rains bound: how the lower and upper ends
# close in, for the isotropic state and for a random two-qubit state.

# %%
import math

import numpy as np

from entdistill.iso import iso_rains_closed, iso_state
from entdistill.qmat import random_state
from entdistill.rains import rains_bound

# %%
res = rains_bound(iso_state(3, 0.9))
print("iter  lower(nats)   upper(nats)   cuts")
for it, lo, up, k in res.trace:
    print(f"{it:4d}  {lo:.9f}  {up:.9f}  {k}")
print("closed form", iso_rains_closed(3, 0.9) * math.log(2))

# %%
rho = random_state((2, 2), rng=np.random.default_rng(1))
res = rains_bound(rho, tol=1e-7)
widths = [up - lo for _, lo, up, _ in res.trace]
print("bracket widths", ", ".join(f"{w:.1e}" for w in widths))
print("converged" if res.converged else "not converged", "in", res.iterations, "iterations")
