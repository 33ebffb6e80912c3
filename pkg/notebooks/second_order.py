# %% [markdown]
# Second-order expansions of the n-copy rate for the isotropic state, and the
# pure-state case where upper and lower expansions coincide.  The O(log n)
# term is left out of both.

# %%
import numpy as np

from entdistill import secord
from entdistill.iso import iso_state
from entdistill.qmat import random_pure_state
from entdistill.rains import rains_bound

rho = iso_state(3, 0.9)
res = rains_bound(rho)

# %%
up = secord.upper_bound(rho, 1, 0.001, res)
lo = secord.lower_bound(rho, 1, 0.001)
print(f"upper  {up.first_order_bits:.4f} n + {up.second_order_bits:.4f} sqrt(n)")
print(f"lower  {lo.first_order_bits:.4f} n + {lo.second_order_bits:.4f} sqrt(n)")

# %%
rows = secord.sweep(rho, 0.001, [1, 2, 5, 10, 20, 50, 100, 200, 500, 1000], res)
for r in rows:
    print(f"{r['n']:5d}  {r['upper_pc']:.4f}  {r['lower_pc']:.4f}")

# %%
psi = random_pure_state((3, 3), rng=np.random.default_rng(5))
tight, rep = secord.tightness_check(psi, 0.001)
print("pure state tight:", tight, f"gaps {rep['first_gap']:.1e} {rep['second_gap']:.1e}")
