# %% [markdown]
# sdp1 - sdp2 over the two-qubit family theta in [pi/12, pi/6] at
# eps = 1 - sqrt(3)/2.  A positive gap means the optimal operator in the
# one-shot program is not positive there.

# %%
import math

import numpy as np

from entdistill import distill

eps = 1 - math.sqrt(3) / 2
thetas = np.linspace(math.pi / 12, math.pi / 6, 50)

# %%
gaps = []
for th in thetas:
    rho = distill.appendix_state(float(th))
    gaps.append(distill.sdp1(rho, eps) - distill.sdp2(rho, eps))
k = int(np.argmax(gaps))
print(f"max gap {gaps[k]:.4e} at theta = {thetas[k]:.4f}")
print(f"min gap {min(gaps):.2e}")

# %%
# same data through the command line
# entdistill appendix --out appendix.csv
