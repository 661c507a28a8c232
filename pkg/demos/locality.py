"""
Locality: a scheme cannot tell a model from its truncation before leaving [-m, m]
================================================================================

Truncating the coefficients outside [-m, m] gives a globally Lipschitz model.
Run on the same Brownian path and stopped at the first exit from [-m, m],
both versions produce the same numbers, bit for bit.
"""

import numpy as np

from sde_errlab import path, scheme
from sde_errlab.model import get_model, truncate

x0, m = 1.0, 3.0
grid = path.generate(seed=1, path_index=np.arange(200), T=1.0, n_fine=64)

for name in ("gbm", "abs_drift"):
    base = get_model(name)
    local = truncate(base, m)
    a = scheme.stop_at(scheme.milstein(base, x0, 64, grid), m)
    b = scheme.stop_at(scheme.milstein(local, x0, 64, grid), m)
    hit = np.asarray(a.stop_index) != scheme.NEVER
    print(f"{name}: {hit.sum()} of 200 paths leave [-{m:g}, {m:g}]; stopped trajectories identical:",
          np.array_equal(a.values, b.values))

# beyond m + 1 the truncated coefficients are constant
sq = truncate(get_model("inverse_bessel"), 2.0)
print("truncated x^2 diffusion at 1.5, 2.5, 3.5:", sq.diffusion(np.array([1.5, 2.5, 3.5])))
