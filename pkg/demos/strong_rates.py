"""
Strong convergence of Euler and Milstein on geometric Brownian motion
=====================================================================

GBM has a closed-form solution, so the pathwise error of each scheme can be
measured exactly on the same Brownian path.  We fit log RMS(sup error)
against log n: Euler should decay like n^-1/2, Milstein like n^-1.
"""

import numpy as np

from sde_errlab import engine
from sde_errlab.erroranalysis import error_row, fit_rate
from sde_errlab.model import get_model

gbm = get_model("gbm", mu=0.5, sigma=0.4)
ns = (16, 32, 64, 128, 256)

# one Brownian path per Monte Carlo sample drives every n and the exact solution
plan = engine.SimulationPlan(gbm, 1.0, 1.0, 64 * max(ns), seed=7, ns=ns, schemes=("euler", "milstein"),
                             track_sup=True)
out = engine.run(plan, 400)

for scheme in ("euler", "milstein"):
    rows = [error_row(n, out[f"{scheme}:{n}:sup"], out[f"{scheme}:{n}:terminal"] - out["ref_T"]) for n in ns]
    for r in rows:
        print(f"{scheme:9s} n={r['n']:4d}  rms sup error {r['rms_sup']:.5f} +- {r['rms_sup_se']:.5f}")
    fit = fit_rate([(r["n"], r["rms_sup"]) for r in rows])
    print(f"{scheme:9s} fitted rate alpha = {fit.alpha:.3f} (r2 = {fit.r2:.4f})\n")

# the normalized Euler error sqrt(n) * sup stays of order one
print("sqrt(n) * rms sup (euler):", np.round([np.sqrt(n) * np.sqrt(np.mean(out[f"euler:{n}:sup"] ** 2)) for n in ns], 3))
