"""
The law of the normalized Euler error
=====================================

sqrt(n) (X^n_T - X_T) converges in law to U_T, the solution of a linear SDE
driven by the same W and an independent Brownian motion B.  We sample both
sides independently and compare them with a two-sample KS test.
"""

from sde_errlab import statkit
from sde_errlab.limitlaw import moment_diagnostics, sample_error_law
from sde_errlab.model import get_model

model = get_model("bounded_sine")  # mu = 0, so U is a martingale
s = sample_error_law(model, 0.0, n=64, paths=1000, seed=3, refinement=32)

ks = statkit.ks_two_sample(s.scheme_side, s.limit_side)
print(f"KS distance {ks.d:.4f}  (5% critical value {ks.critical_05:.4f})")

times = [c / s.n_fine for c in s.checkpoints]
rep = moment_diagnostics(s.limit_at, s.limit_max_at, times, martingale=True)
for c in rep.checkpoints:
    print(f"t={c.t:.2f}  mean U {c.mean:+.4f} +- {c.se_mean:.4f}   E U^2 {c.m2:.4f}   E sup|U|^2 {c.m2_max:.4f}")
print("E sup|U|^2 nondecreasing:", rep.max_m2_nondecreasing)
