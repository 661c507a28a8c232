"""
An error law without a second moment
=====================================

For dX = X^2 dW the limit error equation has a noise term of size X^3, and
the limit U_T has infinite variance.  The Hill estimate of the tail index of
|U_T| lands below 2.  Bounded-coefficient models give a light tail instead.
"""

from sde_errlab.limitlaw import heavy_tail, limit_samples
from sde_errlab.model import get_model

for name, x0 in (("inverse_bessel", 1.0), ("bounded_sine", 0.0)):
    out = limit_samples(get_model(name), x0, T=1.0, n_fine=4096, paths=3000, seed=5)
    ht = heavy_tail(out["U_T"])
    print(f"{name:15s} Hill index {ht.hill:.2f}  95% CI ({ht.ci[0]:.2f}, {ht.ci[1]:.2f})  "
          f"infinite-variance flag {ht.flag}   E U^2 on the two halves {ht.m2_halves[0]:.3g} / {ht.m2_halves[1]:.3g}")
