"""Weak error |E g(X^n_T) - E g(X_T)| for bounded Lipschitz g, and the CEV tail check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from . import engine, statkit
from .model import Model
from .path import STREAM_LIMIT_W
from .scheme import default_scheme


@dataclass(frozen=True)
class FunctionalSpec:
    name: str
    g: Callable[[np.ndarray], np.ndarray]
    sup_bound: float
    lipschitz: float


def clamp_functional(lo: float = -1.0, hi: float = 1.0) -> FunctionalSpec:
    return FunctionalSpec(f"clamp[{lo:g},{hi:g}]", lambda x: np.clip(x, lo, hi), max(abs(lo), abs(hi)), 1.0)


def min_functional(cap: float = 1.0) -> FunctionalSpec:
    """g(x) = min(x, cap); bounded on the positive states where it is used."""
    return FunctionalSpec(f"min[{cap:g}]", lambda x: np.minimum(x, cap), abs(cap), 1.0)


def constant_functional(c: float = 1.0) -> FunctionalSpec:
    return FunctionalSpec(f"const[{c:g}]", lambda x: np.full(np.shape(x), float(c)), abs(c), 0.0)


@dataclass(frozen=True)
class TailEstimate:
    nu: float
    kappa: float
    source: str  # "analytic" or "hill"


@dataclass(frozen=True)
class WeakErrorReport:
    ns: tuple[int, ...]
    estimates: tuple[float, ...]
    ses: tuple[float, ...]
    bound_curve: tuple[float, ...]
    bound_constant: float
    tail: TailEstimate
    growth_exponent: float
    scheme: str
    paths: int
    noise_floor: bool
    running_max: np.ndarray  # S*_T of the reference, per path
    pair_ses: tuple[float, ...] = ()

    @property
    def rate_exponent(self) -> float:
        return self.tail.nu / self.growth_exponent

    def nonincreasing(self, slack: float = 2.0) -> list[bool]:
        """est[i+1] <= est[i] + slack * SE of the paired difference (both use the same paths)."""
        e = self.estimates
        return [bool(e[i + 1] <= e[i] + slack * self.pair_ses[i]) for i in range(len(e) - 1)]

    def dominated(self, slack: float = 2.0) -> list[bool]:
        e, s, b = np.array(self.estimates), np.array(self.ses), np.array(self.bound_curve)
        return [bool(e[i] <= b[i] + slack * s[i]) for i in range(1, len(e))]


def tail_estimate(model: Model, running_max, x0: float, fraction: float = 0.05) -> TailEstimate:
    """nu, kappa in P(X*_T > x) <= kappa x^-nu.

    CEV: nu = 1, kappa = S_0 from the strict-local-martingale bound.  Otherwise a
    Hill fit on the simulated running maxima.
    """
    if model.name == "cev":
        return TailEstimate(1.0, float(x0), "analytic")
    x = np.asarray(running_max, dtype=float)
    x = x[np.isfinite(x) & (x > 0)]
    k = max(10, int(round(fraction * x.size)))
    est = statkit.hill_tail_index(x, k)
    threshold = np.sort(x)[::-1][k]
    kappa = k / x.size * threshold**est.alpha_hat
    return TailEstimate(est.alpha_hat, float(kappa), "hill")


def estimate_weak_error(model: Model, x0: float, spec: FunctionalSpec, ns, paths: int, seed: int, *,
                        refinement: int = 64, T: float = 1.0, scheme: str | None = None, workers=1,
                        chunk=None, nu: float | None = None) -> WeakErrorReport:
    """Common-random-number estimate: one Brownian path drives every X^n and the reference."""
    ns = tuple(int(n) for n in ns)
    if any(n & (n - 1) for n in ns) or list(ns) != sorted(set(ns)):
        raise ValueError("ns must be strictly increasing powers of two")
    if paths < 1000:
        raise ValueError("weak-error estimation needs at least 1000 paths")
    scheme = scheme or default_scheme(model).value
    n_fine = refinement * max(ns)
    plan = engine.SimulationPlan(model, x0, T, n_fine, seed, ns=ns, schemes=(scheme,))
    out = engine.run(plan, paths, workers=workers, chunk=chunk or engine.DEFAULT_CHUNK)
    g_ref = spec.g(out["ref_T"])
    diffs = [spec.g(out[f"{scheme}:{n}:terminal"]) - g_ref for n in ns]
    root_m = np.sqrt(paths)
    est = [float(abs(d.mean())) for d in diffs]
    ses = [float(d.std(ddof=1) / root_m) for d in diffs]
    pair_ses = tuple(float((b - a).std(ddof=1) / root_m) for a, b in zip(diffs, diffs[1:]))
    tail = tail_estimate(model, out["ref_max"], x0)
    if nu is not None:
        tail = TailEstimate(float(nu), tail.kappa, "given")
    a = model.growth_exponent
    p = tail.nu / a
    const = est[0] * np.log(ns[0]) ** p
    curve = tuple(float(const * np.log(n) ** -p) for n in ns)
    noise = all(e < 3 * s for e, s in zip(est, ses))
    return WeakErrorReport(ns, tuple(est), tuple(ses), curve, float(const), tail, a, scheme, paths,
                           bool(noise), out["ref_max"], pair_ses)


def crn_variance_comparison(model: Model, x0: float, spec: FunctionalSpec, n: int, paths: int, seed: int, *,
                            refinement: int = 64, T: float = 1.0, workers=1) -> tuple[float, float]:
    """Per-path variance of g(X^n_T) - g(X_T) with shared noise vs. with independent noise."""
    scheme = default_scheme(model).value
    n_fine = refinement * n
    shared = engine.run(engine.SimulationPlan(model, x0, T, n_fine, seed, ns=(n,), schemes=(scheme,)),
                        paths, workers=workers)
    other = engine.run(engine.SimulationPlan(model, x0, T, n_fine, seed, w_stream=STREAM_LIMIT_W), paths,
                       workers=workers)
    gn = spec.g(shared[f"{scheme}:{n}:terminal"])
    crn = np.var(gn - spec.g(shared["ref_T"]), ddof=1)
    indep = np.var(gn - spec.g(other["ref_T"]), ddof=1)
    return float(crn), float(indep)


@dataclass(frozen=True)
class TailCheck:
    x: float
    fraction: float
    ci: tuple[float, float]
    bound: float
    passed: bool


def tail_probability_check(running_max, s0: float, xs) -> list[TailCheck]:
    """Empirical P(S*_T > x) against S_0 / x with a Clopper-Pearson 95% interval.

    A threshold passes when the interval's lower end lies below S_0 / x.
    """
    samples = np.asarray(running_max, dtype=float).ravel()
    m = samples.size
    checks = []
    for x in xs:
        if not x > s0:
            raise ValueError(f"thresholds must exceed S0={s0}, got {x}")
        k = int(np.count_nonzero(samples > x))
        ci = stats.binomtest(k, m).proportion_ci(confidence_level=0.95, method="exact")
        bound = s0 / x
        checks.append(TailCheck(float(x), k / m, (float(ci.low), float(ci.high)), bound, bool(ci.low < bound)))
    return checks
