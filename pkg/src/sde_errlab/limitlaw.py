"""The asymptotic normalized-error SDE and its moment diagnostics.

The limit error solves

    dU = mu'(X) U dt + sigma'(X) U dW + (sqrt(2)/2) sqrt(T) sigma(X) sigma'(X) dB,   U_0 = 0,

with B independent of W and X the reference solution driven by W.  The
sqrt(T) factor comes from the step T/n: the martingale sqrt(n) sum ((dW_k)^2 - h)/2
has variance tT/2, so it reduces to the familiar coefficient at T = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import statkit
from .model import Model
from .path import STREAM_LIMIT_W, BrownianGrid
from .reference import ReferenceTrajectory, reference


def limit_noise_scale(T: float) -> float:
    return np.sqrt(2.0) / 2.0 * np.sqrt(T)


def limit_step(model: Model, U, X, h, dw, db, c):
    """One Euler step of the limit SDE with X frozen at the left point."""
    sp = model.diffusion_deriv(X)
    return U + model.drift_deriv(X) * U * h + sp * U * dw + c * (model.diffusion(X) * sp) * db


@dataclass(frozen=True)
class LimitTrajectory:
    U: np.ndarray  # (..., n_fine + 1)
    X: ReferenceTrajectory
    B: BrownianGrid


def simulate_limit(model: Model, x0: float, brownian_W: BrownianGrid, brownian_B: BrownianGrid,
                   ref: ReferenceTrajectory | None = None) -> LimitTrajectory:
    if (brownian_W.horizon, brownian_W.fine_steps) != (brownian_B.horizon, brownian_B.fine_steps):
        raise ValueError("W and B must live on the same fine grid")
    if brownian_B.increments.shape != brownian_W.increments.shape:
        raise ValueError("W and B batches differ in shape")
    if ref is None:
        ref = reference(model, x0, brownian_W)
    h = brownian_W.h
    c = limit_noise_scale(brownian_W.horizon)
    dw = brownian_W.increments
    db = brownian_B.increments
    U = np.zeros(dw.shape[:-1] + (brownian_W.fine_steps + 1,))
    u = np.zeros(dw.shape[:-1])
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(brownian_W.fine_steps):
            u = limit_step(model, u, ref.values[..., k], h, dw[..., k], db[..., k], c)
            U[..., k + 1] = u
    return LimitTrajectory(U, ref, brownian_B)


def default_checkpoints(n_fine: int, parts: int = 4) -> tuple[int, ...]:
    if n_fine % parts:
        raise ValueError(f"{parts} checkpoints do not fall on the fine grid of {n_fine} steps")
    return tuple(n_fine * j // parts for j in range(1, parts + 1))


def limit_samples(model: Model, x0: float, T: float, n_fine: int, paths: int, seed: int,
                  checkpoints=None, workers=1, chunk=None) -> dict[str, np.ndarray]:
    """Terminal and checkpoint values of U on fresh (W, B) per path."""
    from . import engine

    plan = engine.SimulationPlan(model, x0, T, n_fine, seed, limit=True,
                                 checkpoints=tuple(checkpoints or default_checkpoints(n_fine)),
                                 w_stream=STREAM_LIMIT_W)
    return engine.run(plan, paths, workers=workers, chunk=chunk or engine.DEFAULT_CHUNK)


@dataclass(frozen=True)
class ErrorLawSamples:
    n: int
    scheme: str
    scheme_side: np.ndarray  # sqrt(n) (X^n_T - X_T)
    limit_side: np.ndarray  # U_T from the limit SDE
    seed: int
    n_fine: int
    reference_method: str
    checkpoints: tuple[int, ...] = ()
    limit_at: np.ndarray | None = None  # U at the checkpoints, (paths, checkpoints)
    limit_max_at: np.ndarray | None = None


def sample_error_law(model: Model, x0: float, n: int, paths: int, seed: int, *, refinement: int = 64,
                     T: float = 1.0, scheme: str | None = None, workers=1, chunk=None) -> ErrorLawSamples:
    """Paired samples of the normalized terminal error and of the limit law.

    The two sides use disjoint Brownian key ranges, so they are independent.
    """
    from . import engine
    from .reference import reference_method
    from .scheme import default_scheme

    if paths < 100:
        raise ValueError("sample_error_law needs at least 100 paths")
    scheme = scheme or default_scheme(model).value
    n_fine = refinement * n
    chunk = chunk or engine.DEFAULT_CHUNK
    plan = engine.SimulationPlan(model, x0, T, n_fine, seed, ns=(n,), schemes=(scheme,))
    left = engine.run(plan, paths, workers=workers, chunk=chunk)
    un = np.sqrt(n) * (left[f"{scheme}:{n}:terminal"] - left["ref_T"])
    ckpts = default_checkpoints(n_fine)
    right = limit_samples(model, x0, T, n_fine, paths, seed, checkpoints=ckpts, workers=workers, chunk=chunk)
    return ErrorLawSamples(n, scheme, un, right["U_T"], seed, n_fine, reference_method(model).value,
                           ckpts, right["U_ckpt"], right["Umax_ckpt"])


@dataclass(frozen=True)
class CheckpointMoments:
    t: float
    mean: float
    se_mean: float
    m2: float
    se_m2: float
    m2_max: float
    se_m2_max: float


@dataclass(frozen=True)
class MomentReport:
    checkpoints: tuple[CheckpointMoments, ...]
    martingale: bool  # model has mu' == 0
    max_m2_nondecreasing: bool
    m2_below_max_m2: bool
    dropped: int = 0  # paths with a non-finite value at some checkpoint


def moment_diagnostics(values, running_max, times, martingale: bool = False) -> MomentReport:
    """Means and second moments of U_t and of U*_t = sup_{s<=t} |U_s| at each checkpoint.

    ``values`` and ``running_max`` have shape (paths, checkpoints).  Paths that
    blew up (non-finite anywhere) are dropped and counted.
    """
    values = np.asarray(values, dtype=float)
    running_max = np.asarray(running_max, dtype=float)
    if values.ndim != 2 or values.shape[1] < 2 or values.shape != running_max.shape:
        raise ValueError("need (paths, checkpoints) arrays with at least 2 checkpoints")
    keep = np.isfinite(values).all(axis=1) & np.isfinite(running_max).all(axis=1)
    dropped = int((~keep).sum())
    values, running_max = values[keep], running_max[keep]
    if values.shape[0] < 2:
        raise ValueError("fewer than 2 finite paths")
    rows = []
    for c, t in enumerate(times):
        u = values[:, c]
        s = statkit.summarize(u)
        m2, se_m2 = _m2_jackknife(u)
        mm2, se_mm2 = _m2_jackknife(running_max[:, c])
        rows.append(CheckpointMoments(float(t), s.mean, s.se_mean, m2, se_m2, mm2, se_mm2))
    mm = [r.m2_max for r in rows]
    return MomentReport(
        checkpoints=tuple(rows),
        martingale=bool(martingale),
        max_m2_nondecreasing=bool(all(b >= a for a, b in zip(mm, mm[1:]))),
        m2_below_max_m2=bool(all(r.m2 <= r.m2_max for r in rows)),
        dropped=dropped,
    )


def _m2_jackknife(x):
    x2 = np.asarray(x, dtype=float) ** 2
    m = x2.size
    loo = (x2.sum() - x2) / (m - 1)
    return float(x2.mean()), statkit.jackknife_se(loo)


@dataclass(frozen=True)
class HeavyTail:
    hill: float
    ci: tuple[float, float]
    k: int
    flag: bool
    sensitivity: dict  # Hill estimates at k/2 and 2k
    nonfinite: int
    m2_halves: tuple[float, float]


def heavy_tail(samples, fraction: float = 0.05) -> HeavyTail:
    """Infinite-variance flag: Hill index on the top ``fraction`` of |samples| below 2, CI upper < 2.5.

    Non-finite samples (numerical blow-ups) are dropped and counted.
    """
    x = np.abs(np.asarray(samples, dtype=float).ravel())
    finite = np.isfinite(x)
    nonfinite = int((~finite).sum())
    x = x[finite & (x > 0)]
    k = max(10, int(round(fraction * x.size)))
    est = statkit.hill_tail_index(x, k)
    sens = {}
    for kk in (k // 2, 2 * k):
        if kk >= 10 and kk < x.size:
            sens[str(kk)] = statkit.hill_tail_index(x, kk).alpha_hat
    half = x.size // 2
    halves = (float(np.mean(x[:half] ** 2)), float(np.mean(x[half:] ** 2)))
    flag = est.alpha_hat < 2.0 and est.ci95[1] < 2.5
    return HeavyTail(est.alpha_hat, est.ci95, est.k, bool(flag), sens, nonfinite, halves)
