"""Euler, Milstein and symmetrized Euler schemes in continuous (interpolated) form.

One formula serves both the grid recursion and the in-between evaluation: the
coefficients are frozen at the left coarse grid point (the *anchor*) and the
update is applied to the fine-resolved increments dt = t - n(t) and
dW = W_t - W_n(t).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Model
from .path import BrownianGrid, coarsen

NEVER = -1


class DomainError(ArithmeticError):
    """A scheme step left the region where the model's coefficients are defined."""

    def __init__(self, scheme: str, step: int, state: float):
        super().__init__(f"{scheme} step {step} produced state {state!r} outside the model domain")
        self.scheme = scheme
        self.step = step
        self.state = state


class Scheme(str, enum.Enum):
    EULER = "euler"
    MILSTEIN = "milstein"
    SYMMETRIZED_EULER = "symmetrized_euler"


@dataclass(frozen=True)
class Anchor:
    """Coefficients frozen at the left grid point of one coarse step."""

    state: np.ndarray
    drift: np.ndarray
    diffusion: np.ndarray
    sigma_sigma_prime: np.ndarray | None = None
    mu_mu_prime: np.ndarray | None = None


def make_anchor(model: Model, x: np.ndarray, scheme: Scheme) -> Anchor:
    mu = model.drift(x)
    sig = model.diffusion(x)
    if scheme is Scheme.MILSTEIN:
        return Anchor(x, mu, sig, sig * model.diffusion_deriv(x), mu * model.drift_deriv(x))
    return Anchor(x, mu, sig)


def continuous_value(scheme: Scheme, a: Anchor, dt, dw):
    """Scheme value at anchor time + dt given the Brownian increment dw since the anchor."""
    if scheme is Scheme.MILSTEIN:
        return (a.state + a.drift * dt + a.diffusion * dw
                + 0.5 * a.sigma_sigma_prime * (dw * dw - dt) + 0.5 * a.mu_mu_prime * (dt * dt))
    inner = a.state + a.drift * dt + a.diffusion * dw
    if scheme is Scheme.SYMMETRIZED_EULER:
        with np.errstate(invalid="ignore"):
            out = np.abs(inner)
        # a blown-up state stays at +inf instead of turning into inf - inf = nan
        return np.where(np.isnan(out) & np.isinf(a.state), np.inf, out)
    return inner


def check_state(model: Model, scheme: Scheme, step: int, x: np.ndarray) -> None:
    """Raise DomainError if a half-line model was driven below 0 (or to NaN)."""
    bad = np.isnan(x)
    if model.half_line and scheme is not Scheme.SYMMETRIZED_EULER:
        bad = bad | (x < 0)
    if np.any(bad):
        first = np.flatnonzero(np.ravel(bad))[0]
        raise DomainError(scheme.value, step, float(np.ravel(x)[first]))


def check_symmetrizable(model: Model) -> None:
    with np.errstate(all="ignore"):
        at_zero = np.array([model.drift(np.float64(0.0)), model.diffusion(np.float64(0.0))], dtype=float)
    if not np.all(np.isfinite(at_zero)):
        raise DomainError(Scheme.SYMMETRIZED_EULER.value, 0, 0.0)


@dataclass(frozen=True)
class Trajectory:
    """Coarse-grid values plus the per-step anchors needed for continuous evaluation.

    ``values`` has shape ``(..., n + 1)``; the anchor arrays have shape ``(..., n)``.
    """

    model_name: str
    n: int
    horizon: float
    values: np.ndarray
    scheme: Scheme
    drift: np.ndarray
    diffusion: np.ndarray
    sigma_sigma_prime: np.ndarray | None = None
    mu_mu_prime: np.ndarray | None = None

    @property
    def h(self) -> float:
        return self.horizon / self.n

    def anchor(self, k: int | slice = slice(None)) -> Anchor:
        extra = {}
        if self.scheme is Scheme.MILSTEIN:
            extra = dict(sigma_sigma_prime=self.sigma_sigma_prime[..., k], mu_mu_prime=self.mu_mu_prime[..., k])
        return Anchor(self.values[..., :-1][..., k], self.drift[..., k], self.diffusion[..., k], **extra)


def simulate(model: Model, x0: float, n: int, brownian: BrownianGrid, scheme: Scheme | str) -> Trajectory:
    scheme = Scheme(scheme)
    if scheme is Scheme.SYMMETRIZED_EULER:
        if not x0 > 0:
            raise ValueError(f"symmetrized Euler needs x0 > 0, got {x0}")
        check_symmetrizable(model)
    dws = coarsen(brownian, n)
    h = brownian.horizon / n
    batch = dws.shape[:-1]
    values = np.empty(batch + (n + 1,))
    values[..., 0] = x0
    drift = np.empty(batch + (n,))
    diffusion = np.empty(batch + (n,))
    ssp = mmp = None
    if scheme is Scheme.MILSTEIN:
        ssp = np.empty(batch + (n,))
        mmp = np.empty(batch + (n,))
    x = np.full(batch, float(x0))
    with np.errstate(over="ignore"):
        for k in range(n):
            a = make_anchor(model, x, scheme)
            drift[..., k] = a.drift
            diffusion[..., k] = a.diffusion
            if ssp is not None:
                ssp[..., k] = a.sigma_sigma_prime
                mmp[..., k] = a.mu_mu_prime
            x = continuous_value(scheme, a, h, dws[..., k])
            check_state(model, scheme, k + 1, x)
            values[..., k + 1] = x
    return Trajectory(model.name, n, brownian.horizon, values, scheme, drift, diffusion, ssp, mmp)


def euler(model: Model, x0: float, n: int, brownian: BrownianGrid) -> Trajectory:
    """X_{k+1} = X_k + mu(X_k) h + sigma(X_k) dW_k on the coarsened increments."""
    return simulate(model, x0, n, brownian, Scheme.EULER)


def milstein(model: Model, x0: float, n: int, brownian: BrownianGrid) -> Trajectory:
    """Euler step plus 1/2 sigma sigma' (dW^2 - h) + 1/2 mu mu' h^2."""
    return simulate(model, x0, n, brownian, Scheme.MILSTEIN)


def symmetrized_euler(model: Model, x0: float, n: int, brownian: BrownianGrid) -> Trajectory:
    """Euler step followed by reflection, X_{k+1} = |X_k + mu h + sigma dW_k|."""
    return simulate(model, x0, n, brownian, Scheme.SYMMETRIZED_EULER)


def default_scheme(model: Model) -> Scheme:
    return Scheme.SYMMETRIZED_EULER if model.half_line else Scheme.EULER


def continuous_path(traj: Trajectory, brownian: BrownianGrid) -> np.ndarray:
    """The interpolated scheme at every fine grid time, shape ``(..., n_fine + 1)``."""
    r = _ratio(traj, brownian)
    n = traj.n
    inc = brownian.increments.reshape(brownian.increments.shape[:-1] + (n, r))
    dw = np.zeros_like(inc)
    np.cumsum(inc[..., :-1], axis=-1, out=dw[..., 1:])
    dt = np.arange(r) * brownian.h
    a = traj.anchor()
    expand = lambda v: None if v is None else v[..., None]  # noqa: E731
    a = Anchor(expand(a.state), expand(a.drift), expand(a.diffusion),
               expand(a.sigma_sigma_prime), expand(a.mu_mu_prime))
    with np.errstate(over="ignore", invalid="ignore"):
        inner = continuous_value(traj.scheme, a, dt, dw)
    inner = inner.reshape(inner.shape[:-2] + (n * r,))
    return np.concatenate([inner, traj.values[..., -1:]], axis=-1)


def interpolate(traj: Trajectory, t: float, brownian: BrownianGrid):
    """Continuous scheme value at fine grid time t."""
    k_fine = t / brownian.h
    k = int(round(k_fine))
    if not 0 <= k <= brownian.fine_steps or not np.isclose(k_fine, k, rtol=0, atol=1e-9):
        raise ValueError(f"t={t} is not a fine grid time")
    r = _ratio(traj, brownian)
    step, j = divmod(k, r)
    if step == traj.n:
        return traj.values[..., -1]
    inc = brownian.increments[..., step * r: step * r + j]
    dw = np.cumsum(inc, axis=-1)[..., -1] if j else np.zeros(inc.shape[:-1])
    return continuous_value(traj.scheme, traj.anchor(step), j * brownian.h, dw)


def _ratio(traj: Trajectory, brownian: BrownianGrid) -> int:
    if brownian.fine_steps % traj.n or brownian.horizon != traj.horizon:
        raise ValueError("trajectory was not built on this Brownian grid")
    return brownian.fine_steps // traj.n


@dataclass(frozen=True)
class StoppedTrajectory:
    base: Trajectory
    stop_index: int | np.ndarray  # NEVER (-1) when |value| never exceeds the level
    level: float
    values: np.ndarray


def stop_at(traj: Trajectory | np.ndarray, m: float) -> StoppedTrajectory:
    """Freeze the trajectory from the first grid index with |value| > m."""
    values = traj.values if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    exceed = np.abs(values) > m
    hit = exceed.any(axis=-1)
    first = np.where(hit, exceed.argmax(axis=-1), NEVER)
    idx = np.arange(values.shape[-1])
    stop = np.where(hit, first, values.shape[-1] - 1)[..., None]
    frozen = np.where(idx > stop, np.take_along_axis(values, stop, axis=-1), values)
    if np.ndim(first) == 0:
        first = int(first)
    return StoppedTrajectory(traj if isinstance(traj, Trajectory) else None, first, float(m), frozen)


def dump_trajectory_csv(traj: Trajectory, fh) -> None:
    if traj.values.ndim != 1:
        raise ValueError("dump one path at a time")
    fh.write("k,t,value\n")
    for k, v in enumerate(traj.values):
        fh.write(f"{k},{float(k * traj.h)!r},{float(v)!r}\n")
