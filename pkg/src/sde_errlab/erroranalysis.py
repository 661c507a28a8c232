"""Pathwise errors, the Z^n functionals and log-log rate fits."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import statkit
from .path import BrownianGrid, coarsen
from .reference import ReferenceTrajectory
from .scheme import Trajectory, continuous_path


class NoiseFloorError(ValueError):
    """An error measurement is zero or negative, i.e. indistinguishable from round-off."""


@dataclass(frozen=True)
class ErrorSample:
    n: int
    sup_error: np.ndarray | float
    terminal_error: np.ndarray | float
    normalized_terminal: np.ndarray | float  # U^n_T = sqrt(n) (X^n_T - X_T), signed
    normalized_sup: np.ndarray | float


@dataclass(frozen=True)
class ZStats:
    z11: np.ndarray | float
    z12: np.ndarray | float
    z21: np.ndarray | float
    z22: np.ndarray | float


@dataclass(frozen=True)
class RateFit:
    alpha: float
    intercept: float
    r2: float
    slope_se: float


def error_sample(traj: Trajectory, ref: ReferenceTrajectory, brownian: BrownianGrid) -> ErrorSample:
    if ref.fine_steps != brownian.fine_steps or ref.values.shape[:-1] != traj.values.shape[:-1]:
        raise ValueError("scheme and reference were not built on the same Brownian grid")
    scheme_fine = continuous_path(traj, brownian)
    with np.errstate(invalid="ignore"):
        sup = np.max(np.abs(scheme_fine - ref.values), axis=-1)
        signed = traj.values[..., -1] - ref.values[..., -1]
    root_n = np.sqrt(traj.n)
    return ErrorSample(traj.n, sup, np.abs(signed), root_n * signed, root_n * sup)


def z11_closed_form(n: int, T: float = 1.0) -> float:
    """Z^{n11}_T = sqrt(n) * n * (T/n)^2 / 2 = T^2 / (2 sqrt(n))."""
    return np.sqrt(n) * n * (T / n) ** 2 / 2.0


def z_functionals(brownian: BrownianGrid, n: int) -> ZStats:
    """Terminal values of Z^{n11}, Z^{n12}, Z^{n21}, Z^{n22}.

    z22 uses the per-step Ito identity  int (W_s - W_{t_k}) dW_s = ((dW_k)^2 - h) / 2,
    z12 and z21 are left-point sums on the fine grid.
    """
    dws = coarsen(brownian, n)  # validates n
    T = brownian.horizon
    h = T / n
    r = brownian.fine_steps // n
    hf = brownian.h
    inc = brownian.increments.reshape(brownian.increments.shape[:-1] + (n, r))
    since_left = np.zeros_like(inc)
    np.cumsum(inc[..., :-1], axis=-1, out=since_left[..., 1:])
    ds = np.arange(r) * hf
    root_n = np.sqrt(n)
    z12 = root_n * np.sum(ds * inc, axis=(-2, -1))
    z21 = root_n * hf * np.sum(since_left, axis=(-2, -1))
    z22 = root_n / 2.0 * np.sum(dws * dws - h, axis=-1)
    z11 = z11_closed_form(n, T)
    if np.ndim(z22):
        z11 = np.full(np.shape(z22), z11)
    return ZStats(z11, z12, z21, z22)


def fit_rate(points) -> RateFit:
    """OLS of log(rms) on log(n); alpha is the decay rate (positive when errors shrink)."""
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise ValueError("a rate fit needs at least 3 points")
    ns = np.array([p[0] for p in pts])
    vals = np.array([p[1] for p in pts])
    if np.any(np.diff(ns) <= 0):
        raise ValueError("n values must be strictly increasing")
    if not np.all(vals > 0) or not np.all(np.isfinite(vals)):
        raise NoiseFloorError(f"nonpositive or non-finite error in rate fit: {vals.tolist()}")
    fit = statkit.linfit(np.log(ns), np.log(vals))
    return RateFit(alpha=-fit.slope, intercept=fit.intercept, r2=fit.r2, slope_se=fit.slope_se)


def error_row(n: int, sup, terminal_signed) -> dict:
    """One CSV row: n, paths, rms_sup, rms_sup_se, rms_terminal, mean_Un, var_Un."""
    sup = np.asarray(sup, dtype=float)
    signed = np.asarray(terminal_signed, dtype=float)
    rms_sup, rms_sup_se = statkit.rms(sup)
    rms_terminal, _ = statkit.rms(signed)
    un = np.sqrt(n) * signed
    s = statkit.summarize(un) if un.size > 1 else None
    return {
        "n": int(n),
        "paths": int(sup.size),
        "rms_sup": rms_sup,
        "rms_sup_se": rms_sup_se,
        "rms_terminal": rms_terminal,
        "mean_Un": float(un.mean()),
        "var_Un": s.variance if s else float("nan"),
    }
