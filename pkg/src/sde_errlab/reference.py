"""Coupled reference solution on the fine grid.

GBM is solved exactly from the same Brownian path.  Every other whole-line
model uses Milstein on the fine grid; half-line models use the symmetrized
Euler scheme there, since fine Milstein steps can leave the domain.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Model
from .path import BrownianGrid
from .scheme import Scheme, check_state, continuous_value, make_anchor, simulate


class ReferenceMethod(str, enum.Enum):
    EXACT_GBM = "exact_gbm"
    FINE_MILSTEIN = "fine_milstein"
    FINE_SYMMETRIZED_EULER = "fine_symmetrized_euler"


@dataclass(frozen=True)
class ReferenceTrajectory:
    values: np.ndarray  # (..., n_fine + 1)
    method: ReferenceMethod
    refinement: int | None
    horizon: float

    @property
    def fine_steps(self) -> int:
        return self.values.shape[-1] - 1


def reference_method(model: Model) -> ReferenceMethod:
    if model.name == "gbm":
        return ReferenceMethod.EXACT_GBM
    if model.half_line:
        return ReferenceMethod.FINE_SYMMETRIZED_EULER
    return ReferenceMethod.FINE_MILSTEIN


def _fine_scheme(method: ReferenceMethod) -> Scheme:
    return Scheme.MILSTEIN if method is ReferenceMethod.FINE_MILSTEIN else Scheme.SYMMETRIZED_EULER


def exact_gbm(model: Model, x0: float, times: np.ndarray, w: np.ndarray) -> np.ndarray:
    mu, sigma = model.params["mu"], model.params["sigma"]
    return x0 * np.exp((mu - 0.5 * sigma**2) * times + sigma * w)


def reference(model: Model, x0: float, brownian: BrownianGrid, refinement: int | None = None) -> ReferenceTrajectory:
    method = reference_method(model)
    if method is ReferenceMethod.EXACT_GBM:
        values = exact_gbm(model, x0, brownian.times(), brownian.cumulative())
    else:
        values = simulate(model, x0, brownian.fine_steps, brownian, _fine_scheme(method)).values
    return ReferenceTrajectory(values, method, refinement, brownian.horizon)


class ReferenceStepper:
    """Advances the reference block by block; bit-identical to :func:`reference`."""

    def __init__(self, model: Model, x0: float, paths: int, T: float, n_fine: int):
        self.model = model
        self.x0 = float(x0)
        self.method = reference_method(model)
        self.h = T / n_fine
        self.k = 0
        self.x = np.full(paths, self.x0)
        self.w = np.zeros(paths)

    def advance(self, dw: np.ndarray) -> np.ndarray:
        """Take ``len(dw)`` fine steps; returns the states at the block's L + 1 grid times."""
        steps = dw.shape[0]
        if self.method is ReferenceMethod.EXACT_GBM:
            w = np.cumsum(np.concatenate([self.w[None], dw]), axis=0)
            t = (self.k + np.arange(steps + 1)) * self.h
            out = exact_gbm(self.model, self.x0, t[:, None], w)
            self.w = w[-1]
        else:
            scheme = _fine_scheme(self.method)
            out = np.empty((steps + 1,) + self.x.shape)
            out[0] = self.x
            x = self.x
            with np.errstate(over="ignore"):
                for j in range(steps):
                    x = continuous_value(scheme, make_anchor(self.model, x, scheme), self.h, dw[j])
                    check_state(self.model, scheme, self.k + j + 1, x)
                    out[j + 1] = x
        self.k += steps
        self.x = out[-1]
        return out
