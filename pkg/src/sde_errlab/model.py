"""Coefficient pairs (drift, diffusion) for scalar SDEs dX = mu(X) dt + sigma(X) dW.

Every coefficient and derivative is a numpy-vectorised callable.  Derivatives
are hand coded and return exactly 0 at points where the coefficient is not
differentiable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

Coefficient = Callable[[np.ndarray], np.ndarray]


class StateDomain(str, enum.Enum):
    WHOLE_LINE = "whole_line"
    POSITIVE_HALF_LINE = "positive_half_line"


@dataclass(frozen=True)
class Model:
    name: str
    drift: Coefficient
    diffusion: Coefficient
    drift_deriv: Coefficient
    diffusion_deriv: Coefficient
    growth_exponent: float
    growth_constant: float
    state_domain: StateDomain = StateDomain.WHOLE_LINE
    params: Mapping[str, float] = field(default_factory=dict)
    nondifferentiable_points: tuple[float, ...] = ()
    # window on which the polynomial-growth Lipschitz bound is checked
    sample_interval: tuple[float, float] = (-10.0, 10.0)
    drift_free_derivative: bool = False  # mu' == 0 identically

    def __post_init__(self):
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def half_line(self) -> bool:
        return self.state_domain is StateDomain.POSITIVE_HALF_LINE

    def __reduce__(self):
        # coefficients are closures; rebuild from the registry when crossing processes
        if self.name not in _FACTORIES:
            raise TypeError(f"model {self.name!r} is not in the registry and cannot be pickled")
        return (_rebuild, (self.name, dict(self.params)))

    def describe(self) -> dict:
        return {
            "name": self.name,
            "domain": self.state_domain.value,
            "params": dict(self.params),
            "growth_exponent": self.growth_exponent,
            "growth_constant": self.growth_constant,
            "nondifferentiable_points": list(self.nondifferentiable_points),
        }


@dataclass(frozen=True)
class TruncatedModel(Model):
    """Localised coefficients: equal to ``base`` on the agreement band, constant outside."""

    base: Model | None = None
    level: float = 0.0
    floor: float | None = None

    def __reduce__(self):
        return (truncate, (self.base, self.level))


def _const(value: float) -> Coefficient:
    return lambda x: np.full(np.shape(x), float(value))


def _zero(x):
    return np.zeros(np.shape(x))


def _gbm(mu: float = 0.5, sigma: float = 0.4) -> Model:
    lip = abs(mu) + abs(sigma)
    return Model(
        name="gbm",
        drift=lambda x: mu * np.asarray(x, dtype=float),
        diffusion=lambda x: sigma * np.asarray(x, dtype=float),
        drift_deriv=_const(mu),
        diffusion_deriv=_const(sigma),
        growth_exponent=1.0,
        growth_constant=max(lip, 1.0),
        params={"mu": mu, "sigma": sigma},
        drift_free_derivative=(mu == 0.0),
    )


def _ou(theta: float = 1.0, sigma: float = 0.5) -> Model:
    return Model(
        name="ou",
        drift=lambda x: -theta * np.asarray(x, dtype=float),
        diffusion=_const(sigma),
        drift_deriv=_const(-theta),
        diffusion_deriv=_zero,
        growth_exponent=1.0,
        growth_constant=max(abs(theta), 1.0),
        params={"theta": theta, "sigma": sigma},
        drift_free_derivative=(theta == 0.0),
    )


def _bounded_sine() -> Model:
    return Model(
        name="bounded_sine",
        drift=_zero,
        diffusion=lambda x: 2.0 + np.sin(x),
        drift_deriv=_zero,
        diffusion_deriv=np.cos,
        growth_exponent=1.0,
        growth_constant=1.0,
        drift_free_derivative=True,
    )


def _abs_drift() -> Model:
    return Model(
        name="abs_drift",
        drift=np.abs,
        diffusion=lambda x: 2.0 + np.sin(x),
        drift_deriv=lambda x: np.sign(np.asarray(x, dtype=float)),  # sign(0) == 0
        diffusion_deriv=np.cos,
        growth_exponent=1.0,
        growth_constant=2.0,
        nondifferentiable_points=(0.0,),
    )


def _inverse_bessel() -> Model:
    # |x^2 - y^2| <= 2 max|.| |x - y|; (max + 10) >= 2 max on the sample window
    return Model(
        name="inverse_bessel",
        drift=_zero,
        diffusion=lambda x: np.asarray(x, dtype=float) ** 2,
        drift_deriv=_zero,
        diffusion_deriv=lambda x: 2.0 * np.asarray(x, dtype=float),
        growth_exponent=1.0,
        growth_constant=10.0,
        state_domain=StateDomain.POSITIVE_HALF_LINE,
        sample_interval=(0.0, 10.0),
        drift_free_derivative=True,
    )


def _cir(a: float = 1.0, b: float = 0.01, sigma: float = 0.1) -> Model:
    def diffusion(x):
        return sigma * np.sqrt(np.asarray(x, dtype=float))

    def diffusion_deriv(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = sigma / (2.0 * np.sqrt(x))
        return np.where(x > 0, d, 0.0)

    lo = 0.01
    return Model(
        name="cir",
        drift=lambda x: a - b * np.asarray(x, dtype=float),
        diffusion=diffusion,
        drift_deriv=_const(-b),
        diffusion_deriv=diffusion_deriv,
        growth_exponent=1.0,
        growth_constant=abs(b) + sigma / (2.0 * np.sqrt(lo)),
        state_domain=StateDomain.POSITIVE_HALF_LINE,
        params={"a": a, "b": b, "sigma": sigma},
        nondifferentiable_points=(0.0,),
        # sigma*sqrt(x) has unbounded difference quotients at 0
        sample_interval=(lo, 10.0),
        drift_free_derivative=(b == 0.0),
    )


def _cev(b: float = 1.0, beta: float = 2.0) -> Model:
    if beta <= 1.0:
        raise ValueError(f"cev needs beta > 1, got {beta}")
    hi = 10.0
    # b*beta*max^(beta-1) <= (max + K)^(beta-1) on (0, hi]
    k = max(0.0, ((b * beta) ** (1.0 / (beta - 1.0)) - 1.0) * hi)
    return Model(
        name="cev",
        drift=_zero,
        diffusion=lambda x: b * np.asarray(x, dtype=float) ** beta,
        drift_deriv=_zero,
        diffusion_deriv=lambda x: b * beta * np.asarray(x, dtype=float) ** (beta - 1.0),
        growth_exponent=beta - 1.0,
        growth_constant=k,
        state_domain=StateDomain.POSITIVE_HALF_LINE,
        params={"b": b, "beta": beta},
        sample_interval=(0.0, hi),
        drift_free_derivative=True,
    )


_FACTORIES: dict[str, Callable[..., Model]] = {
    "gbm": _gbm,
    "ou": _ou,
    "bounded_sine": _bounded_sine,
    "abs_drift": _abs_drift,
    "inverse_bessel": _inverse_bessel,
    "cir": _cir,
    "cev": _cev,
}


def _rebuild(name: str, params: dict) -> Model:
    return get_model(name, **params)


def builtin_models() -> dict[str, Model]:
    """All registered models at their default parameters."""
    return {name: factory() for name, factory in _FACTORIES.items()}


def get_model(name: str, **params: float) -> Model:
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {sorted(_FACTORIES)}") from None
    try:
        return factory(**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise ValueError(f"bad parameters for {name}: {exc}") from None


def custom_model(name, drift, diffusion, drift_deriv=_zero, diffusion_deriv=_zero, *,
                 state_domain=StateDomain.WHOLE_LINE, growth_exponent=1.0, growth_constant=1.0):
    """Ad-hoc model from plain callables (used for the degenerate test dynamics)."""
    return Model(
        name=name,
        drift=drift,
        diffusion=diffusion,
        drift_deriv=drift_deriv,
        diffusion_deriv=diffusion_deriv,
        growth_exponent=growth_exponent,
        growth_constant=growth_constant,
        state_domain=StateDomain(state_domain),
    )


def constant_model(mu: float = 0.0, sigma: float = 0.0) -> Model:
    return custom_model(f"const_{mu:g}_{sigma:g}", _const(mu), _const(sigma))


def _localise(f: Coefficient, df: Coefficient, m: float, floor: float | None):
    lo_edge = -(m + 1.0) if floor is None else floor
    f_m, f_m1 = float(f(np.float64(m))), float(f(np.float64(m + 1.0)))
    up_slope = f_m1 - f_m
    if floor is None:
        g_m, g_m1 = float(f(np.float64(-m))), float(f(np.float64(-(m + 1.0))))
        down_slope = g_m - g_m1  # slope on (-(m+1), -m)

    def value(x):
        x = np.asarray(x, dtype=float)
        inner = f(np.clip(x, lo_edge, m + 1.0))
        out = np.where(x > m, f_m + (np.minimum(x, m + 1.0) - m) * up_slope, inner)
        if floor is None:
            out = np.where(x < -m, g_m + (np.maximum(x, -(m + 1.0)) + m) * down_slope, out)
        return out

    def deriv(x):
        x = np.asarray(x, dtype=float)
        inner = df(np.clip(x, lo_edge, m + 1.0))
        out = np.where(x > m, np.where(x < m + 1.0, up_slope, 0.0), inner)
        if floor is None:
            out = np.where(x < -m, np.where(x > -(m + 1.0), down_slope, 0.0), out)
        else:
            out = np.where(x < floor, 0.0, out)
        return out

    return value, deriv


def truncate(model: Model, m: float) -> TruncatedModel:
    """Globally Lipschitz modification agreeing with ``model`` on [-m, m].

    Linear on (m, m+1) and (-(m+1), -m), constant beyond.  Half-line models are
    additionally held constant below the floor 1/(m+1).
    """
    if not m > 0:
        raise ValueError(f"truncation level must be positive, got {m}")
    floor = None
    if model.half_line:
        floor = 1.0 / (m + 1.0)
        if floor >= m:
            raise ValueError(f"truncation level {m} leaves no agreement band above the floor {floor:g}")
    drift, drift_deriv = _localise(model.drift, model.drift_deriv, m, floor)
    diffusion, diffusion_deriv = _localise(model.diffusion, model.diffusion_deriv, m, floor)
    kinks = {m, m + 1.0} | ({floor} if floor is not None else {-m, -(m + 1.0)})
    kinks |= {p for p in model.nondifferentiable_points if abs(p) < m}
    return TruncatedModel(
        name=f"{model.name}@{m:g}",
        drift=drift,
        diffusion=diffusion,
        drift_deriv=drift_deriv,
        diffusion_deriv=diffusion_deriv,
        growth_exponent=model.growth_exponent,
        growth_constant=model.growth_constant,
        state_domain=model.state_domain,
        params=model.params,
        nondifferentiable_points=tuple(sorted(kinks)),
        sample_interval=model.sample_interval,
        drift_free_derivative=model.drift_free_derivative,
        base=model,
        level=float(m),
        floor=floor,
    )


@dataclass(frozen=True)
class CirCondition:
    holds: bool
    lhs: float
    rhs: float

    def __bool__(self):
        return self.holds


def moment_bound_k(p: float, b: float, sigma: float) -> float:
    return max(b * (4 * p - 1), (2 * sigma * (2 * p - 1)) ** 2)


def check_cir_condition(a: float, b: float, sigma: float) -> CirCondition:
    """(sigma^2/8)(2a/sigma^2 - 1)^2 > max{31 b, 900 sigma^2}."""
    if a <= 0 or sigma <= 0:
        raise ValueError(f"need a > 0 and sigma > 0, got a={a}, sigma={sigma}")
    lhs = sigma**2 / 8.0 * (2.0 * a / sigma**2 - 1.0) ** 2
    rhs = moment_bound_k(8, b, sigma)
    return CirCondition(holds=bool(lhs > rhs), lhs=float(lhs), rhs=float(rhs))
