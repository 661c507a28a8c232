import pickle

import numpy as np
import pytest

from sde_errlab import model as M


def square_model():
    return M.custom_model("square", lambda x: np.asarray(x, dtype=float) ** 2, lambda x: np.ones(np.shape(x)),
                          lambda x: 2.0 * np.asarray(x, dtype=float))


@pytest.mark.parametrize("x,expected", [(1.5, 2.25), (3.5, 9.0), (2.5, 6.5), (-2.5, 6.5), (-7.0, 9.0)])
def test_truncate_square_drift(x, expected):
    t = M.truncate(square_model(), 2.0)
    assert float(t.drift(np.float64(x))) == pytest.approx(expected)


def test_truncate_derivative_pieces():
    t = M.truncate(square_model(), 2.0)
    assert float(t.drift_deriv(np.float64(1.0))) == 2.0
    assert float(t.drift_deriv(np.float64(2.5))) == 5.0  # slope of the linear bridge 4 -> 9
    assert float(t.drift_deriv(np.float64(4.0))) == 0.0


def test_truncate_agrees_on_band_and_is_lipschitz():
    base = M.get_model("cev")
    t = M.truncate(base, 3.0)
    x = np.linspace(t.floor, 3.0, 101)
    assert np.array_equal(t.diffusion(x), base.diffusion(x))
    grid = np.linspace(-5, 10, 3001)
    slopes = np.abs(np.diff(t.diffusion(grid)) / np.diff(grid))
    assert slopes.max() < np.inf and slopes.max() <= 2 * 3.0 * 4 + 1e-9


def test_truncate_half_line_floor():
    t = M.truncate(M.get_model("inverse_bessel"), 3.0)
    assert t.floor == pytest.approx(0.25)
    assert float(t.diffusion(np.float64(0.1))) == pytest.approx(0.25**2)
    with pytest.raises(ValueError):
        M.truncate(M.get_model("cev"), 0.5)
    with pytest.raises(ValueError):
        M.truncate(square_model(), 0.0)


def test_registry_lookups():
    assert float(M.get_model("inverse_bessel").diffusion(2.0)) == 4.0
    assert float(M.get_model("abs_drift").drift_deriv(0.0)) == 0.0
    assert float(M.get_model("bounded_sine").drift(7.3)) == 0.0
    with pytest.raises(KeyError):
        M.get_model("nope")
    with pytest.raises(ValueError):
        M.get_model("gbm", nonsense=1.0)


@pytest.mark.parametrize("name", sorted(M.builtin_models()))
def test_growth_pair_holds_on_sample_window(name):
    # |f(x) - f(y)| <= (max(|x|,|y|)^a + K) |x - y| for both coefficients
    m = M.get_model(name)
    lo, hi = m.sample_interval
    rng = np.random.default_rng(0)
    x, y = rng.uniform(lo, hi, (2, 20000))
    bound = (np.maximum(np.abs(x), np.abs(y)) ** m.growth_exponent + m.growth_constant) * np.abs(x - y)
    for f in (m.drift, m.diffusion):
        assert np.all(np.abs(f(x) - f(y)) <= bound * (1 + 1e-12) + 1e-15)


@pytest.mark.parametrize("name", sorted(M.builtin_models()))
def test_derivatives_match_finite_differences(name):
    m = M.get_model(name)
    lo, hi = m.sample_interval
    x = np.linspace(lo + 0.05, hi - 0.05, 50)
    x = x[np.all([np.abs(x - p) > 0.05 for p in m.nondifferentiable_points] or [True], axis=0)]
    e = 1e-6
    for f, df in ((m.drift, m.drift_deriv), (m.diffusion, m.diffusion_deriv)):
        np.testing.assert_allclose(df(x), (f(x + e) - f(x - e)) / (2 * e), rtol=1e-5, atol=1e-5)


def test_models_pickle_through_registry():
    m = M.get_model("cir", b=0.02)
    back = pickle.loads(pickle.dumps(m))
    assert back.params == m.params
    assert float(back.drift(1.0)) == float(m.drift(1.0))
    t = pickle.loads(pickle.dumps(M.truncate(m, 3.0)))
    assert t.level == 3.0 and t.base.name == "cir"
    with pytest.raises(TypeError):
        pickle.dumps(square_model())


def test_describe_is_json_ready():
    d = M.get_model("gbm").describe()
    assert d["name"] == "gbm" and d["domain"] == "whole_line" and d["params"] == {"mu": 0.5, "sigma": 0.4}


@pytest.mark.parametrize("a,b,sigma,holds", [(1, 0.01, 0.1, True), (1, 1, 1, False), (0.5, 0, 1, False)])
def test_cir_condition(a, b, sigma, holds):
    c = M.check_cir_condition(a, b, sigma)
    assert bool(c) is holds


def test_cir_condition_arithmetic():
    c = M.check_cir_condition(1, 0.01, 0.1)
    assert c.lhs == pytest.approx(0.00125 * 199**2)
    assert c.rhs == pytest.approx(9.0)
    assert M.check_cir_condition(1, 1, 1).rhs == pytest.approx(900.0)
    with pytest.raises(ValueError):
        M.check_cir_condition(0, 1, 1)
