import numpy as np
import pytest

from sde_errlab import model as M
from sde_errlab import weakerror as W


def test_functionals_respect_bounds():
    x = np.linspace(-1e6, 1e6, 100_001)
    for spec in (W.clamp_functional(), W.constant_functional(2.0)):
        g = spec.g(x)
        assert np.all(np.abs(g) <= spec.sup_bound)
        assert np.all(np.abs(np.diff(g)) <= spec.lipschitz * np.diff(x) + 1e-12)


def test_constant_functional_gives_zero():
    rep = W.estimate_weak_error(M.get_model("gbm"), 1.0, W.constant_functional(), (4, 8, 16), 1000, 0,
                                refinement=4, workers=1)
    assert rep.estimates == (0.0, 0.0, 0.0) and rep.ses == (0.0, 0.0, 0.0)
    assert rep.noise_floor is False


def test_gbm_min_functional_decreases():
    rep = W.estimate_weak_error(M.get_model("gbm"), 1.0, W.min_functional(1.0), (4, 8, 16, 32), 2000, 3,
                                refinement=8, workers=1)
    assert all(rep.nonincreasing())
    assert all(e >= 0 for e in rep.estimates) and all(s > 0 for s in rep.ses)
    assert rep.tail.source == "hill"


def test_bound_curve_is_anchored_at_first_n():
    rep = W.estimate_weak_error(M.get_model("gbm"), 1.0, W.min_functional(1.0), (4, 8, 16), 1000, 1,
                                refinement=4, nu=2.0)
    assert rep.bound_curve[0] == pytest.approx(rep.estimates[0])
    assert rep.bound_constant == pytest.approx(rep.estimates[0] * np.log(4) ** 2)
    assert rep.rate_exponent == 2.0


def test_estimate_validates_input():
    with pytest.raises(ValueError):
        W.estimate_weak_error(M.get_model("gbm"), 1.0, W.clamp_functional(), (4, 6), 1000, 0)
    with pytest.raises(ValueError):
        W.estimate_weak_error(M.get_model("gbm"), 1.0, W.clamp_functional(), (4, 8), 999, 0)


def test_cev_tail_is_analytic():
    t = W.tail_estimate(M.get_model("cev"), np.ones(10), 1.5)
    assert (t.nu, t.kappa, t.source) == (1.0, 1.5, "analytic")


def test_tail_check_trivial_cases():
    s = np.full(1000, 1.0)
    checks = W.tail_probability_check(s, 1.0, [2.0, 4.0])
    assert all(c.fraction == 0.0 and c.passed for c in checks)
    with pytest.raises(ValueError):
        W.tail_probability_check(s, 1.0, [0.5])


def test_tail_check_interval():
    s = np.r_[np.full(100, 5.0), np.full(900, 1.0)]
    (c,) = W.tail_probability_check(s, 1.0, [4.0])
    assert c.fraction == 0.1 and c.ci[0] < 0.1 < c.ci[1] and c.passed
    (bad,) = W.tail_probability_check(np.full(1000, 5.0), 1.0, [4.0])
    assert not bad.passed


def test_crn_reduces_variance():
    crn, indep = W.crn_variance_comparison(M.get_model("gbm"), 1.0, W.clamp_functional(), 8, 500, 0, refinement=8)
    assert crn < indep / 10
