import io

import numpy as np
import pytest

from sde_errlab import model as M
from sde_errlab import path as P
from sde_errlab import scheme as S


def grid_from(increments, T=1.0):
    inc = np.asarray(increments, dtype=float)
    return P.BrownianGrid(T, inc.shape[-1], inc, 0, 0)


def test_frozen_dynamics():
    tr = S.euler(M.constant_model(0, 0), 1.0, 8, P.generate(0, 0, 1.0, 64))
    assert np.all(tr.values == 1.0)


def test_unit_drift_line():
    tr = S.euler(M.constant_model(1, 0), 0.0, 2, P.generate(0, 0, 1.0, 8))
    np.testing.assert_allclose(tr.values, [0.0, 0.5, 1.0])


def test_pure_noise_is_brownian_partial_sums():
    g = P.generate(1, 0, 1.0, 64)
    tr = S.euler(M.constant_model(0, 1), 0.0, 8, g)
    assert np.array_equal(tr.values[1:], np.cumsum(P.coarsen(g, 8)))


def test_milstein_one_step():
    lin = M.custom_model("lin", lambda x: np.zeros(np.shape(x)), lambda x: np.asarray(x, dtype=float),
                         diffusion_deriv=lambda x: np.ones(np.shape(x)))
    w, h = 0.3, 0.5
    tr = S.milstein(lin, 1.0, 1, grid_from([w], T=h))
    assert tr.values[-1] == pytest.approx(1 + w + 0.5 * (w * w - h))


def test_milstein_reduces_to_euler_for_constant_coefficients():
    g = P.generate(2, 0, 1.0, 32)
    m = M.constant_model(0.3, 0.7)
    assert np.array_equal(S.milstein(m, 0.1, 8, g).values, S.euler(m, 0.1, 8, g).values)


def test_milstein_additive_noise_adds_drift_term():
    g = P.generate(2, 0, 1.0, 32)
    ou = M.get_model("ou", theta=1.0, sigma=0.5)
    e, mi = S.euler(ou, 1.0, 1, g).values[-1], S.milstein(ou, 1.0, 1, g).values[-1]
    assert mi - e == pytest.approx(0.5 * (-1.0) * (-1.0) * 1.0)


def test_symmetrized_reflection():
    m = M.constant_model(0.0, 1.0)
    assert S.symmetrized_euler(m, 0.2, 1, grid_from([-0.5])).values[-1] == pytest.approx(0.3)
    assert S.symmetrized_euler(m, 0.2, 1, grid_from([0.1])).values[-1] == pytest.approx(0.3)


def test_symmetrized_noise_free_cir():
    cir = M.get_model("cir", a=1.0, b=0.0, sigma=0.0)
    tr = S.symmetrized_euler(cir, 0.5, 4, P.generate(0, 0, 1.0, 16))
    np.testing.assert_allclose(tr.values, 0.5 + np.arange(5) * 0.25)


def test_symmetrized_needs_positive_start():
    with pytest.raises(ValueError):
        S.symmetrized_euler(M.get_model("cir"), 0.0, 4, P.generate(0, 0, 1.0, 16))


def test_plain_euler_on_cir_hits_domain_error():
    cir = M.get_model("cir", a=0.0, b=0.0, sigma=1.0)
    with pytest.raises(S.DomainError) as err:
        S.euler(cir, 0.01, 1, grid_from([-1.0]))
    assert err.value.step == 1 and err.value.state < 0


def test_interpolation_consistency():
    g = P.generate(3, 0, 1.0, 64)
    bs = M.get_model("bounded_sine")
    for sch in S.Scheme:
        tr = S.simulate(bs, 0.5 if sch is S.Scheme.SYMMETRIZED_EULER else 0.0, 8, g, sch)
        cont = S.continuous_path(tr, g)
        assert np.array_equal(cont[::8], tr.values)
        assert S.interpolate(tr, 0.375, g) == cont[24]


def test_interpolation_of_identity_and_line():
    g = P.generate(4, 0, 1.0, 64)
    tr = S.euler(M.constant_model(0, 1), 0.0, 4, g)
    np.testing.assert_allclose(S.continuous_path(tr, g), g.cumulative(), atol=1e-14)
    line = S.euler(M.constant_model(1, 0), 0.0, 2, P.generate(0, 0, 1.0, 4))
    assert float(S.interpolate(line, 0.25, P.generate(0, 0, 1.0, 4))) == pytest.approx(0.25)
    with pytest.raises(ValueError):
        S.interpolate(line, 0.3, P.generate(0, 0, 1.0, 4))


def test_batched_equals_single():
    g = P.generate(5, [0, 1, 2], 1.0, 32)
    gbm = M.get_model("gbm")
    batch = S.milstein(gbm, 1.0, 8, g)
    assert np.array_equal(batch.values[1], S.milstein(gbm, 1.0, 8, g.select(1)).values)


def test_stop_at_examples():
    s = S.stop_at(np.array([0.0, 2.0, 5.0, 1.0]), 3.0)
    assert s.stop_index == 2
    assert s.values.tolist() == [0.0, 2.0, 5.0, 5.0]
    never = S.stop_at(np.array([0.0, 1.0]), 3.0)
    assert never.stop_index == S.NEVER and never.values.tolist() == [0.0, 1.0]
    assert S.stop_at(np.array([4.0, 1.0]), 3.0).stop_index == 0


def test_default_scheme():
    assert S.default_scheme(M.get_model("cev")) is S.Scheme.SYMMETRIZED_EULER
    assert S.default_scheme(M.get_model("gbm")) is S.Scheme.EULER


def test_dump_trajectory_csv():
    buf = io.StringIO()
    S.dump_trajectory_csv(S.euler(M.constant_model(1, 0), 0.0, 2, P.generate(0, 0, 1.0, 4)), buf)
    assert buf.getvalue().splitlines() == ["k,t,value", "0,0.0,0.0", "1,0.5,0.5", "2,1.0,1.0"]
