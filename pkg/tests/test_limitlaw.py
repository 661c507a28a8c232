import numpy as np
import pytest

from sde_errlab import limitlaw as L
from sde_errlab import model as M
from sde_errlab import path as P


def test_noise_scale():
    assert L.limit_noise_scale(1.0) == pytest.approx(np.sqrt(2) / 2)
    assert L.limit_noise_scale(4.0) == pytest.approx(np.sqrt(2))


def test_zero_limit_for_constant_coefficients():
    W = P.generate(0, P.STREAM_LIMIT_W, 1.0, 64)
    B = P.generate(0, P.STREAM_B, 1.0, 64)
    lt = L.simulate_limit(M.constant_model(0.5, 0.7), 0.0, W, B)
    assert np.all(lt.U == 0.0)


def test_inverse_bessel_step():
    m = M.get_model("inverse_bessel")
    U, X, h, dw, db = 0.3, 1.5, 0.01, 0.2, -0.1
    got = L.limit_step(m, U, X, h, dw, db, L.limit_noise_scale(1.0))
    assert got == pytest.approx(U + 2 * X * U * dw + np.sqrt(2) * X**3 * db)


def test_cir_step_uses_generic_product():
    p = dict(a=1.0, b=0.01, sigma=0.1)
    m = M.get_model("cir", **p)
    U, X, h, dw, db = 0.3, 1.5, 0.01, 0.2, -0.1
    got = L.limit_step(m, U, X, h, dw, db, L.limit_noise_scale(1.0))
    s = p["sigma"]
    # sigma * sigma' = sigma^2 / 2 for sigma(x) = s sqrt(x)
    assert got == pytest.approx(U - p["b"] * U * h + s * U / (2 * np.sqrt(X)) * dw + np.sqrt(2) / 2 * s**2 / 2 * db)


def test_simulate_limit_starts_at_zero_and_checks_grids():
    W = P.generate(0, P.STREAM_LIMIT_W, 1.0, 64)
    B = P.generate(0, P.STREAM_B, 1.0, 64)
    lt = L.simulate_limit(M.get_model("bounded_sine"), 0.0, W, B)
    assert lt.U[0] == 0.0 and lt.U.shape == (65,)
    with pytest.raises(ValueError):
        L.simulate_limit(M.get_model("bounded_sine"), 0.0, W, P.generate(0, P.STREAM_B, 1.0, 32))


def test_engine_limit_matches_full_api():
    m = M.get_model("abs_drift")
    out = L.limit_samples(m, 0.0, 1.0, 128, 3, 5, checkpoints=(64, 128), chunk=2)
    W = P.generate(5, [P.STREAM_LIMIT_W + i for i in range(3)], 1.0, 128)
    B = P.generate(5, [P.STREAM_B + i for i in range(3)], 1.0, 128)
    lt = L.simulate_limit(m, 0.0, W, B)
    assert np.array_equal(out["U_T"], lt.U[:, -1])
    assert np.array_equal(out["U_ckpt"][:, 0], lt.U[:, 64])
    assert np.array_equal(out["Umax_ckpt"][:, 0], np.abs(lt.U[:, :65]).max(axis=1))


def test_default_checkpoints():
    assert L.default_checkpoints(64) == (16, 32, 48, 64)
    with pytest.raises(ValueError):
        L.default_checkpoints(6)


def test_moment_diagnostics_zero_samples():
    z = np.zeros((50, 4))
    rep = L.moment_diagnostics(z, z, [0.25, 0.5, 0.75, 1.0])
    assert all(c.mean == 0 and c.m2 == 0 and c.m2_max == 0 for c in rep.checkpoints)
    assert rep.max_m2_nondecreasing and rep.m2_below_max_m2


def test_moment_diagnostics_gaussian():
    x = np.random.default_rng(0).standard_normal((10_000, 2))
    rep = L.moment_diagnostics(x, np.abs(x), [0.5, 1.0])
    c = rep.checkpoints[0]
    assert abs(c.m2 - 1.0) < 3 * c.se_m2
    with pytest.raises(ValueError):
        L.moment_diagnostics(x[:, :1], x[:, :1], [1.0])


def test_heavy_tail_flags():
    rng = np.random.default_rng(1)
    heavy = L.heavy_tail(rng.pareto(1.2, 10_000) + 1)
    light = L.heavy_tail(rng.standard_normal(10_000))
    assert heavy.flag and not light.flag
    assert heavy.k == 500 and set(heavy.sensitivity) == {"250", "1000"}
    assert L.heavy_tail(np.r_[rng.standard_normal(1000), np.inf]).nonfinite == 1


def test_sample_error_law_validates_paths():
    with pytest.raises(ValueError):
        L.sample_error_law(M.get_model("gbm"), 1.0, 4, 10, 0)


def test_additive_noise_has_zero_error_and_zero_limit():
    from sde_errlab import engine

    m = M.constant_model(0.5, 1.0)  # Euler is exact and sigma' = 0
    plan = engine.SimulationPlan(m, 0.0, 1.0, 64, 0, ns=(8,), schemes=("euler",), limit=True, checkpoints=(64,))
    out = engine.run(plan, 20)
    assert np.all(out["U_T"] == 0.0)
    assert np.max(np.abs(out["euler:8:terminal"] - out["ref_T"])) < 1e-12


def test_moment_diagnostics_drops_blown_up_paths():
    x = np.random.default_rng(2).standard_normal((100, 2))
    x[3, 1] = np.inf
    x[7, 0] = np.nan
    rep = L.moment_diagnostics(x, np.abs(x), [0.5, 1.0])
    assert rep.dropped == 2 and np.isfinite(rep.checkpoints[1].m2)
