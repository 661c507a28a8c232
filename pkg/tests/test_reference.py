import numpy as np
import pytest

from sde_errlab import model as M
from sde_errlab import path as P
from sde_errlab import reference as R


def test_methods():
    assert R.reference_method(M.get_model("gbm")) is R.ReferenceMethod.EXACT_GBM
    assert R.reference_method(M.get_model("ou")) is R.ReferenceMethod.FINE_MILSTEIN
    assert R.reference_method(M.get_model("cir")) is R.ReferenceMethod.FINE_SYMMETRIZED_EULER


def test_exact_gbm_closed_form():
    g = P.generate(0, 0, 1.0, 128)
    ref = R.reference(M.get_model("gbm", mu=0.0, sigma=1.0), 1.0, g)
    t = g.times()
    np.testing.assert_allclose(ref.values, np.exp(g.cumulative() - t / 2), rtol=1e-14)


def test_frozen_model_reference():
    ref = R.reference(M.constant_model(0, 0), 2.0, P.generate(0, 0, 1.0, 16))
    assert np.all(ref.values == 2.0)


@pytest.mark.parametrize("name,x0", [("gbm", 1.0), ("bounded_sine", 0.0), ("cir", 1.0)])
def test_stepper_matches_full_reference(name, x0):
    m = M.get_model(name)
    g = P.generate(7, [0, 1, 2, 3], 1.0, 256)
    full = R.reference(m, x0, g).values
    st = R.ReferenceStepper(m, x0, 4, 1.0, 256)
    parts = [st.advance(blk)[1:] for blk in P.BrownianStream(7, [0, 1, 2, 3], 1.0, 256).blocks(64)]
    got = np.concatenate([np.full((1, 4), x0)] + parts, axis=0).T
    assert np.array_equal(got, full)


def test_refinement_ladder_self_consistency():
    # R=64 vs R=128 terminal gap stays within 10x of the R=64 vs R=256 gap
    m = M.get_model("bounded_sine")
    n = 16
    g = P.generate(3, 0, 1.0, 256 * n)
    term = {r: R.reference(m, 0.0, P.BrownianGrid(1.0, r * n, P.coarsen(g, r * n), 3, 0)).values[-1]
            for r in (64, 128, 256)}
    assert abs(term[64] - term[128]) < 10 * abs(term[64] - term[256]) + 1e-12
