import numpy as np
import pytest

from sde_errlab import engine
from sde_errlab import erroranalysis as E
from sde_errlab import model as M
from sde_errlab import path as P
from sde_errlab import reference as R
from sde_errlab import scheme as S


def full_api(model, x0, n_fine, ns, schemes, seed, paths):
    g = P.generate(seed, np.arange(paths), 1.0, n_fine)
    ref = R.reference(model, x0, g)
    out = {"ref_T": ref.values[:, -1]}
    for sch in schemes:
        for n in ns:
            es = E.error_sample(S.simulate(model, x0, n, g, sch), ref, g)
            out[f"{sch}:{n}:sup"] = es.sup_error
            out[f"{sch}:{n}:terminal"] = S.simulate(model, x0, n, g, sch).values[:, -1]
    return out, g


@pytest.mark.parametrize("name,x0,schemes", [
    ("gbm", 1.0, ("euler", "milstein")),
    ("abs_drift", 0.0, ("euler", "milstein", "symmetrized_euler")),
    ("cir", 1.0, ("symmetrized_euler",)),
])
def test_engine_bit_identical_to_full_api(name, x0, schemes):
    m = M.get_model(name)
    ns = (4, 16, 64)
    if name == "abs_drift":
        x0 = 0.5  # symmetrized Euler needs a positive start
    plan = engine.SimulationPlan(m, x0, 1.0, 256, 3, ns=ns, schemes=schemes, track_sup=True, track_z=True, block=64)
    got = engine.run(plan, 5, chunk=2)
    want, g = full_api(m, x0, 256, ns, schemes, 3, 5)
    for k, v in want.items():
        assert np.array_equal(got[k], v), k
    for n in ns:
        z = E.z_functionals(g, n)
        np.testing.assert_allclose(got[f"z22:{n}"], z.z22, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(got[f"z12:{n}"], z.z12, rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(got[f"z21:{n}"], z.z21, rtol=1e-12, atol=1e-15)


def test_chunking_and_workers_do_not_change_bits():
    m = M.get_model("bounded_sine")
    plan = engine.SimulationPlan(m, 0.0, 1.0, 512, 11, ns=(8, 32), schemes=("euler", "milstein"), track_sup=True,
                                 limit=True, checkpoints=(256, 512))
    a = engine.run(plan, 12, chunk=12)
    b = engine.run(plan, 12, chunk=5)
    c = engine.run(plan, 12, chunk=3, workers=3)
    for k in a:
        assert np.array_equal(a[k], b[k]) and np.array_equal(a[k], c[k]), k


def test_first_index_offsets_paths():
    m = M.get_model("ou")
    plan = engine.SimulationPlan(m, 0.0, 1.0, 64, 2, ns=(8,), schemes=("euler",))
    whole = engine.run(plan, 6)
    tail = engine.run(plan, 3, first_index=3)
    assert np.array_equal(whole["euler:8:terminal"][3:], tail["euler:8:terminal"])


def test_aux_reference_matches_coarse_grid():
    m = M.get_model("bounded_sine")
    plan = engine.SimulationPlan(m, 0.0, 1.0, 256, 4, aux_ref_factor=2)
    out = engine.run(plan, 3)
    g = P.generate(4, np.arange(3), 1.0, 256)
    coarse = P.BrownianGrid(1.0, 128, P.coarsen(g, 128), 4, 0)
    assert np.array_equal(out["ref_coarse_T"], R.reference(m, 0.0, coarse).values[:, -1])


def test_plan_validation():
    m = M.get_model("gbm")
    with pytest.raises(ValueError):
        engine.SimulationPlan(m, 1.0, 1.0, 100, 0, ns=(3,))
    with pytest.raises(ValueError):
        engine.SimulationPlan(m, 1.0, 1.0, 64, 0, checkpoints=(65,))
    with pytest.raises(ValueError):
        engine.SimulationPlan(M.get_model("cir"), 0.0, 1.0, 64, 0, ns=(4,), schemes=("symmetrized_euler",))
    with pytest.raises(ValueError):
        engine.run(engine.SimulationPlan(m, 1.0, 1.0, 64, 0), 0)


def test_domain_error_propagates():
    plan = engine.SimulationPlan(M.get_model("cir", sigma=2.0), 0.05, 1.0, 64, 0, ns=(4,), schemes=("euler",))
    with pytest.raises(S.DomainError):
        engine.run(plan, 200)


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv(engine.WORKERS_ENV, "3")
    assert engine.resolve_workers(None) == 3
    assert engine.resolve_workers(2) == 2
    monkeypatch.delenv(engine.WORKERS_ENV)
    assert engine.resolve_workers(None) >= 1
