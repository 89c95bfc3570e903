import json
import math

import numpy as np
import pytest

from dyncanon import explicit as ex
from dyncanon import generalham as gh
from dyncanon import verify as vf
from dyncanon.errors import GBDTError
from dyncanon.scenario import scenario_from_dict
from dyncanon.triple import GBDTTriple, SignatureJ, ex1_triple, random_admissible, triple_to_json

from conftest import make_random


# -- Check / Report --------------------------------------------------------

def test_check_pass_semantics():
    assert vf.Check("a", 1.0, 1.0).passed
    assert not vf.Check("a", 1.0 + 1e-9, 1.0).passed
    assert not vf.Check("a", None, 1.0).passed
    assert not vf.Check("a", math.nan, 1.0).passed


def test_report_json_is_deterministic():
    r = vf.Report()
    r.add(vf.Check("a", 0.5, 1.0, "ctx"))
    r.add([vf.Check("b", math.inf, 1.0), vf.Check("c", None, 0.0, "skipped")])
    d = r.to_json()
    assert [c["name"] for c in d] == ["a", "b", "c"]
    assert list(d[0]) == ["name", "residual", "bound", "pass", "context"]
    assert d[1]["residual"] == "inf" and d[2]["residual"] is None
    assert json.dumps(d) == json.dumps(r.to_json())
    assert not r.passed and r["a"].passed


# -- PDE residual ----------------------------------------------------------

def test_pde_residual_zero_field(zero_pi):
    res = vf.pde_residual(lambda xs, ts: ex.field(zero_pi, xs, ts), zero_pi.jd, (0, 1), (0, 1), 0.1)
    assert res.check.passed and res.check.residual == 0.0


def test_pde_residual_ex1_order(ex1):
    res = vf.pde_residual(lambda xs, ts: ex.field(ex1, xs, ts), ex1.jd, (0, 2), (0, 2), 0.02, 2)
    assert 1.7 <= res.orders[0] <= 2.3
    assert res.check.passed


def test_pde_residual_detects_wrong_equation(ex1):
    # flipping j turns the field into a non-solution: the residual stops converging
    res = vf.pde_residual(lambda xs, ts: ex.field(ex1, xs, ts), -ex1.jd, (0, 2), (0, 2), 0.1, 2)
    assert not res.check.passed


def test_pde_residual_errors(ex1):
    make = lambda xs, ts: ex.field(ex1, xs, ts)  # noqa: E731
    with pytest.raises(ValueError):
        vf.pde_residual(make, ex1.jd, (0, 1), (0, 1), 0.1, 1)
    with pytest.raises(GBDTError):
        vf.pde_residual(make, ex1.jd, (0, 1), (0, 1), 0.3)
    with pytest.raises(GBDTError):
        vf.pde_residual(make, ex1.jd, (0, 1), (0, 1), 1.0)


# -- energy and supply -----------------------------------------------------

@pytest.mark.parametrize("a,t", [(2.0, 0.0), (2.0, 1.3), (0.5, 0.4)])
def test_energy_ex1_closed_form(ex1, a, t):
    s = vf.energy(ex1, [1.0], a, t)
    E2 = np.exp(-t) * (1 - 1 / (2 * np.exp(a) - np.exp(-a)))
    assert s.E == pytest.approx(np.sqrt(E2), rel=1e-12)
    assert abs(s.E - s.E_direct) <= 1e-6 * s.E


def test_energy_semiaxis_ex1(ex1):
    kS = ex.kappa_limits(ex1, 30.0, 1e-10).kS
    s = vf.energy(ex1, [1.0], np.inf, 0.5, semiaxis=True, kS=kS)
    assert s.E == pytest.approx(np.exp(-0.25), rel=1e-10)
    assert abs(s.E - s.E_direct) <= 1e-6 * s.E
    with pytest.raises(GBDTError):
        vf.energy(ex1, [1.0], np.inf, 0.5, semiaxis=True)


def test_energy_zero_pi(zero_pi):
    s = vf.energy(zero_pi, [1.0, 2.0], 1.0, 0.3)
    assert s.E == 0.0 and s.E_direct == 0.0


@pytest.mark.parametrize("i", range(5))
def test_energy_random(i):
    model = ex.build_model(make_random(i, seed=7))
    h = np.arange(1, model.n + 1) * (1 + 0.5j)
    s = vf.energy(model, h, 1.5, 0.8)
    assert abs(s.E - s.E_direct) <= 1e-6 * max(s.E, 1e-12)


def test_energy_trajectory_engine(ex1):
    tr = gh.integrate(ex1_triple(), gh.HamiltonianField.identity(2), 2.0, 1e-3)
    s = vf.energy(tr, [1.0], 2.0, 0.5)
    ref = vf.energy(ex1, [1.0], 2.0, 0.5)
    assert s.E == pytest.approx(ref.E, rel=1e-9)
    assert s.E_direct == pytest.approx(ref.E, rel=1e-8)
    with pytest.raises(GBDTError):
        vf.energy(tr, [1.0], 1.0005, 0.5)


def test_energy_indefinite_signals_broken_model(ex1):
    with pytest.raises(GBDTError):
        vf._closed_energy_sq(np.eye(1) * 0.1, np.eye(1), ex1.A, np.ones(1, complex), 0.0)


def test_supply_rate_ex1_origin(ex1):
    # S(0)^-1 Pi(0) j Pi(0)^* S(0)^-1 = 2 - 1
    assert vf.supply_rate(ex1, [1.0], 0.0, 0.0) == pytest.approx(1.0, abs=1e-14)


def test_supply_rate_zero_pi(zero_pi):
    assert vf.supply_rate(zero_pi, [1.0, 1.0], 0.7, 0.2) == 0.0


def test_supply_rate_forms_agree(rand_model):
    h = np.ones(rand_model.n)
    for x, t in ((0.0, 0.0), (1.1, 0.6), (2.4, 1.9)):
        s1, s2 = vf.supply_rate_pair(rand_model, h, x, t)
        assert abs(s1 - s2) <= 1e-10 * max(1.0, abs(s1))


def test_energy_balance_ex1(ex1):
    chk = vf.energy_balance(ex1, [1.0], 2.0, 0.0, 1.0)
    assert chk.passed and chk.residual < 1e-10


def test_energy_balance_n3_m4():
    model = ex.build_model(random_admissible(3, SignatureJ(2, 2), 21))
    chk = vf.energy_balance(model, np.ones(3), 1.5, 0.0, 2.0)
    assert chk.passed


def test_energy_balance_zero_pi(zero_pi):
    chk = vf.energy_balance(zero_pi, [1.0, 0.0], 1.0, 0.0, 1.0)
    assert chk.passed and chk.residual == 0.0
    with pytest.raises(ValueError):
        vf.energy_balance(zero_pi, [1.0, 0.0], 1.0, 1.0, 1.0)


# -- asymptotics -----------------------------------------------------------

def test_decay_suite_ex1(ex1):
    checks = {c.name: c for c in vf.decay_suite(ex1, 30.0)}
    assert all(c.passed for c in checks.values())
    assert "order 2.00" in checks["derivative_q_inv"].context


def test_decay_suite_zero_pi(zero_pi):
    for c in vf.decay_suite(zero_pi, 30.0):
        assert c.passed and c.residual <= 1e-12


def test_decay_suite_detects_short_range(ex1):
    checks = {c.name: c for c in vf.decay_suite(ex1, 3.0)}
    assert not checks["decay_q_side"].passed


def test_eventually_decreasing():
    assert vf._eventually_decreasing([5, 1, 0.5, 0.5, 0.1]) == 0.0
    assert vf._eventually_decreasing([5, 1, 2, 0.1]) > 0.0
    # the first step is exempt
    assert vf._eventually_decreasing([1, 5, 2, 1]) == 0.0


# -- boundary --------------------------------------------------------------

@pytest.mark.parametrize("pred,count", [("upper", 2), ("lower", 2), ("top:1", 1), ("top:3", 3), ("rhp", None)])
def test_invariant_subspace(pred, count):
    A = np.diag([1 + 1j, -1 + 2j, 2 - 1j, -2 - 3j])
    L = vf.invariant_subspace(A, pred)
    if count is not None:
        assert L.shape == (4, count)
    B = np.linalg.pinv(L) @ A @ L
    assert np.allclose(A @ L, L @ B, atol=1e-12)
    assert np.allclose(L.conj().T @ L, np.eye(L.shape[1]))


def test_invariant_subspace_errors():
    A = np.diag([1j, 2j])
    with pytest.raises(GBDTError):
        vf.invariant_subspace(A, "lower")
    with pytest.raises(GBDTError):
        vf.invariant_subspace(A, "nonsense")
    with pytest.raises(GBDTError):
        vf.invariant_subspace(A, "top:3")


def test_boundary_ex1(ex1):
    bd = vf.boundary_design(ex1, 2.0, np.eye(1))
    assert bd.W.shape == (2, 4)
    assert np.allclose(bd.W @ bd.W.conj().T, np.eye(2))
    assert bd.residual <= 1e-10
    assert bd.residuals.size == 20 and bd.ts[-1] == 5.0


def test_boundary_schur_4x4():
    t = random_admissible(4, SignatureJ(1, 1), 9, spectrum="any", method="lyapunov")
    model = ex.build_model(t)
    L = vf.invariant_subspace(t.A, "top:2")
    bd = vf.boundary_design(model, 1.5, L)
    assert bd.residual <= 1e-9
    assert bd.residuals.max() - bd.residuals.min() <= 1e-9


def test_boundary_zero_pi(zero_pi):
    bd = vf.boundary_design(zero_pi, 1.0, np.eye(2))
    assert bd.residual == 0.0 and bd.W.shape == (2, 4)


def test_boundary_rejects_non_invariant(ex1):
    model = ex.build_model(make_random(3))
    with pytest.raises(GBDTError):
        vf.boundary_design(model, 1.0, np.ones((4, 1)))
    with pytest.raises(GBDTError):
        vf.boundary_design(ex1, 1.0, np.eye(3))


def test_boundary_trajectory_engine():
    t = make_random(0)
    tr = gh.integrate(t, gh.parse_hamiltonian("diag:1+0.5*exp(-1*x),2", 2), 1.0, 1e-3)
    bd = vf.boundary_design(tr, 1.0, np.eye(t.n))
    assert bd.residual <= 1e-9


# -- suite -----------------------------------------------------------------

def _scenario(triple, **kw):
    d = {"name": "t", "triple": triple_to_json(triple),
         "grid": {"x0": 0, "x1": 2, "nx": 11, "t0": 0, "t1": 2, "nt": 5}}
    d.update(kw)
    return scenario_from_dict(d)


def test_suite_ex1_all_pass():
    rep = vf.run_suite(_scenario(ex1_triple(), x_max=30.0))
    assert rep.passed, [c for c in rep.checks if not c.passed]
    assert [c.name for c in rep.checks][:3] == ["identity", "identity_propagation", "j_unitarity"]


def test_suite_zero_pi_trivial():
    t = GBDTTriple(np.eye(2), np.eye(2), np.zeros((2, 2)), SignatureJ(1, 1))
    rep = vf.run_suite(_scenario(t))
    assert rep.passed
    assert all(c.residual <= 1e-12 for c in rep.checks if c.name not in ("pde_residual",))


def test_suite_corrupted_triple_skips():
    t = ex1_triple()
    rep = vf.run_suite(_scenario(GBDTTriple(t.A, 2 * t.S0, t.Pi0, t.sig)))
    assert not rep["identity"].passed
    others = rep.checks[1:]
    assert others and all(c.residual is None and c.context.startswith("skipped") for c in others)


def test_suite_bound_override_and_unknown():
    rep = vf.run_suite(_scenario(ex1_triple(), checks=["pde_residual", "nope"], tolerances={"pde_residual": 0}))
    assert not rep["pde_residual"].passed and rep["pde_residual"].bound == 0.0
    assert rep["nope"].context == "unknown check"


def test_suite_captures_errors():
    sc = _scenario(ex1_triple(), engine="general", hamiltonian="identity",
                   grid={"x0": 1, "x1": 2, "nx": 11, "t0": 0, "t1": 1, "nt": 3},
                   checks=["identity", "j_unitarity"])
    rep = vf.run_suite(sc)
    assert rep["identity"].passed
    assert not rep["j_unitarity"].passed and "x0 = 0" in rep["j_unitarity"].context


def test_suite_general_default_list():
    sc = _scenario(ex1_triple(), engine="general", hamiltonian="diag:1,2")
    assert "cross_engine" not in vf.default_checks(sc)
    sc2 = _scenario(ex1_triple(), engine="general", hamiltonian="identity")
    assert "cross_engine" in vf.default_checks(sc2)


def test_suite_explicit_only_check_on_general_engine():
    sc = _scenario(ex1_triple(), engine="general", hamiltonian="identity", checks=["decay"])
    rep = vf.run_suite(sc)
    assert not rep["decay"].passed and "not available" in rep["decay"].context
