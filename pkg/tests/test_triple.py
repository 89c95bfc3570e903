import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dyncanon import matcore as mc
from dyncanon.errors import GBDTError, NotPositiveDefiniteError, RetryBudgetExceeded, ShapeError
from dyncanon.triple import (
    GBDTTriple,
    SignatureJ,
    complete_S0,
    ex1_triple,
    identity_residual,
    random_admissible,
    triple_from_json,
    triple_to_json,
    verify_identity,
)


def test_signature():
    s = SignatureJ(2, 1)
    assert s.m == 3
    assert np.array_equal(s.diag, [1, 1, -1])
    J = s.matrix
    assert np.allclose(J @ J, np.eye(3)) and np.allclose(J, J.conj().T)
    with pytest.raises(ShapeError):
        SignatureJ(0, 0)


def test_triple_shapes_checked():
    with pytest.raises(ShapeError):
        GBDTTriple(np.eye(2), np.eye(3), np.zeros((2, 2)), SignatureJ(1, 1))
    with pytest.raises(ShapeError):
        GBDTTriple(np.eye(2), np.eye(2), np.zeros((2, 3)), SignatureJ(1, 1))


def test_triple_is_immutable():
    t = ex1_triple()
    with pytest.raises(ValueError):
        t.A[0, 0] = 1.0


def test_ex1_identity_holds_exactly():
    # (i/2)(1) - (1)(-i/2) = i  and  i Pi0 j Pi0^* = i (2 - 1) = i
    chk = verify_identity(ex1_triple())
    assert chk.ok and chk.residual < 1e-15


def test_broken_triple_fails():
    t = ex1_triple()
    bad = GBDTTriple(t.A, 2 * t.S0, t.Pi0, t.sig)
    chk = verify_identity(bad)
    assert not chk.ok
    assert chk.residual == pytest.approx(1.0)


def test_zero_pi_identity_needs_commuting_real_part():
    # Pi0 = 0 forces A S0 = S0 A^*; A = I works, A = iI does not
    t = GBDTTriple(np.eye(2), np.eye(2), np.zeros((2, 2)), SignatureJ(1, 1))
    assert verify_identity(t).ok
    t2 = GBDTTriple(1j * np.eye(2), np.eye(2), np.zeros((2, 2)), SignatureJ(1, 1))
    assert not verify_identity(t2).ok


def test_complete_S0_recovers_ex1():
    t = ex1_triple()
    c = complete_S0(t.A, t.Pi0, t.sig)
    assert np.allclose(c.S0, [[1.0]], atol=1e-14)
    assert verify_identity(c).residual <= mc.sylvester_residual_bound(c.A, c.A.conj().T, c.S0)


def test_complete_S0_indefinite():
    # i/2 with Pi0 = (1, sqrt 2): S0 = 1 - 2 = -1
    with pytest.raises(NotPositiveDefiniteError):
        complete_S0([[0.5j]], [[1.0, np.sqrt(2.0)]], SignatureJ(1, 1))


def test_complete_S0_real_spectrum_rejected():
    with pytest.raises(GBDTError):
        complete_S0(np.eye(1), np.ones((1, 2)), SignatureJ(1, 1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63 - 1), st.sampled_from([(1, 1, 1), (2, 1, 1), (3, 2, 2), (2, 2, 1), (3, 1, 2)]))
def test_random_admissible_valid(seed, shape):
    n, m1, m2 = shape
    t = random_admissible(n, SignatureJ(m1, m2), seed)
    chk = verify_identity(t)
    assert chk.ok
    assert mc.posdef_check(t.S0).is_pd
    lam = np.linalg.eigvals(t.A)
    assert np.all(np.abs(lam.imag) > 0.1)


@pytest.mark.parametrize("spectrum", ["upper", "lower"])
def test_random_spectrum_classes(spectrum):
    t = random_admissible(4, SignatureJ(1, 1), 2, spectrum=spectrum, method="lyapunov")
    lam = np.linalg.eigvals(t.A)
    assert np.all(lam.imag > 0) if spectrum == "upper" else np.all(lam.imag < 0)
    assert verify_identity(t).ok and mc.posdef_check(t.S0).is_pd


def test_random_scalar_residual():
    t = random_admissible(1, SignatureJ(1, 1), 12345)
    assert identity_residual(t.A, t.S0, t.Pi0, t.sig.diag) <= 1e-12


def test_random_deterministic():
    a = random_admissible(3, SignatureJ(2, 1), 7)
    b = random_admissible(3, SignatureJ(2, 1), 7)
    assert json.dumps(triple_to_json(a)) == json.dumps(triple_to_json(b))


def test_random_budget_exceeded():
    # an upper-half-plane spectrum makes -i(AS0 - S0A^*) definite, which needs m1 >= n
    with pytest.raises(RetryBudgetExceeded):
        random_admissible(3, SignatureJ(1, 1), 0, spectrum="upper", method="inertia")


def test_json_roundtrip():
    t = random_admissible(2, SignatureJ(1, 1), 3)
    d = triple_to_json(t)
    assert set(d) == {"n", "m1", "m2", "A", "S0", "Pi0"}
    back = triple_from_json(json.dumps(d))
    for k in ("A", "S0", "Pi0"):
        assert np.array_equal(getattr(back, k), getattr(t, k))


def test_json_errors():
    d = triple_to_json(ex1_triple())
    bad = dict(d, n=2)
    with pytest.raises(ShapeError):
        triple_from_json(bad)
    del d["S0"]
    with pytest.raises(GBDTError):
        triple_from_json(d)
