"""Acceptance suite: ten criteria, one PASS/FAIL line each.

Run with pytest (the lines are printed in the terminal summary) or directly:

    python tests/test_acceptance.py
"""
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from dyncanon import explicit as ex  # noqa: E402
from dyncanon import generalham as gh  # noqa: E402
from dyncanon import matcore as mc  # noqa: E402
from dyncanon import verify as vf  # noqa: E402
from dyncanon.triple import SignatureJ, ex1_triple, random_admissible  # noqa: E402

from conftest import RANDOM_SPECS, make_random  # noqa: E402

pytestmark = pytest.mark.acceptance

RESULTS = {}

TITLES = {
    1: "EX1 closed forms, kappa limits and lim w_A",
    2: "PDE residual converges at second order",
    3: "ODE engine matches closed form for H = I",
    4: "parameter identity propagates (both engines)",
    5: "j-unitarity and eigenstructure of j Hcal",
    6: "energy closed form and balance relation",
    7: "transfer matrix identities",
    8: "asymptotics for upper half-plane spectra",
    9: "boundary matrices from invariant subspaces",
    10: "CLI artifacts are byte-identical across runs",
}


def record(k, ok, detail):
    RESULTS[k] = (bool(ok), detail)
    assert ok, detail


def summary_lines():
    out = []
    for k in sorted(TITLES):
        if k in RESULTS:
            ok, detail = RESULTS[k]
            out.append(f"[{'PASS' if ok else 'FAIL'}] criterion {k:2d}: {TITLES[k]} -- {detail}")
        else:
            out.append(f"[----] criterion {k:2d}: {TITLES[k]} -- not run")
    return out


def offreal_models():
    """EX1 plus five random triples with n <= 4, m <= 4 and spectra off the real axis."""
    return [ex1_triple()] + [make_random(i, seed=100) for i in range(len(RANDOM_SPECS))]


def upper_triples():
    return [random_admissible(n, SignatureJ(m1, m2), seed, spectrum="upper", method="lyapunov")
            for n, m1, m2, seed in ((4, 1, 1, 0), (3, 2, 1, 1), (2, 1, 1, 2))]


# -- 1 ---------------------------------------------------------------------

def test_c1_ex1_closed_forms():
    t0 = time.perf_counter()
    m = ex.build_model(ex1_triple())
    errs = []
    for x in np.linspace(0.0, 3.0, 31):
        Q, R = ex.qr_at(m, x)
        errs.append(abs(ex.s_at(m, x)[0, 0] - (2 * np.exp(x) - np.exp(-x))))
        errs.append(abs(Q[0, 0] - (2 - np.exp(-2 * x))))
        errs.append(abs(R[0, 0] - (2 * np.exp(2 * x) - 1)))
    kl = ex.kappa_limits(m, 30.0, 1e-12)
    errs += [abs(kl.kQ[0, 0] - 0.5), abs(kl.kR[0, 0]), abs(kl.kS[0, 0])]
    W = ex.wa_limit(m, kl.kQ, kl.kR)
    errs.append(np.max(np.abs(W - np.diag([-1.0, 1.0]))))
    errs.append(np.max(np.abs(ex.wa_at(m, 30.0, 0) - np.diag([-1.0, 1.0]))))
    dt = time.perf_counter() - t0
    err = max(errs)
    record(1, err <= 1e-10 and dt < 1.0, f"max abs error {err:.2e} (bound 1e-10), {dt:.2f}s (bound 1s)")


# -- 2 ---------------------------------------------------------------------

def test_c2_pde_residual_order():
    t0 = time.perf_counter()
    ratios = []
    for t in offreal_models():
        m = ex.build_model(t)
        res = vf.pde_residual(lambda xs, ts: ex.field(m, xs, ts), m.jd, (0.0, 2.0), (0.0, 2.0), 0.1, 3)
        ratios += [a / b for a, b in zip(res.residuals, res.residuals[1:])]
    dt = time.perf_counter() - t0
    ok = all(3.2 <= r <= 5.0 for r in ratios) and dt < 30.0
    record(2, ok, f"halving ratios in [{min(ratios):.3f}, {max(ratios):.3f}] (window [3.2, 5.0]), {dt:.1f}s")


# -- 3 ---------------------------------------------------------------------

def _cross_engine_errors(t, a=3.0, step=1e-3):
    """Absolute max-norm errors, and the same errors divided by max(1, |reference|)."""
    m = ex.build_model(t)
    tr = gh.integrate(t, gh.HamiltonianField.identity(t.m), a, step)
    assert tr.complete
    err = dict.fromkeys(("Pi", "S", "u", "Y", "Hcal"), 0.0)
    rel = dict(err)

    def put(key, got, ref):
        e = np.max(np.abs(got - ref))
        err[key] = max(err[key], e)
        rel[key] = max(rel[key], e / max(1.0, np.max(np.abs(ref))))

    for k in range(0, len(tr), 30):
        x = tr.xs[k]
        put("Pi", tr.Pi[k], ex.pi_at(m, x))
        put("S", tr.S[k], ex.s_at(m, x))
        put("u", tr.u[k], ex.u_at(m, x))
        put("Hcal", gh.hcal_general(tr, k), ex.hcal_at(m, x))
        for tt in (0.0, 0.7, 2.0):
            put("Y", gh.y_general(tr, k, tt), ex.y_at(m, x, tt))
    return err, rel


def _halving_ratios(t, a=3.0, steps=(0.1, 0.05, 0.025, 0.0125)):
    m = ex.build_model(t)
    ref = (ex.pi_at(m, a), ex.s_at(m, a), ex.u_at(m, a))
    errs = []
    for h in steps:
        tr = gh.integrate(t, gh.HamiltonianField.identity(t.m), a, h)
        errs.append(max(np.max(np.abs(x[-1] - r)) for x, r in zip((tr.Pi, tr.S, tr.u), ref)))
    return [p / q for p, q in zip(errs, errs[1:])]


def test_c3_cross_engine():
    worst, worst_rel, where, ratios = 0.0, 0.0, "", []
    for i, t in enumerate(offreal_models()):
        err, rel = _cross_engine_errors(t)
        key = max(err, key=err.get)
        if err[key] > worst:
            worst, where = err[key], f"model {i} {key}"
        worst_rel = max(worst_rel, max(rel.values()))
        ratios += _halving_ratios(t)
    ok = worst <= 1e-8 and all(12.0 <= r <= 20.0 for r in ratios)
    record(3, ok, f"max abs error {worst:.2e} at {where} (bound 1e-8), size-scaled {worst_rel:.1e}, "
                  f"step-halving ratios in [{min(ratios):.2f}, {max(ratios):.2f}] (window [12, 20])")


# -- 4 ---------------------------------------------------------------------

def test_c4_identity_propagation():
    worst = 0.0
    for t in offreal_models():
        m = ex.build_model(t)
        for x in np.linspace(0.0, 3.0, 100):
            r, s = ex.identity_residual_at(m, x)
            worst = max(worst, r / s)
        tr = gh.integrate(t, gh.parse_hamiltonian("diag:" + ",".join(["1+0.5*exp(-1*x)"] * t.m), t.m), 3.0, 1e-3)
        r, s = gh.identity_residuals(tr)
        idx = np.linspace(0, len(tr) - 1, 100).round().astype(int)
        worst = max(worst, float(np.max(r[idx] / s[idx])))
    record(4, worst <= 1e-9, f"max relative residual {worst:.2e} (bound 1e-9), 100 x per model and engine")


# -- 5 ---------------------------------------------------------------------

def test_c5_j_unitarity_eigenstructure():
    uerr, everr, zerr = 0.0, 0.0, 0.0
    for t in offreal_models():
        m = ex.build_model(t)
        J = np.diag(m.jd)
        target = np.r_[-np.ones(m.sig.m2), np.ones(m.sig.m1)]
        for x in np.linspace(0.0, 3.0, 16):
            u = ex.u_at(m, x)
            uerr = max(uerr, mc.fro(u.conj().T @ J @ u - J))
            jH = m.jd[:, None] * ex.hcal_at(m, x)
            ev = np.linalg.eigvals(jH)
            everr = max(everr, np.max(np.abs(ev[np.argsort(ev.real)] - target)))
            Zp, Zm = ex.eigenspaces(m, x)
            for Z, s in ((Zp, 1.0), (Zm, -1.0)):
                zerr = max(zerr, float(np.max(np.linalg.norm(jH @ Z - s * Z, axis=0) / np.linalg.norm(Z, axis=0))))
    ok = uerr <= 1e-10 and everr <= 1e-9 and zerr <= 1e-9
    record(5, ok, f"||u*ju - j|| {uerr:.1e} (1e-10), eigenvalues {everr:.1e} (1e-9), Z columns {zerr:.1e} (1e-9)")


# -- 6 ---------------------------------------------------------------------

def test_c6_energy():
    e_worst, b_worst = 0.0, 0.0
    for t in offreal_models():
        m = ex.build_model(t)
        h = np.linspace(1.0, 2.0, m.n) + 0.5j
        for a, tt in ((2.0, 0.0), (2.0, 1.0), (1.0, 2.5)):
            s = vf.energy(m, h, a, tt)
            e_worst = max(e_worst, abs(s.E - s.E_direct) / max(s.E, 1e-12))
        b_worst = max(b_worst, vf.energy_balance(m, h, 2.0, 0.0, 1.0).residual)
    ok = e_worst <= 1e-6 and b_worst <= 1e-6
    record(6, ok, f"energy rel. deviation {e_worst:.1e}, balance rel. deviation {b_worst:.1e} (bounds 1e-6)")


# -- 7 ---------------------------------------------------------------------

def test_c7_transfer_matrix():
    rng = np.random.default_rng(2024)
    inv_err, fac_err, orders = 0.0, 0.0, []
    from dyncanon.generalham import q0_tilde

    for t in offreal_models():
        m = ex.build_model(t)
        jd = m.jd
        r = max(1.0, float(np.max(np.abs(np.linalg.eigvals(t.A)))))
        count = 0
        while count < 50:
            x = rng.uniform(0.0, 3.0)
            lam = complex(*rng.uniform(-2 * r, 2 * r, 2))
            if np.min(np.abs(np.linalg.eigvals(t.A) - lam)) < 1e-2:
                continue
            w = ex.wa_at(m, x, lam)
            wb = ex.wa_at(m, x, np.conj(lam))
            inv_err = max(inv_err, mc.fro(w @ (jd[:, None] * wb.conj().T * jd[None, :]) - np.eye(m.m)))
            count += 1
        w00 = np.linalg.inv(ex.wa_at(m, 0.0, 0))
        for x in np.linspace(0.0, 3.0, 10):
            fac_err = max(fac_err, mc.fro(ex.u_at(m, x) - ex.wa_at(m, x, 0) @ w00))
        x, lam = 1.3, 0.7 + 0.4j
        q0 = q0_tilde(ex.pi_at(m, x), ex.s_at(m, x), np.eye(m.m), m.sig)
        w = ex.wa_at(m, x, lam)
        rhs = (1j * lam * np.diag(jd) - q0) @ w - 1j * lam * (w * jd[None, :])
        errs = [mc.fro((ex.wa_at(m, x + h, lam) - ex.wa_at(m, x - h, lam)) / (2 * h) - rhs) for h in (0.02, 0.01)]
        orders.append(np.log2(errs[0] / errs[1]))
    ok = inv_err <= 1e-9 and fac_err <= 1e-10 and all(abs(o - 2) <= vf.ORDER_BOUND for o in orders)
    record(7, ok, f"w jw*j - I {inv_err:.1e} (1e-9), u factorization {fac_err:.1e} (1e-10), "
                  f"fd orders in [{min(orders):.3f}, {max(orders):.3f}]")


# -- 8 ---------------------------------------------------------------------

def test_c8_asymptotics():
    cases = [(ex1_triple(), 30.0)] + [(t, 30.0) for t in upper_triples()]
    final, inc, ydev = 0.0, 0.0, 0.0
    for t, x_max in cases:
        m = ex.build_model(t)
        kl = ex.kappa_limits(m, 2 * x_max, 1e-8)
        lim = ex.wa_limit(m, kl.kQ, kl.kR)
        xs, d = vf.wa_limit_path(m, x_max, lim)
        final = max(final, float(d[-1]))
        inc = max(inc, vf._eventually_decreasing(d, floor=vf.noise_floor(m, xs)))
        for tt in (0.0, 1.0):
            Y = ex.y_at(m, xs[-1], tt)
            Ya = ex.y_asymptotic(m, xs[-1], tt, kl.kQ, kl.kR)
            ydev = max(ydev, mc.fro(Y - Ya) / mc.fro(Y))
    ok = final <= 1e-6 and inc == 0.0 and ydev <= 1e-3
    record(8, ok, f"final ||w_A - limit|| {final:.1e} (1e-6), monotone {'yes' if inc == 0 else 'no'}, "
                  f"Y deviation {ydev:.1e} (1e-3)")


# -- 9 ---------------------------------------------------------------------

def test_c9_boundary():
    m1 = ex.build_model(ex1_triple())
    bd1 = vf.boundary_design(m1, 2.0, np.eye(1))
    t = random_admissible(4, SignatureJ(1, 1), 9, spectrum="any", method="lyapunov")
    L = vf.invariant_subspace(t.A, "top:2")
    bd2 = vf.boundary_design(ex.build_model(t), 2.0, L)
    spread = max(float(b.residuals.max() - b.residuals.min()) for b in (bd1, bd2))
    ok = bd1.W.shape == (2, 4) and bd1.residual <= 1e-9 and bd2.residual <= 1e-9 and spread <= 1e-9
    record(9, ok, f"EX1 {bd1.residual:.1e}, 4x4 Schur k=2 {bd2.residual:.1e} (1e-9), t-spread {spread:.1e}")


# -- 10 --------------------------------------------------------------------

def _cli(args, cwd, env):
    return subprocess.run([sys.executable, "-m", "dyncanon", *args], cwd=cwd, env=env,
                          capture_output=True, check=False)


def test_c10_determinism(tmp_path):
    import shutil

    scen = tmp_path / "scenarios"
    shutil.copytree(HERE.parent / "scenarios", scen, ignore=shutil.ignore_patterns("out"))
    env = dict(os.environ, GBDT_SEED="4242")
    runs = []
    for _ in range(2):
        gen = _cli(["triple", "generate", "--n", "3", "--m1", "2", "--m2", "1"], tmp_path, env)
        solve = _cli(["solve", "scenarios/random_offreal.json", "--kappa"], tmp_path, env)
        check = _cli(["check", "scenarios/ex1.json", "-q"], tmp_path, env)
        solve_g = _cli(["solve", "scenarios/general_diag.json"], tmp_path, env)
        files = {p.name: p.read_bytes() for p in sorted((scen / "out").iterdir())}
        runs.append((gen.stdout, solve.returncode, check.returncode, solve_g.returncode, files))
    a, b = runs
    codes_ok = all(c == 0 for c in a[1:4] + b[1:4])
    ok = codes_ok and a[0] == b[0] and a[4] == b[4] and len(a[4]) == 5
    record(10, ok, f"{len(a[4]) + 1} artifacts compared, identical={a[0] == b[0] and a[4] == b[4]}, "
                   f"exit codes ok={codes_ok}")


if __name__ == "__main__":
    import tempfile

    for k, fn in enumerate([test_c1_ex1_closed_forms, test_c2_pde_residual_order, test_c3_cross_engine,
                            test_c4_identity_propagation, test_c5_j_unitarity_eigenstructure, test_c6_energy,
                            test_c7_transfer_matrix, test_c8_asymptotics, test_c9_boundary], start=1):
        try:
            fn()
        except AssertionError:
            pass
        except Exception as e:  # noqa: BLE001
            RESULTS[k] = (False, f"error: {type(e).__name__}: {e}")
    with tempfile.TemporaryDirectory() as d:
        try:
            test_c10_determinism(Path(d))
        except AssertionError:
            pass
    print("\n".join(summary_lines()))
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) and len(RESULTS) == 10 else 1)
