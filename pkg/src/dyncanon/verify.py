"""Verification harness: PDE residuals, energy and supply-rate accounting,
asymptotic decay, boundary-matrix design, and the aggregate suite runner.

Every check is reduced to a :class:`Check` whose ``passed`` flag is exactly
``residual <= bound``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field as dc_field
from typing import Callable, NamedTuple

import numpy as np
import scipy.integrate as si
import scipy.linalg as sla

from . import explicit as ex
from . import matcore as mc
from .errors import GBDTError
from .generalham import Trajectory, hy_general, hcal_general, y_general

__all__ = [
    "Check",
    "Report",
    "PDEResidual",
    "pde_residual",
    "EnergySample",
    "energy",
    "supply_rate",
    "supply_rate_pair",
    "energy_balance",
    "decay_suite",
    "wa_limit_path",
    "noise_floor",
    "BoundaryDesign",
    "invariant_subspace",
    "boundary_design",
    "ORDER_BOUND",
    "DEFAULT_BOUNDS",
    "default_checks",
    "subspace_basis",
    "run_suite",
]

# |order - 2| <= log2(5/4) is the same window as ratio in [3.2, 5.0]
ORDER_BOUND = math.log2(5.0 / 4.0)
ABS_FLOOR = 1e-12


@dataclass
class Check:
    name: str
    residual: float | None
    bound: float
    passed: bool = dc_field(init=False)
    context: str = ""

    def __post_init__(self):
        if self.residual is not None:
            self.residual = float(self.residual)
        self.bound = float(self.bound)
        r = self.residual
        self.passed = bool(r is not None and not math.isnan(r) and r <= self.bound)

    def to_json(self) -> dict:
        d = asdict(self)
        d = {"name": d["name"], "residual": d["residual"], "bound": d["bound"],
             "pass": d["passed"], "context": d["context"]}
        for k in ("residual", "bound"):
            v = d[k]
            if v is not None and not math.isfinite(v):
                d[k] = "inf" if v > 0 else "-inf"
        return d


@dataclass
class Report:
    checks: list = dc_field(default_factory=list)

    def add(self, chk) -> None:
        if isinstance(chk, Check):
            self.checks.append(chk)
        else:
            self.checks.extend(chk)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> list:
        return [c.to_json() for c in self.checks]


# -- PDE residual ----------------------------------------------------------

class PDEResidual(NamedTuple):
    steps: list
    residuals: list
    orders: list
    check: Check


def _grid(lo, hi, h):
    n = int(round((hi - lo) / h))
    if n < 2 or abs(n * h - (hi - lo)) > 1e-9 * max(1.0, abs(hi - lo)):
        raise GBDTError(f"step {h:g} does not divide [{lo:g}, {hi:g}] into >= 2 intervals")
    return lo + h * np.arange(n + 1)


def _max_residual(f, jd, stride):
    """Max over probe nodes of ||dY/dt - j d(Hcal Y)/dx|| by central differences."""
    h_x = f.xs[1] - f.xs[0]
    h_t = f.ts[1] - f.ts[0]
    HY = f.HY
    ix = np.arange(stride, f.xs.size - 1, stride)
    it = np.arange(stride, f.ts.size - 1, stride)
    dYt = (f.Y[ix][:, it + 1] - f.Y[ix][:, it - 1]) / (2 * h_t)
    dHYx = (HY[ix + 1][:, it] - HY[ix - 1][:, it]) / (2 * h_x)
    R = dYt - jd[None, None, :, None] * dHYx
    return float(np.max(np.linalg.norm(R, axis=(2, 3))))


def pde_residual(make_field: Callable, jd, x_range, t_range, h, refinements=2,
                 name="pde_residual", bound=ORDER_BOUND) -> PDEResidual:
    """Central-difference residual of ``Y_t = j (Hcal Y)_x`` under refinement.

    ``make_field(xs, ts)`` must return a SolutionField on the given uniform
    grids.  The probe nodes are the interior nodes of the coarsest grid, so
    every refinement measures the truncation error at the same points.  The
    check residual is ``max |order - 2|`` over successive refinements.
    """
    if refinements < 2:
        raise ValueError("need at least two refinements")
    jd = np.asarray(jd, dtype=float)
    steps, res = [], []
    for r in range(refinements):
        hr = h / 2**r
        f = make_field(_grid(*x_range, hr), _grid(*t_range, hr))
        if f.xs.size < 3 or f.ts.size < 3:
            raise GBDTError("grid too coarse for central differences")
        steps.append(hr)
        res.append(_max_residual(f, jd, 2**r))
    if max(res) <= ABS_FLOOR:
        return PDEResidual(steps, res, [], Check(name, max(res), ABS_FLOOR, "field residual at roundoff level"))
    orders = [math.log2(a / b) if b > 0 else math.inf for a, b in zip(res, res[1:])]
    dev = max(abs(o - 2.0) for o in orders)
    ctx = "residuals " + ", ".join(f"{v:.3e}" for v in res) + "; orders " + ", ".join(f"{o:.3f}" for o in orders)
    return PDEResidual(steps, res, orders, Check(name, dev, bound, ctx))


# -- energy and supply rate ------------------------------------------------

class EnergySample(NamedTuple):
    t: float
    a: float
    h: np.ndarray
    E: float
    E_direct: float


def _closed_energy_sq(S0inv, Sainv, A, h, t) -> float:
    M = mc.hermitian_part(S0inv - Sainv)
    ev = np.linalg.eigvalsh(M)
    if ev[0] < -1e-10 * max(mc.fro(M), mc.fro(S0inv)):
        raise GBDTError(f"S(0)^-1 - S(a)^-1 is indefinite (min eigenvalue {ev[0]:.3e})")
    v = mc.mat_exp(1j * t * A) @ h
    return float(np.real(v.conj() @ M @ v))


def _node(tr: Trajectory, x) -> int:
    k = int(round(x / tr.step))
    if k >= len(tr) or abs(tr.xs[k] - x) > 1e-9 * max(1.0, x):
        raise GBDTError(f"x={x:g} is not a trajectory node")
    return k


def energy(engine, h, a, t, semiaxis=False, kS=None, quad_tol=1e-12) -> EnergySample:
    """Interval energy of the solution branch ``Y h``, closed form and direct.

    The closed form uses ``S(0)^{-1} - S(a)^{-1}`` (or ``S(0)^{-1} - kS`` on the
    semiaxis).  The direct value integrates ``(Yh)^* Hcal (Yh)`` over x: by
    adaptive quadrature for an explicit model, by composite Simpson over the
    nodes for a trajectory.
    """
    h = np.asarray(h, dtype=complex).reshape(-1)
    if isinstance(engine, Trajectory):
        tr = engine
        A = tr.triple.A
        S0inv = mc.HermitianFactor(tr.S[0], "S0").inverse()
        if semiaxis:
            raise GBDTError("semiaxis energy needs the explicit engine")
        k = _node(tr, a)
        Sainv = mc.HermitianFactor(tr.S[k], "S(a)").inverse()
        vals = []
        for i in range(k + 1):
            yh = y_general(tr, i, t) @ h
            vals.append(np.real(yh.conj() @ hcal_general(tr, i) @ yh))
        direct = float(si.simpson(vals, x=tr.xs[: k + 1]))
    else:
        model = engine
        A = model.A
        S0inv = mc.HermitianFactor(model.triple.S0, "S0").inverse()
        if semiaxis:
            if kS is None:
                raise GBDTError("semiaxis energy requires kS")
            Sainv = np.asarray(kS, dtype=complex)
        else:
            Sainv = ex._frame(model, a).conj_inv(0)

        def integrand(x):
            Y, Hc, _ = ex.y_hcal_at(model, x, t)
            yh = Y @ h
            return float(np.real(yh.conj() @ Hc @ yh))

        upper = np.inf if semiaxis else a
        direct, _ = si.quad(integrand, 0.0, upper, epsabs=quad_tol, epsrel=1e-11, limit=400)
    E2 = _closed_energy_sq(S0inv, Sainv, A, h, t)
    return EnergySample(float(t), float(a), h, math.sqrt(max(E2, 0.0)), math.sqrt(max(direct, 0.0)))


def supply_rate_pair(model, h, x, t) -> tuple:
    """The supply rate at (x, t) by its two defining expressions.

    Returns ``(s_closed, s_defining)`` where ``s_closed = v^* j v`` with
    ``v = Pi^* S^{-1} e^{itA} h`` and ``s_defining`` is evaluated from Y and u
    as ``(Yh)^* u^{-1} H^{-1} j H^{-1} u^{-*} (Yh)`` with H = I.
    """
    h = np.asarray(h, dtype=complex).reshape(-1)
    jd = model.jd
    v = ex.pis_exp_at(model, x, t) @ h
    s1 = v.conj() @ (jd * v)
    Y, _, u = ex.y_hcal_at(model, x, t)
    w = np.linalg.solve(u.conj().T, Y @ h)
    s2 = w.conj() @ (jd * w)
    scale = max(np.vdot(v, v).real, 1e-300)
    for s in (s1, s2):
        if abs(s.imag) > 1e-12 * max(scale, 1.0):
            raise GBDTError(f"supply rate has imaginary part {s.imag:.3e}")
    return float(s1.real), float(s2.real)


def supply_rate(model, h, x, t) -> float:
    return supply_rate_pair(model, h, x, t)[0]


def energy_balance(model, h, a, t1, t2, quad_tol=1e-10, name="energy_balance") -> Check:
    """``E(t2)^2 - E(t1)^2`` against the time integral of ``s(a) - s(0)``."""
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    h = np.asarray(h, dtype=complex).reshape(-1)
    jd = model.jd
    A = model.A
    S0inv = mc.HermitianFactor(model.triple.S0, "S0").inverse()
    Sainv = ex._frame(model, a).conj_inv(0)
    lhs = _closed_energy_sq(S0inv, Sainv, A, h, t2) - _closed_energy_sq(S0inv, Sainv, A, h, t1)
    # s(x, t) = (G_x e^{itA} h)^* j (G_x e^{itA} h) with G_x = Pi^* S^{-1} at x
    G_a = ex.pis_at(model, a)
    G_0 = ex.pis_at(model, 0.0)

    def ds(t):
        e = mc.mat_exp(1j * t * A) @ h
        va, v0 = G_a @ e, G_0 @ e
        return float(np.real(va.conj() @ (jd * va) - v0.conj() @ (jd * v0)))

    rhs, err = si.quad(ds, t1, t2, epsabs=1e-14, epsrel=quad_tol, limit=400)
    denom = max(abs(lhs), abs(rhs), ABS_FLOOR)
    rel = abs(lhs - rhs) / denom
    ctx = f"lhs={lhs:.12e} rhs={rhs:.12e} quad_err={err:.1e}"
    return Check(name, rel, max(quad_tol, 1e-6), ctx)


# -- asymptotics -----------------------------------------------------------

def _eventually_decreasing(vals, rel=1e-6, floor=1e-12) -> float:
    """Largest increase ``v[k+1] - v[k](1+rel) - floor`` over k >= 1 (<= 0 if decreasing)."""
    v = np.asarray(vals)
    inc = v[2:] - v[1:-1] * (1 + rel) - floor
    return float(max(inc.max(initial=-np.inf), 0.0))


def noise_floor(model, xs) -> float:
    """Roundoff level of quantities built from ``S^{-1}`` along ``xs``:
    ``16 eps max cond(S_frame) (1 + ||Pi0||^2)``, at least 1e-12."""
    cond = max(ex._frame(model, x).factor.cond for x in xs)
    return max(ABS_FLOOR, 16 * mc.EPS * cond * (1.0 + mc.fro(model.triple.Pi0) ** 2))


def wa_limit_path(model, x_max, limit) -> tuple:
    """Schedule xs and ``||w_A(x, 0) - limit||`` along it."""
    xs = ex.kappa_schedule(x_max)
    return xs, np.array([mc.fro(ex.wa_at(model, x, 0) - limit) for x in xs])


def _fd_order(f, df, x, h):
    errs = []
    for hh in (h, h / 2):
        fd = (f(x + hh) - f(x - hh)) / (2 * hh)
        errs.append(mc.fro(fd - df(x)))
    return errs


def decay_suite(model, x_max, bound=1e-6, fd_x=1.0, fd_h=1e-2) -> list:
    """Decay of the off-diagonal blocks of ``w_A(x, 0)`` and the
    derivative identities for ``Q^{-1}`` and ``R^{-1}``."""
    xs = ex.kappa_schedule(x_max)
    vals = np.array([ex.offdiag_decay(model, x) for x in xs])
    noise = noise_floor(model, xs)
    out = []
    for i, label in enumerate(("q_side", "r_side")):
        v = vals[:, i]
        out.append(Check(f"decay_{label}", float(v[-1]), bound,
                         f"x_max={x_max:g}; values at x=x_max/2, x_max: {v[1]:.3e}, {v[-1]:.3e}"))
        out.append(Check(f"decay_{label}_monotone", _eventually_decreasing(v, floor=noise), 0.0,
                         f"eventual decrease along x_k = x_max (1 - 2^-k), noise floor {noise:.1e}"))
    for label, inv, deriv in (
        ("q_inv", lambda x: ex._frame(model, x).conj_inv(1), ex.q_inv_derivative),
        ("r_inv", lambda x: ex._frame(model, x).conj_inv(-1), ex.r_inv_derivative),
    ):
        e1, e2 = _fd_order(inv, lambda x, d=deriv: d(model, x), fd_x, fd_h)
        if max(e1, e2) <= 1e-11:
            out.append(Check(f"derivative_{label}", max(e1, e2), 1e-11, "derivative vanishes identically"))
        else:
            order = math.log2(e1 / e2) if e2 > 0 else math.inf
            out.append(Check(f"derivative_{label}", abs(order - 2.0), ORDER_BOUND,
                             f"fd errors {e1:.3e}, {e2:.3e}; order {order:.3f}"))
    return out


# -- boundary design -------------------------------------------------------

class BoundaryDesign(NamedTuple):
    W: np.ndarray
    residual: float
    residuals: np.ndarray
    ts: np.ndarray
    M: np.ndarray


def invariant_subspace(A, predicate) -> np.ndarray:
    """Orthonormal basis of an A-invariant subspace from an ordered Schur form.

    ``predicate`` is a callable on eigenvalues, one of the names ``upper``,
    ``lower``, ``lhp``, ``rhp``, ``iuc``, ``ouc``, or ``top:k`` (the k
    eigenvalues of largest imaginary part).
    """
    A = mc.as_cmatrix(A, "A", square=True)
    if isinstance(predicate, str):
        named = {
            "upper": lambda z: z.imag > 0,
            "lower": lambda z: z.imag < 0,
            "lhp": lambda z: z.real < 0,
            "rhp": lambda z: z.real > 0,
            "iuc": lambda z: abs(z) < 1,
            "ouc": lambda z: abs(z) > 1,
        }
        if predicate.startswith("top:"):
            k = int(predicate[4:])
            if not 0 < k <= A.shape[0]:
                raise GBDTError(f"top:{k} out of range for n={A.shape[0]}")
            lam = np.sort(np.linalg.eigvals(A).imag)[::-1]
            cut = lam[k - 1] if k == A.shape[0] else 0.5 * (lam[k - 1] + lam[k])
            pred = (lambda z: z.imag >= cut) if k == A.shape[0] else (lambda z: z.imag > cut)
        elif predicate in named:
            pred = named[predicate]
        else:
            raise GBDTError(f"unknown Schur predicate {predicate!r}")
    else:
        pred = predicate
    _, Z, sdim = sla.schur(A, output="complex", sort=pred)
    if sdim == 0:
        raise GBDTError("predicate selects no eigenvalues")
    return Z[:, :sdim]


def _hy(engine, x, t):
    if isinstance(engine, Trajectory):
        return hy_general(engine, _node(engine, x), t)
    return ex.hy_at(engine, x, t)


def boundary_design(engine, a, L, ts=None, rank_tol=1e-10) -> BoundaryDesign:
    """Boundary matrix W (m x 2m) annihilating ``[Hcal Y h](a), [Hcal Y h](0)``
    for every h in the A-invariant subspace spanned by the columns of L.

    The residual at each sample time is
    ``||W [HY(a,t) L; HY(0,t) L]||`` (absolute).
    """
    triple = engine.triple
    A, m = triple.A, triple.m
    L = mc.as_cmatrix(L, "L")
    if L.shape[0] != triple.n or L.shape[1] > m:
        raise GBDTError(f"L must be n x k with k <= m={m}, got {L.shape}")
    B = np.linalg.pinv(L) @ A @ L
    inv_res = mc.fro(A @ L - L @ B)
    if inv_res > 1e-9 * mc.fro(A) * mc.fro(L):
        raise GBDTError(f"columns of L do not span an A-invariant subspace (residual {inv_res:.3e})")
    M = np.vstack([_hy(engine, a, 0.0) @ L, _hy(engine, 0.0, 0.0) @ L])
    N = mc.left_nullspace_basis(M, rank_tol)
    if N.shape[0] < m:
        raise GBDTError(f"left null space has dimension {N.shape[0]} < m={m}")
    W = N[:m]
    ts = np.linspace(0.0, 5.0, 20) if ts is None else np.asarray(ts, dtype=float)
    res = []
    for t in ts:
        V = np.vstack([_hy(engine, a, t) @ L, _hy(engine, 0.0, t) @ L])
        res.append(mc.fro(W @ V))
    res = np.array(res)
    return BoundaryDesign(W, float(res.max()), res, ts, M)


# -- suite -----------------------------------------------------------------

CHECKS_EXPLICIT = (
    "identity", "identity_propagation", "j_unitarity", "eigenstructure", "similarity",
    "transfer_j_unitary", "u_factorization", "transfer_ode", "pde_residual", "energy",
    "supply_rate_forms", "energy_balance", "decay", "wa_limit", "asymptotic_y", "boundary",
)
CHECKS_GENERAL = (
    "identity", "identity_propagation", "j_unitarity", "similarity", "pde_residual",
    "energy", "boundary", "cross_engine", "rk4_order",
)
OPTIONAL_CHECKS = ("energy_semiaxis",)

DEFAULT_BOUNDS = {
    "identity": 1e-10,
    "identity_propagation": 1e-9,
    "j_unitarity": 1e-10,
    "eigenstructure": 1e-9,
    "similarity": 1e-9,
    "transfer_j_unitary": 1e-9,
    "u_factorization": 1e-10,
    "transfer_ode": ORDER_BOUND,
    "pde_residual": ORDER_BOUND,
    "energy": 1e-6,
    "energy_semiaxis": 1e-6,
    "supply_rate_forms": 1e-10,
    "energy_balance": 1e-6,
    "decay": 1e-6,
    "wa_limit": 1e-6,
    "asymptotic_y": 1e-3,
    "boundary": 1e-9,
    "boundary_t_uniform": 1e-9,
    "cross_engine": 1e-8,
    "rk4_order": 4.0,
}

# integration steps for the fourth-order witness; coarse enough that the
# truncation error dominates roundoff
RK4_ORDER_STEPS = (0.1, 0.05, 0.025)


def default_checks(scenario) -> list:
    if scenario.engine == "explicit":
        return list(CHECKS_EXPLICIT)
    names = list(CHECKS_GENERAL)
    if scenario.hamiltonian != "identity":
        names.remove("cross_engine")
    return names


class _Ctx:
    """Lazily built engine objects shared by the checks of one suite run."""

    def __init__(self, sc):
        self.sc = sc
        self._model = None
        self._traj = None
        self._kappa = None

    @property
    def model(self):
        if self._model is None:
            self._model = ex.build_model(self.sc.triple)
        return self._model

    @property
    def traj(self) -> Trajectory:
        if self._traj is None:
            from .generalham import integrate, parse_hamiltonian

            sc = self.sc
            if sc.grid.x0 != 0.0:
                raise GBDTError("the general engine integrates from x = 0; set grid.x0 = 0")
            H = parse_hamiltonian(sc.hamiltonian, sc.triple.m)
            tr = integrate(sc.triple, H, sc.grid.x1, sc.step)
            if not tr.complete:
                raise GBDTError(tr.failure)
            self._traj = tr
        return self._traj

    @property
    def engine(self):
        return self.model if self.sc.engine == "explicit" else self.traj

    @property
    def kappa(self):
        # limits are estimated at twice the largest schedule point so that their
        # own error sits well below the deviations measured along the schedule
        if self._kappa is None:
            self._kappa = ex.kappa_limits(self.model, 2.0 * self.sc.x_max, 1e-8)
        return self._kappa

    def rng(self, salt) -> np.random.Generator:
        return np.random.default_rng([np.uint64(self.sc.seed), salt])

    def hvec(self) -> np.ndarray:
        sc = self.sc
        return np.ones(sc.triple.n, dtype=complex) if sc.h is None else sc.h

    def sample_xs(self, k=None) -> np.ndarray:
        g = self.sc.grid
        return np.linspace(g.x0, g.x1, g.nx if k is None else k)

    def nodes(self, k=50) -> np.ndarray:
        n = len(self.traj)
        return np.unique(np.linspace(0, n - 1, min(k, n)).round().astype(int))


def _max(vals) -> float:
    return float(max(vals)) if len(vals) else 0.0


def _c_identity(c, b):
    from .triple import verify_identity

    t = c.sc.triple
    chk = verify_identity(t)
    scale = mc.fro(t.A) * mc.fro(t.S0) + mc.fro(t.Pi0) ** 2
    return [Check("identity", chk.residual / scale if scale > 0 else chk.residual, b,
                  f"absolute residual {chk.residual:.3e}, relative to ||A|| ||S0|| + ||Pi0||^2")]


def _c_identity_propagation(c, b):
    if c.sc.engine == "explicit":
        vals = [r / s for r, s in (ex.identity_residual_at(c.model, x) for x in c.sample_xs(100))]
        ctx = "100 sampled x, relative to ||A|| ||S|| + ||Pi||^2"
    else:
        from .generalham import identity_residuals

        r, s = identity_residuals(c.traj)
        vals = r / s
        ctx = f"{len(vals)} trajectory nodes, relative to ||A|| ||S|| + ||Pi||^2"
    return [Check("identity_propagation", _max(vals), b, ctx)]


def _us(c):
    if c.sc.engine == "explicit":
        return [ex.u_at(c.model, x) for x in c.sample_xs()]
    return [c.traj.u[k] for k in c.nodes()]


def _c_j_unitarity(c, b):
    jd = c.sc.triple.sig.diag
    J = np.diag(jd)
    vals = [mc.fro(u.conj().T @ J @ u - J) for u in _us(c)]
    return [Check("j_unitarity", _max(vals), b, "max ||u^* j u - j||")]


def _c_eigenstructure(c, b):
    sig = c.sc.triple.sig
    jd = sig.diag
    target = np.r_[-np.ones(sig.m2), np.ones(sig.m1)]
    ev_err, z_err = [], []
    for x in c.sample_xs():
        jH = jd[:, None] * ex.hcal_at(c.model, x)
        ev = np.linalg.eigvals(jH)
        ev_err.append(np.max(np.abs(ev[np.argsort(ev.real)] - target)))
        Zp, Zm = ex.eigenspaces(c.model, x)
        for Z, s in ((Zp, 1.0), (Zm, -1.0)):
            if Z.shape[1]:
                z_err.append(mc.fro(jH @ Z - s * Z) / mc.fro(Z))
    return [Check("eigenstructure", max(_max(ev_err), _max(z_err)), b,
                  f"eigenvalue error {_max(ev_err):.3e}, eigenvector error {_max(z_err):.3e}")]


def _c_similarity(c, b):
    if c.sc.engine == "explicit":
        vals = [ex.similarity_residual(c.model, x) for x in c.sample_xs()]
    else:
        from .generalham import similarity_general

        vals = [similarity_general(c.traj, k).residual for k in c.nodes()]
    return [Check("similarity", _max(vals), b, "relative residual of j Hcal = T D T^-1")]


def _draw_lambdas(c, k, salt):
    rng = c.rng(salt)
    A = c.sc.triple.A
    r = max(1.0, float(np.max(np.abs(np.linalg.eigvals(A)))))
    out = []
    while len(out) < k:
        x = rng.uniform(c.sc.grid.x0, c.sc.grid.x1)
        lam = complex(*(rng.uniform(-2 * r, 2 * r, 2)))
        if np.linalg.svd(A - lam * np.eye(A.shape[0]), compute_uv=False)[-1] >= 1e-3 * mc.fro(A):
            out.append((x, lam))
    return out


def _c_transfer_j_unitary(c, b):
    jd = c.model.jd
    vals = []
    for x, lam in _draw_lambdas(c, 50, 1):
        w = ex.wa_at(c.model, x, lam)
        wb = ex.wa_at(c.model, x, np.conj(lam))
        vals.append(mc.fro(w @ (jd[:, None] * wb.conj().T * jd[None, :]) - np.eye(c.model.m)))
    return [Check("transfer_j_unitary", _max(vals), b, "50 random (x, lambda)")]


def _c_u_factorization(c, b):
    w00 = np.linalg.inv(ex.wa_at(c.model, 0.0, 0))
    vals = [mc.fro(ex.u_at(c.model, x) - ex.wa_at(c.model, x, 0) @ w00) for x in c.sample_xs()]
    return [Check("u_factorization", _max(vals), b, "max ||u - w_A(x,0) w_A(0,0)^-1||")]


def _c_transfer_ode(c, b, fd_h=1e-2):
    from .generalham import q0_tilde

    m = c.model
    jd = m.jd
    x = 0.5 * (c.sc.grid.x0 + c.sc.grid.x1)
    x = max(x, 2 * fd_h)
    (_, lam), = _draw_lambdas(c, 1, 2)
    q0 = q0_tilde(ex.pi_at(m, x), ex.s_at(m, x), np.eye(m.m), m.sig)
    w = ex.wa_at(m, x, lam)
    rhs = (1j * lam * np.diag(jd) - q0) @ w - 1j * lam * (w * jd[None, :])
    e1, e2 = _fd_order(lambda y: ex.wa_at(m, y, lam), lambda y: rhs, x, fd_h)
    if max(e1, e2) <= 1e-11:
        return [Check("transfer_ode", max(e1, e2), 1e-11, "w_A is constant in x")]
    order = math.log2(e1 / e2) if e2 > 0 else math.inf
    return [Check("transfer_ode", abs(order - 2.0), b,
                  f"x={x:g}, lambda={lam:.3g}; fd errors {e1:.3e}, {e2:.3e}; order {order:.3f}")]


def _c_pde_residual(c, b):
    sc = c.sc
    g = sc.grid
    jd = sc.triple.sig.diag
    if sc.engine == "explicit":
        def make(xs, ts):
            return ex.field(c.model, xs, ts)
    else:
        from .generalham import general_field

        tr = c.traj

        def make(xs, ts):
            stride = int(round((xs[1] - xs[0]) / tr.step))
            if abs(stride * tr.step - (xs[1] - xs[0])) > 1e-9 or xs[-1] > tr.xs[-1] + 1e-9:
                raise GBDTError("pde grid step is not a multiple of the integration step")
            f = general_field(tr, ts, stride)
            keep = f.xs <= xs[-1] + 1e-9
            return ex.SolutionField(f.xs[keep], f.ts, f.Y[keep], f.Hcal[keep])
    t1 = g.t1 if g.t1 > g.t0 else g.t0 + 1.0
    res = pde_residual(make, jd, (g.x0, g.x1), (g.t0, t1), sc.pde_step, 3, bound=b)
    return [res.check]


def _t_samples(c, k=5):
    g = c.sc.grid
    return np.linspace(g.t0, g.t1, k) if g.t1 > g.t0 else np.array([g.t0])


def _c_energy(c, b):
    h = c.hvec()
    a = c.sc.grid.x1
    vals, ctx = [], []
    for t in _t_samples(c):
        s = energy(c.engine, h, a, t)
        vals.append(abs(s.E - s.E_direct) / max(s.E, ABS_FLOOR))
        ctx.append(f"t={t:g}: E={s.E:.10e}")
    return [Check("energy", _max(vals), b, "; ".join(ctx))]


def _c_energy_semiaxis(c, b):
    h = c.hvec()
    kS = c.kappa.kS
    vals = []
    for t in _t_samples(c, 3):
        s = energy(c.model, h, np.inf, t, semiaxis=True, kS=kS)
        vals.append(abs(s.E - s.E_direct) / max(s.E, ABS_FLOOR))
    return [Check("energy_semiaxis", _max(vals), b, "closed form with kS vs quadrature on [0, inf)")]


def _c_supply_rate_forms(c, b):
    h = c.hvec()
    vals = []
    for x in c.sample_xs(5):
        for t in _t_samples(c, 3):
            s1, s2 = supply_rate_pair(c.model, h, x, t)
            vals.append(abs(s1 - s2) / max(1.0, abs(s1)))
    return [Check("supply_rate_forms", _max(vals), b, "closed vs defining form")]


def _c_energy_balance(c, b):
    g = c.sc.grid
    t2 = g.t1 if g.t1 > g.t0 else g.t0 + 1.0
    chk = energy_balance(c.model, c.hvec(), g.x1, g.t0, t2)
    return [Check("energy_balance", chk.residual, b, chk.context)]


def _c_decay(c, b):
    return decay_suite(c.model, c.sc.x_max, bound=b)


def _c_wa_limit(c, b):
    kl = c.kappa
    lim = ex.wa_limit(c.model, kl.kQ, kl.kR)
    xs, d = wa_limit_path(c.model, c.sc.x_max, lim)
    ctx = f"x_max={c.sc.x_max:g}; ||w_A(x,0) - limit|| at x_1, x_10, x_20: {d[1]:.3e}, {d[10]:.3e}, {d[-1]:.3e}"
    return [Check("wa_limit", float(d[-1]), b, ctx),
            Check("wa_limit_monotone", _eventually_decreasing(d, floor=noise_floor(c.model, xs)), 0.0,
                  f"eventual decrease along the schedule, noise floor {noise_floor(c.model, xs):.1e}")]


def _c_asymptotic_y(c, b):
    kl = c.kappa
    x = c.sc.x_max
    vals = []
    for t in _t_samples(c, 3):
        Y = ex.y_at(c.model, x, t)
        Ya = ex.y_asymptotic(c.model, x, t, kl.kQ, kl.kR)
        ny = mc.fro(Y)
        vals.append(mc.fro(Y - Ya) / ny if ny > ABS_FLOOR else mc.fro(Y - Ya))
    return [Check("asymptotic_y", _max(vals), b, f"relative deviation at x={x:g}")]


def subspace_basis(triple, subspace) -> np.ndarray:
    """Resolve a subspace spec: None, ``"schur:<predicate>"`` or a basis matrix."""
    if subspace is None:
        if triple.n <= triple.m:
            return np.eye(triple.n, dtype=complex)
        subspace = f"schur:top:{triple.m}"
    if isinstance(subspace, str):
        if not subspace.startswith("schur:"):
            raise GBDTError(f"subspace must be 'schur:<predicate>' or a basis, got {subspace!r}")
        return invariant_subspace(triple.A, subspace[6:])
    return mc.as_cmatrix(subspace, "subspace")


def _c_boundary(c, b):
    L = subspace_basis(c.sc.triple, c.sc.subspace)
    bd = boundary_design(c.engine, c.sc.grid.x1, L)
    spread = float(bd.residuals.max() - bd.residuals.min())
    ctx = f"k={L.shape[1]}, a={c.sc.grid.x1:g}, 20 t-samples in [0, 5]"
    return [Check("boundary", bd.residual, b, ctx),
            Check("boundary_t_uniform", spread, DEFAULT_BOUNDS["boundary_t_uniform"], "max - min over t")]


def _c_cross_engine(c, b):
    tr = c.traj
    m = c.model
    errs = {"Pi": 0.0, "S": 0.0, "u": 0.0, "Y": 0.0, "Hcal": 0.0}
    for k in c.nodes(200):
        x = tr.xs[k]
        errs["Pi"] = max(errs["Pi"], np.max(np.abs(tr.Pi[k] - ex.pi_at(m, x))))
        errs["S"] = max(errs["S"], np.max(np.abs(tr.S[k] - ex.s_at(m, x))))
        errs["u"] = max(errs["u"], np.max(np.abs(tr.u[k] - ex.u_at(m, x))))
        errs["Hcal"] = max(errs["Hcal"], np.max(np.abs(hcal_general(tr, k) - ex.hcal_at(m, x))))
        for t in _t_samples(c, 3):
            errs["Y"] = max(errs["Y"], np.max(np.abs(y_general(tr, k, t) - ex.y_at(m, x, t))))
    ctx = ", ".join(f"{k} {v:.2e}" for k, v in errs.items())
    return [Check("cross_engine", max(errs.values()), b, f"max-norm errors: {ctx}")]


def _rk4_endpoint(triple, H, a, step):
    from .generalham import integrate

    tr = integrate(triple, H, a, step)
    if not tr.complete:
        raise GBDTError(tr.failure)
    return tr.Pi[-1], tr.S[-1], tr.u[-1]


def _c_rk4_order(c, b):
    from .generalham import parse_hamiltonian

    sc = c.sc
    H = parse_hamiltonian(sc.hamiltonian, sc.triple.m)
    a = sc.grid.x1
    ends = [_rk4_endpoint(sc.triple, H, a, s) for s in RK4_ORDER_STEPS]

    def dist(p, q):
        return max(np.max(np.abs(u - v)) for u, v in zip(p, q))

    if sc.hamiltonian == "identity":
        m = c.model
        ref = (ex.pi_at(m, a), ex.s_at(m, a), ex.u_at(m, a))
        errs = [dist(e, ref) for e in ends]
        how = "error vs closed form"
    else:
        errs = [dist(ends[0], ends[1]), dist(ends[1], ends[2])]
        how = "successive differences"
    ratios = [p / q for p, q in zip(errs, errs[1:]) if q > 0]
    if max(errs) <= ABS_FLOOR:
        return [Check("rk4_order", max(errs), ABS_FLOOR, "integrator exact for this problem")]
    if not ratios:
        return [Check("rk4_order", math.inf, b, "zero error at the finer step")]
    dev = max(abs(r - 16.0) for r in ratios)
    ctx = f"steps {RK4_ORDER_STEPS}; {how} " + ", ".join(f"{e:.3e}" for e in errs) + \
        "; ratios " + ", ".join(f"{r:.2f}" for r in ratios)
    return [Check("rk4_order", dev, b, ctx)]


_CHECKS = {name[3:]: fn for name, fn in globals().items() if name.startswith("_c_")}


def run_suite(scenario) -> Report:
    """Run the scenario's checks (or the engine defaults) in a fixed order.

    A check that raises is recorded as failed with the error as context.  If
    the parameter identity fails, every other check is recorded as skipped.
    """
    sc = scenario
    names = default_checks(sc) if sc.checks is None else list(sc.checks)
    known = set(CHECKS_EXPLICIT) | set(CHECKS_GENERAL) | set(OPTIONAL_CHECKS)
    rep = Report()
    ctx = _Ctx(sc)
    skip = None
    for name in names:
        bound = sc.tolerances.get(name, DEFAULT_BOUNDS.get(name, 0.0))
        if name not in known:
            rep.add(Check(name, None, bound, "unknown check"))
            continue
        if skip is not None:
            rep.add(Check(name, None, bound, f"skipped: {skip}"))
            continue
        if sc.engine == "general" and name in set(CHECKS_EXPLICIT) - set(CHECKS_GENERAL) and \
                name not in OPTIONAL_CHECKS:
            rep.add(Check(name, None, bound, "not available for the general engine"))
            continue
        try:
            out = _CHECKS[name](ctx, bound)
        except Exception as e:  # noqa: BLE001 - any failure becomes a failed check
            out = [Check(name, None, bound, f"error: {type(e).__name__}: {e}")]
        for chk in out:
            if chk.name != name and chk.name in sc.tolerances:
                chk = Check(chk.name, chk.residual, sc.tolerances[chk.name], chk.context)
            rep.add(chk)
        if name == "identity" and not out[0].passed:
            skip = "parameter identity violated"
    return rep
