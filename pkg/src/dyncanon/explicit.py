"""Closed-form GBDT engine for the trivial initial Hamiltonian H(x) = I.

Everything is expressed through the conjugated family

    S_c(x) = e^{icxA} S(x) e^{-icxA^*},    c in {..., -1, 0, 1, ...}

so that S = S_0, Q = S_1 and R = S_{-1}.  Each S_c has the closed form

    S_c = F(c)(S0 - C1 + C2)F(c)^* + F(c-1) C1 F(c-1)^* - F(c+1) C2 F(c+1)^*

with F(c) = e^{icxA}.  A model evaluates inverses and the products
Pi^* S^{-1} M Pi (M commuting with A) in one fixed frame c = sigma, chosen
from sigma(A): when the spectrum lies in the open upper half plane Q stays
bounded on [0, inf), in the lower half plane R does, otherwise S is used.
All frames agree in exact arithmetic; the choice only controls rounding.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field as dc_field
from typing import NamedTuple

import numpy as np

from . import matcore as mc
from .errors import GBDTError, NotPositiveDefiniteError, ShapeError, SingularMatrixError
from .triple import GBDTTriple, identity_residual

__all__ = [
    "ExplicitModel",
    "SolutionField",
    "build_model",
    "pi_at",
    "s_at",
    "s_conj_at",
    "qr_at",
    "pis_at",
    "wa_at",
    "u_at",
    "hcal_at",
    "y_at",
    "hy_at",
    "pis_exp_at",
    "y_hcal_at",
    "field",
    "KappaLimits",
    "kappa_schedule",
    "kappa_limits",
    "wa_limit",
    "y_asymptotic",
    "eigenspaces",
    "similarity_T",
    "similarity_residual",
    "offdiag_decay",
    "identity_residual_at",
    "q_inv_derivative",
    "r_inv_derivative",
]

log = logging.getLogger(__name__)

ROUTES = {"S": 0, "Q": 1, "R": -1}


@dataclass(frozen=True, eq=False)
class ExplicitModel:
    triple: GBDTTriple
    theta1: np.ndarray
    theta2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    u_right: np.ndarray
    Ainv: np.ndarray
    sigma: int = 0

    @property
    def n(self):
        return self.triple.n

    @property
    def m(self):
        return self.triple.m

    @property
    def sig(self):
        return self.triple.sig

    @property
    def jd(self):
        return self.triple.sig.diag

    @property
    def A(self):
        return self.triple.A

    @property
    def route(self):
        return {0: "S", 1: "Q", -1: "R"}[self.sigma]


@dataclass
class SolutionField:
    """Samples of Y(x, t) (shape nx, nt, m, n) and Hcal(x) (shape nx, m, m)."""

    xs: np.ndarray
    ts: np.ndarray
    Y: np.ndarray
    Hcal: np.ndarray
    cond_max: float = 1.0
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        for name, g in (("xs", self.xs), ("ts", self.ts)):
            if g.ndim != 1 or (g.size > 1 and np.any(np.diff(g) <= 0)):
                raise ShapeError(f"{name} must be a strictly increasing 1-D grid")

    @property
    def HY(self) -> np.ndarray:
        return np.einsum("xab,xtbc->xtac", self.Hcal, self.Y)


def _auto_sigma(A) -> int:
    lam = np.linalg.eigvals(A)
    if np.all(lam.imag > 0):
        return 1
    if np.all(lam.imag < 0):
        return -1
    return 0


def build_model(t: GBDTTriple, route="auto", sep_tol=None) -> ExplicitModel:
    """Precompute C1, C2 and the constant right factor of u.

    C1 solves ``A C1 - C1 A^* = i theta1 theta1^*``; ``C2 = C1 - S0``.  When
    theta1 (theta2) vanishes, C1 = 0 (C1 = S0) satisfies its identity
    without any spectral condition, so the Sylvester step is skipped.

    Raises
    ------
    SingularMatrixError
        If A is numerically singular.
    SpectralSeparationError
        If a Sylvester solve is needed and sigma(A) meets sigma(A^*).
    GBDTError
        If C2 fails its own identity (the triple is broken).
    """
    if route != "auto" and route not in ROUTES:
        raise ValueError(f"route must be 'auto' or one of {sorted(ROUTES)}, got {route!r}")
    A, S0 = t.A, t.S0
    n = t.n
    smin = np.linalg.svd(A, compute_uv=False)[-1]
    if not smin > 1e-12 * mc.fro(A):
        raise SingularMatrixError(f"A is singular (smallest singular value {smin:.3e})")
    th1, th2 = t.theta1, t.theta2
    Ah = A.conj().T
    if not np.any(th1):
        C1 = np.zeros((n, n), dtype=complex)
    elif not np.any(th2):
        C1 = S0.copy()
    else:
        C1 = mc.sylvester_solve(A, Ah, 1j * th1 @ th1.conj().T, sep_tol)
    C2 = C1 - S0
    scale = mc.fro(A) * (mc.fro(C1) + mc.fro(S0)) + mc.fro(t.Pi0) ** 2
    res1 = mc.fro(A @ C1 - C1 @ Ah - 1j * th1 @ th1.conj().T)
    res2 = mc.fro(A @ C2 - C2 @ Ah - 1j * th2 @ th2.conj().T)
    if res1 > 1e-10 * scale or res2 > 1e-10 * scale:
        raise GBDTError(
            f"C1/C2 identities violated (residuals {res1:.2e}, {res2:.2e}); "
            "the triple does not satisfy its own identity"
        )
    Ainv = np.linalg.inv(A)
    S0f = mc.HermitianFactor(S0, "S0")
    jd = t.sig.diag
    u_right = np.eye(t.m) + 1j * jd[:, None] * (t.Pi0.conj().T @ Ainv.conj().T @ S0f.solve(t.Pi0))
    sigma = _auto_sigma(A) if route == "auto" else ROUTES[route]
    for arr in (C1, C2, u_right, Ainv):
        arr.setflags(write=False)
    return ExplicitModel(t, th1, th2, C1, C2, u_right, Ainv, sigma)


# -- frame machinery -------------------------------------------------------

class _Exps:
    """Cache of ``F(c) = e^{icxA}`` at one x."""

    def __init__(self, A, x):
        self.A = A
        self.x = float(x)
        self._F = {0: np.eye(A.shape[0], dtype=complex)}

    def __call__(self, c: int) -> np.ndarray:
        if c not in self._F:
            self._F[c] = mc.mat_exp(1j * c * self.x * self.A)
        return self._F[c]


class _Frame:
    """Evaluation of one model at one x in the model's frame."""

    def __init__(self, model: ExplicitModel, x: float):
        self.model = model
        self.x = float(x)
        self.F = _Exps(model.A, x)
        s = model.sigma
        self.Phat = np.hstack([self.F(s - 1) @ model.theta1, self.F(s + 1) @ model.theta2])
        self.factor = mc.HermitianFactor(
            s_conj_at(model, x, s, self.F), f"S_{s}", f"x={self.x:g}"
        )
        # X = Shat^{-1} Phat, so that Pi^* S^{-1} M Pi = X^* M Phat
        self.X = self.factor.solve(self.Phat)

    def conj_inv(self, c: int) -> np.ndarray:
        """S_c(x)^{-1}."""
        G = self.F(self.model.sigma - c)
        return mc.hermitian_part(G.conj().T @ self.factor.inverse() @ G)

    def pis(self) -> np.ndarray:
        return self.X.conj().T @ self.F(self.model.sigma)

    def wa(self, M) -> np.ndarray:
        m = self.model
        return np.eye(m.m) - 1j * m.jd[:, None] * (self.X.conj().T @ M @ self.Phat)

    def u(self) -> np.ndarray:
        return self.wa(self.model.Ainv) @ self.model.u_right


def s_conj_at(model: ExplicitModel, x, c: int, exps=None) -> np.ndarray:
    """Closed form of ``S_c(x) = e^{icxA} S(x) e^{-icxA^*}`` (Hermitian part)."""
    F = exps if exps is not None else _Exps(model.A, x)
    K0 = model.triple.S0 - model.C1 + model.C2
    Fc, Fm, Fp = F(c), F(c - 1), F(c + 1)
    S = Fc @ K0 @ Fc.conj().T + Fm @ model.C1 @ Fm.conj().T - Fp @ model.C2 @ Fp.conj().T
    return mc.hermitian_part(S)


def _frame(model, x) -> _Frame:
    return _Frame(model, x)


# -- point evaluators ------------------------------------------------------

def pi_at(model: ExplicitModel, x) -> np.ndarray:
    """``Pi(x) = [e^{-ixA} theta1, e^{ixA} theta2]``."""
    A = model.A
    return np.hstack([mc.mat_exp(-1j * x * A) @ model.theta1, mc.mat_exp(1j * x * A) @ model.theta2])


def s_at(model: ExplicitModel, x) -> np.ndarray:
    """S(x) from the closed form, symmetrized; raises if not positive definite."""
    S = s_conj_at(model, x, 0)
    chk = mc.posdef_check(S, 0.0)
    if not chk.is_pd:
        raise NotPositiveDefiniteError("S(x)", chk.min_eig, f"x={x:g}")
    return S


class QR(NamedTuple):
    Q: np.ndarray
    R: np.ndarray


def qr_at(model: ExplicitModel, x) -> QR:
    """``Q = e^{ixA} S e^{-ixA^*}`` and ``R = e^{-ixA} S e^{ixA^*}``."""
    return QR(s_conj_at(model, x, 1), s_conj_at(model, x, -1))


def pis_at(model: ExplicitModel, x) -> np.ndarray:
    """``Pi(x)^* S(x)^{-1}`` (m x n)."""
    return _frame(model, x).pis()


def _check_lambda(model, lam):
    M = model.A - lam * np.eye(model.n)
    smin = np.linalg.svd(M, compute_uv=False)[-1]
    if not smin >= 1e-10 * mc.fro(model.A):
        raise SingularMatrixError(f"lambda={lam} is too close to sigma(A) (smin {smin:.2e})")
    return np.linalg.inv(M)


def wa_at(model: ExplicitModel, x, lam) -> np.ndarray:
    """Transfer matrix ``I - i j Pi^* S^{-1} (A - lam I)^{-1} Pi`` at x."""
    Minv = model.Ainv if lam == 0 else _check_lambda(model, lam)
    return _frame(model, x).wa(Minv)


def u_at(model: ExplicitModel, x) -> np.ndarray:
    return _frame(model, x).u()


def hcal_at(model: ExplicitModel, x) -> np.ndarray:
    # u^{-1} = j u^* j, hence u^{-1} u^{-*} = j u^* u j
    u = u_at(model, x)
    jd = model.jd
    return mc.hermitian_part(jd[:, None] * (u.conj().T @ u) * jd[None, :])


def y_at(model: ExplicitModel, x, t) -> np.ndarray:
    """``Y(x,t) = u^* j Pi^* S^{-1} e^{itA}`` (m x n)."""
    fr = _frame(model, x)
    u = fr.u()
    E = mc.mat_exp(1j * (model.sigma * fr.x + t) * model.A)
    return u.conj().T @ (model.jd[:, None] * (fr.X.conj().T @ E))


def hy_at(model: ExplicitModel, x, t) -> np.ndarray:
    """``Hcal(x) Y(x,t) = j u^* Pi^* S^{-1} e^{itA}``."""
    fr = _frame(model, x)
    u = fr.u()
    E = mc.mat_exp(1j * (model.sigma * fr.x + t) * model.A)
    return model.jd[:, None] * (u.conj().T @ fr.X.conj().T @ E)


def pis_exp_at(model: ExplicitModel, x, t) -> np.ndarray:
    """``Pi(x)^* S(x)^{-1} e^{itA}`` with the frame exponent folded in."""
    fr = _frame(model, x)
    return fr.X.conj().T @ mc.mat_exp(1j * (model.sigma * fr.x + t) * model.A)


def y_hcal_at(model: ExplicitModel, x, t) -> tuple:
    """``(Y(x,t), Hcal(x), u(x))`` from a single frame evaluation."""
    fr = _frame(model, x)
    u = fr.u()
    jd = model.jd
    E = mc.mat_exp(1j * (model.sigma * fr.x + t) * model.A)
    Y = u.conj().T @ (jd[:, None] * (fr.X.conj().T @ E))
    H = mc.hermitian_part(jd[:, None] * (u.conj().T @ u) * jd[None, :])
    return Y, H, u


def field(model: ExplicitModel, xs, ts) -> SolutionField:
    """Sample Y and Hcal on a tensor grid."""
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    m, n = model.m, model.n
    jd = model.jd
    G = np.empty((xs.size, m, n), dtype=complex)
    H = np.empty((xs.size, m, m), dtype=complex)
    cond_max = 1.0
    for i, x in enumerate(xs):
        fr = _frame(model, x)
        cond_max = max(cond_max, fr.factor.cond)
        u = fr.u()
        G[i] = u.conj().T @ (jd[:, None] * (fr.X.conj().T @ fr.F(model.sigma)))
        H[i] = mc.hermitian_part(jd[:, None] * (u.conj().T @ u) * jd[None, :])
    Et = np.stack([mc.mat_exp(1j * t * model.A) for t in ts]) if ts.size else np.empty((0, n, n))
    Y = np.einsum("xan,tnk->xtak", G, Et)
    meta = {"engine": "explicit", "route": model.route}
    if cond_max > mc.COND_WARN:
        meta["condition_warning"] = f"max condition number {cond_max:.3e} exceeds {mc.COND_WARN:.0e}"
    return SolutionField(xs, ts, Y, H, cond_max, meta)


# -- asymptotics -----------------------------------------------------------

class KappaLimits(NamedTuple):
    kQ: np.ndarray
    kR: np.ndarray
    kS: np.ndarray
    converged: dict
    xs: np.ndarray
    last_diff: dict


def kappa_schedule(x_max, k_max=20) -> np.ndarray:
    return x_max * (1.0 - 2.0 ** -np.arange(k_max + 1))


def kappa_limits(model: ExplicitModel, x_max, tol) -> KappaLimits:
    """Limits of Q^{-1}, R^{-1}, S^{-1} along ``x_k = x_max (1 - 2^-k)``.

    The last schedule value is reported; a limit is flagged converged when
    the Frobenius difference between the last two values is below ``tol``.
    """
    if not (x_max > 0 and tol > 0):
        raise ValueError("x_max and tol must be positive")
    xs = kappa_schedule(x_max)
    prev = None
    cur = None
    for x in xs:
        fr = _frame(model, x)
        prev, cur = cur, {"Q": fr.conj_inv(1), "R": fr.conj_inv(-1), "S": fr.conj_inv(0)}
    diffs = {k: mc.fro(cur[k] - prev[k]) for k in cur}
    conv = {k: bool(d < tol) for k, d in diffs.items()}
    return KappaLimits(cur["Q"], cur["R"], cur["S"], conv, xs, diffs)


def wa_limit(model: ExplicitModel, kQ, kR) -> np.ndarray:
    """Block-diagonal limit of ``w_A(x, 0)`` as x -> infinity."""
    th1, th2, Ai = model.theta1, model.theta2, model.Ainv
    m1 = model.sig.m1
    W = np.zeros((model.m, model.m), dtype=complex)
    W[:m1, :m1] = np.eye(m1) - 1j * th1.conj().T @ kQ @ Ai @ th1
    W[m1:, m1:] = np.eye(model.sig.m2) + 1j * th2.conj().T @ kR @ Ai @ th2
    return W


def y_asymptotic(model: ExplicitModel, x, t, kQ, kR, form="two") -> np.ndarray:
    """Leading-order Y(x,t) for large x, with all o(1) terms dropped.

    ``form="two"`` keeps both exponents ``e^{i(t+x)A}`` and ``e^{i(t-x)A}``;
    ``form="single"`` drops the second row and factors out ``e^{i(x+t)A}``,
    which is the natural form when sigma(A) is in the upper half plane.
    """
    th1, th2 = model.theta1, model.theta2
    AiH = model.Ainv.conj().T
    m1, m2 = model.sig.m1, model.sig.m2
    D = np.zeros((model.m, model.m), dtype=complex)
    D[:m1, :m1] = np.eye(m1) + 1j * th1.conj().T @ AiH @ kQ @ th1
    D[m1:, m1:] = np.eye(m2) - 1j * th2.conj().T @ AiH @ kR @ th2
    first = model.jd[:, None] * (wa_at(model, 0.0, 0) @ D)
    A = model.A
    if form == "two":
        second = np.vstack([
            th1.conj().T @ kQ @ mc.mat_exp(1j * (t + x) * A),
            th2.conj().T @ kR @ mc.mat_exp(1j * (t - x) * A),
        ])
    elif form == "single":
        second = np.vstack([th1.conj().T @ kQ, np.zeros((m2, model.n))]) @ mc.mat_exp(1j * (x + t) * A)
    else:
        raise ValueError(f"unknown form {form!r}")
    return first @ second


def offdiag_decay(model: ExplicitModel, x):
    """Norms of ``theta2^* e^{-2ixA^*} Q^{-1}`` and ``theta1^* e^{2ixA^*} R^{-1}``."""
    fr = _frame(model, x)
    s = model.sigma
    Ginv = fr.factor.inverse()
    q_side = (fr.F(s + 1) @ model.theta2).conj().T @ Ginv @ fr.F(s - 1)
    r_side = (fr.F(s - 1) @ model.theta1).conj().T @ Ginv @ fr.F(s + 1)
    return mc.fro(q_side), mc.fro(r_side)


def q_inv_derivative(model: ExplicitModel, x) -> np.ndarray:
    """Closed form ``(Q^{-1})' = -2 Q^{-1} e^{2ixA} th2 th2^* e^{-2ixA^*} Q^{-1}``."""
    fr = _frame(model, x)
    Qi = fr.conj_inv(1)
    v = fr.F(2) @ model.theta2
    return -2.0 * Qi @ v @ v.conj().T @ Qi


def r_inv_derivative(model: ExplicitModel, x) -> np.ndarray:
    """Closed form ``(R^{-1})' = -2 R^{-1} e^{-2ixA} th1 th1^* e^{2ixA^*} R^{-1}``."""
    fr = _frame(model, x)
    Ri = fr.conj_inv(-1)
    v = fr.F(-2) @ model.theta1
    return -2.0 * Ri @ v @ v.conj().T @ Ri


# -- eigenstructure --------------------------------------------------------

class Eigenspaces(NamedTuple):
    Zplus: np.ndarray
    Zminus: np.ndarray


def eigenspaces(model: ExplicitModel, x) -> Eigenspaces:
    """Bases of the +1 and -1 eigenspaces of ``j Hcal(x)``: u^*(I +- j)."""
    uh = u_at(model, x).conj().T
    m1 = model.sig.m1
    return Eigenspaces(2.0 * uh[:, :m1], 2.0 * uh[:, m1:])


def similarity_T(model: ExplicitModel, x, rtol=1e-8) -> np.ndarray:
    """``T(x) = (j u(x) j)^{-1}``, cross-checked against ``u(x)^*``."""
    u = u_at(model, x)
    jd = model.jd
    juj = jd[:, None] * u * jd[None, :]
    T = np.linalg.solve(juj, np.eye(model.m, dtype=complex))
    dev = mc.fro(T - u.conj().T)
    if dev > rtol * max(mc.fro(T), 1.0):
        raise GBDTError(f"(juj)^-1 and u^* disagree by {dev:.3e} at x={x:g}")
    return T


def similarity_residual(model: ExplicitModel, x) -> float:
    """``||j Hcal - T j T^{-1}|| / ||Hcal||``."""
    T = similarity_T(model, x)
    H = hcal_at(model, x)
    jd = model.jd
    TjTi = (T * jd[None, :]) @ np.linalg.inv(T)
    return mc.fro(jd[:, None] * H - TjTi) / mc.fro(H)


def identity_residual_at(model: ExplicitModel, x) -> tuple:
    """Identity residual at x and its scale ``||A|| ||S|| + ||Pi||^2``."""
    S = s_at(model, x)
    Pi = pi_at(model, x)
    res = identity_residual(model.A, S, Pi, model.jd)
    return res, mc.fro(model.A) * mc.fro(S) + mc.fro(Pi) ** 2

