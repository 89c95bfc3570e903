"""ODE-based GBDT engine for an arbitrary initial Hamiltonian H(x) > 0.

Integrates

    Pi' = -i A Pi j H,   S' = Pi j H j Pi^*,   u' = -q0(x) u,  u(0) = I

jointly with fixed-step classical RK4 (compiled kernel when available) and
evaluates the transformed solution Y and Hamiltonian Hcal at the nodes.
"""
from __future__ import annotations

import csv
import logging
import re
from dataclasses import dataclass, field as dc_field
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from . import matcore as mc
from .errors import GBDTError, NotPositiveDefiniteError, ShapeError
from .explicit import SolutionField
from .triple import GBDTTriple, SignatureJ, identity_residual

__all__ = [
    "HamiltonianField",
    "Trajectory",
    "q0_tilde",
    "integrate",
    "y_general",
    "hy_general",
    "hcal_general",
    "similarity_general",
    "general_field",
    "identity_residuals",
    "parse_hamiltonian",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HamiltonianField:
    """A Hermitian positive definite m x m matrix function on [0, a]."""

    dim: int
    func: Callable[[float], np.ndarray]
    domain: tuple = (0.0, np.inf)
    tag: str = ""
    interpolation: str | None = None

    def __call__(self, x: float) -> np.ndarray:
        lo, hi = self.domain
        if not (lo - 1e-12 <= x <= hi + 1e-12):
            raise GBDTError(f"H({x:g}) requested outside domain [{lo:g}, {hi:g}]")
        H = mc.as_cmatrix(self.func(float(x)), "H")
        if H.shape != (self.dim, self.dim):
            raise ShapeError(f"H(x) must be {self.dim}x{self.dim}, got {H.shape}")
        return mc.hermitian_part(H)

    @classmethod
    def identity(cls, m: int) -> "HamiltonianField":
        eye = np.eye(m, dtype=complex)
        return cls(m, lambda x: eye, tag="identity")

    @classmethod
    def diagonal(cls, channels) -> "HamiltonianField":
        """``channels``: list of (c, d, r) giving ``c + d*exp(r*x)`` per entry."""
        ch = np.asarray(channels, dtype=float).reshape(-1, 3)

        def H(x):
            return np.diag(ch[:, 0] + ch[:, 1] * np.exp(ch[:, 2] * x)).astype(complex)

        tag = "diag:" + ",".join(f"{c!r}{d:+}*exp({r!r}*x)" for c, d, r in ch)
        return cls(ch.shape[0], H, tag=tag)

    @classmethod
    def from_csv(cls, path) -> "HamiltonianField":
        """Tabulated H: column x then m*m real entries or m*m (re, im) pairs.

        Entries are row-major; values between samples are linearly
        interpolated entrywise.
        """
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
        data = np.array([[float(v) for v in r] for r in rows])
        if data.ndim != 2 or data.shape[0] < 2:
            raise ShapeError(f"{path}: need at least two samples")
        xs, vals = data[:, 0], data[:, 1:]
        if np.any(np.diff(xs) <= 0):
            raise ShapeError(f"{path}: x column must be strictly increasing")
        k = vals.shape[1]
        m = int(round(np.sqrt(k)))
        if m * m == k:
            table = vals.astype(complex)
        else:
            m = int(round(np.sqrt(k / 2)))
            if 2 * m * m != k:
                raise ShapeError(f"{path}: {k} value columns is neither m^2 nor 2m^2")
            table = vals[:, 0::2] + 1j * vals[:, 1::2]

        def H(x):
            re = [np.interp(x, xs, table[:, i].real) for i in range(m * m)]
            im = [np.interp(x, xs, table[:, i].imag) for i in range(m * m)]
            return (np.array(re) + 1j * np.array(im)).reshape(m, m)

        return cls(m, H, (float(xs[0]), float(xs[-1])), f"csv:{path}", "linear")


_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_CHANNEL = re.compile(
    rf"^\s*({_NUM})\s*(?:([-+])\s*({_NUM})\s*\*\s*exp\(\s*({_NUM})\s*\*\s*x\s*\))?\s*$"
)


def parse_hamiltonian(spec: str, m: int) -> HamiltonianField:
    """``identity``, ``diag:<c+d*exp(r*x)>,...`` or a CSV path."""
    if spec == "identity":
        return HamiltonianField.identity(m)
    if spec.startswith("diag:"):
        channels = []
        for part in spec[5:].split(","):
            mt = _CHANNEL.match(part)
            if not mt:
                raise GBDTError(f"cannot parse diagonal channel {part!r}")
            c = float(mt.group(1))
            if mt.group(2):
                d = float(mt.group(3)) * (-1.0 if mt.group(2) == "-" else 1.0)
                r = float(mt.group(4))
            else:
                d, r = 0.0, 0.0
            channels.append((c, d, r))
        if len(channels) != m:
            raise ShapeError(f"diag Hamiltonian has {len(channels)} channels, need {m}")
        return HamiltonianField.diagonal(channels)
    H = HamiltonianField.from_csv(spec)
    if H.dim != m:
        raise ShapeError(f"tabulated H is {H.dim}x{H.dim}, need {m}x{m}")
    return H


def q0_tilde(Pi, S, H, sig: SignatureJ) -> np.ndarray:
    """``j Pi^* S^{-1} Pi j H - j H j Pi^* S^{-1} Pi`` (m x m)."""
    jd = sig.diag
    P = Pi.conj().T @ mc.HermitianFactor(S, "S").solve(Pi)
    jPj = jd[:, None] * P * jd[None, :]
    jHj = jd[:, None] * H * jd[None, :]
    return jPj @ H - jHj @ P


@dataclass(frozen=True, eq=False)
class Trajectory:
    triple: GBDTTriple
    H: HamiltonianField
    xs: np.ndarray
    Pi: np.ndarray
    S: np.ndarray
    u: np.ndarray
    Hn: np.ndarray
    step: float
    failure: str | None = None
    meta: dict = dc_field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return self.failure is None

    def __len__(self):
        return self.xs.size


def integrate(t: GBDTTriple, H: HamiltonianField, a: float, step: float, backend=None) -> Trajectory:
    """Integrate the (Pi, S, u) system on [0, a] with fixed RK4 steps.

    ``step`` must divide ``a`` into at least 7 steps (8 nodes).  If S loses
    positivity the trajectory is truncated before the offending node and
    ``failure`` describes it; no integration happens past that point.
    """
    if not (a > 0 and step > 0):
        raise ValueError("a and step must be positive")
    nsteps = int(round(a / step))
    if nsteps < 7 or abs(nsteps * step - a) > 1e-9 * max(a, 1.0):
        raise ValueError(f"step {step:g} does not divide [0, {a:g}] into >= 8 nodes")
    if H.dim != t.m:
        raise ShapeError(f"H is {H.dim}x{H.dim}, triple has m={t.m}")
    half = np.linspace(0.0, a, 2 * nsteps + 1)
    Hs = np.empty((half.size, t.m, t.m), dtype=complex)
    for i, x in enumerate(half):
        Hs[i] = H(x)
    min_eigs = np.linalg.eigvalsh(Hs)[:, 0]
    if np.any(min_eigs <= 1e-10 * np.linalg.norm(Hs, axis=(1, 2))):
        i = int(np.argmin(min_eigs))
        raise NotPositiveDefiniteError("H(x)", min_eigs[i], f"x={half[i]:g}")

    kernel = {None: _kernels.rk4_trajectory, "python": _kernels.rk4_trajectory_py}.get(backend, backend)
    Pi, S, U, fail = kernel(t.A, t.Pi0, t.S0, t.sig.diag, Hs, a / nsteps, nsteps)
    xs = half[::2].copy()
    failure = None
    if fail >= 0:
        failure = f"S lost positivity at node {fail} (x={xs[fail]:g})"
        log.warning("integration aborted: %s", failure)
        keep = slice(0, max(fail, 1))
        xs, Pi, S, U = xs[keep], Pi[keep], S[keep], U[keep]
    Hn = Hs[::2][: xs.size]
    meta = {"engine": "general", "step": a / nsteps, "hamiltonian": H.tag,
            "interpolation": H.interpolation, "backend": _kernels.BACKEND if backend is None else str(backend)}
    return Trajectory(t, H, xs, Pi, S, U, Hn, a / nsteps, failure, meta)


def _pis(tr: Trajectory, k: int) -> np.ndarray:
    return mc.HermitianFactor(tr.S[k], "S", f"node {k}").solve(tr.Pi[k]).conj().T


def y_general(tr: Trajectory, k: int, t: float) -> np.ndarray:
    """``Y = u^* H j Pi^* S^{-1} e^{itA}`` at node k."""
    jd = tr.triple.sig.diag
    E = mc.mat_exp(1j * t * tr.triple.A)
    return tr.u[k].conj().T @ tr.Hn[k] @ (jd[:, None] * (_pis(tr, k) @ E))


def hy_general(tr: Trajectory, k: int, t: float) -> np.ndarray:
    """``Hcal Y = j u^* Pi^* S^{-1} e^{itA}`` at node k."""
    jd = tr.triple.sig.diag
    E = mc.mat_exp(1j * t * tr.triple.A)
    return jd[:, None] * (tr.u[k].conj().T @ _pis(tr, k) @ E)


def hcal_general(tr: Trajectory, k: int) -> np.ndarray:
    """``Hcal = u^{-1} H^{-1} u^{-*}`` at node k."""
    uinv = np.linalg.inv(tr.u[k])
    Hinv = mc.HermitianFactor(tr.Hn[k], "H").inverse()
    return mc.hermitian_part(uinv @ Hinv @ uinv.conj().T)


class SimilarityWitness(NamedTuple):
    Tcal: np.ndarray
    D: np.ndarray
    residual: float


def similarity_general(tr: Trajectory, k: int, T=None, D=None, cond_max=1e8) -> SimilarityWitness:
    """Diagonalization of ``j Hcal`` carried over from ``j H^{-1} = T D T^{-1}``.

    Without a supplied (T, D) the factorization is computed by a dense
    eigendecomposition, rejected when the eigenvector condition number
    exceeds ``cond_max``.  Returns ``Tcal = (j u j)^{-1} T`` and the relative
    residual ``||j Hcal - Tcal D Tcal^{-1}|| / ||Hcal||``.
    """
    jd = tr.triple.sig.diag
    Hinv = mc.HermitianFactor(tr.Hn[k], "H").inverse()
    jHi = jd[:, None] * Hinv
    if T is None:
        w, V = np.linalg.eig(jHi)
        if np.linalg.cond(V) > cond_max:
            raise GBDTError(f"j H^-1 eigenvectors too ill-conditioned at node {k}")
        T, D = V, np.diag(w)
    else:
        T = mc.as_cmatrix(T, "T", square=True)
        D = np.asarray(D, dtype=complex)
        D = np.diag(D) if D.ndim == 1 else D
        res = mc.fro(jHi - T @ D @ np.linalg.inv(T))
        if res > 1e-9 * mc.fro(Hinv):
            raise GBDTError(f"supplied factorization of j H^-1 is off by {res:.3e}")
    u = tr.u[k]
    Tcal = np.linalg.solve(jd[:, None] * u * jd[None, :], T)
    Hc = hcal_general(tr, k)
    res = mc.fro(jd[:, None] * Hc - Tcal @ D @ np.linalg.inv(Tcal)) / mc.fro(Hc)
    return SimilarityWitness(Tcal, D, res)


def general_field(tr: Trajectory, ts, stride: int = 1) -> SolutionField:
    """Sample Y and Hcal at every ``stride``-th node."""
    ts = np.asarray(ts, dtype=float)
    idx = np.arange(0, len(tr), stride)
    A = tr.triple.A
    Et = np.stack([mc.mat_exp(1j * t * A) for t in ts])
    jd = tr.triple.sig.diag
    G = np.stack([tr.u[k].conj().T @ tr.Hn[k] @ (jd[:, None] * _pis(tr, k)) for k in idx])
    Y = np.einsum("xan,tnk->xtak", G, Et)
    Hc = np.stack([hcal_general(tr, k) for k in idx])
    return SolutionField(tr.xs[idx], ts, Y, Hc, meta=dict(tr.meta))


def identity_residuals(tr: Trajectory) -> tuple:
    """Per-node identity residuals and scales ``||A|| ||S|| + ||Pi||^2``."""
    A, jd = tr.triple.A, tr.triple.sig.diag
    res = np.array([identity_residual(A, tr.S[k], tr.Pi[k], jd) for k in range(len(tr))])
    scale = np.array([mc.fro(A) * mc.fro(tr.S[k]) + mc.fro(tr.Pi[k]) ** 2 for k in range(len(tr))])
    return res, scale
