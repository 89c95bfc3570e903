"""GBDT parameter triples {A, S(0), Pi(0)}.

A triple seeds every transformation and must satisfy the matrix identity

    A S0 - S0 A^* = i Pi0 j Pi0^*

with S0 Hermitian positive definite and ``j = diag(I_m1, -I_m2)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import matcore as mc
from .errors import (
    GBDTError,
    NotPositiveDefiniteError,
    RetryBudgetExceeded,
    ShapeError,
)
from .serialization import matrix_from_json, matrix_to_json

__all__ = [
    "SignatureJ",
    "GBDTTriple",
    "IdentityCheck",
    "identity_residual",
    "verify_identity",
    "complete_S0",
    "random_admissible",
    "triple_to_json",
    "triple_from_json",
    "ex1_triple",
]

MAX_TRIES = 64


@dataclass(frozen=True)
class SignatureJ:
    m1: int
    m2: int

    def __post_init__(self):
        if self.m1 < 0 or self.m2 < 0 or self.m1 + self.m2 <= 0:
            raise ShapeError(f"invalid signature ({self.m1}, {self.m2})")

    @property
    def m(self) -> int:
        return self.m1 + self.m2

    @property
    def diag(self) -> np.ndarray:
        return np.concatenate([np.ones(self.m1), -np.ones(self.m2)])

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.diag).astype(complex)


@dataclass(frozen=True, eq=False)
class GBDTTriple:
    """Parameter matrices of one transformation.

    Shapes are validated on construction; the identity and positivity are
    not, so that broken triples can still be represented and reported on.
    """

    A: np.ndarray
    S0: np.ndarray
    Pi0: np.ndarray
    sig: SignatureJ

    def __post_init__(self):
        A = mc.as_cmatrix(self.A, "A", square=True)
        S0 = mc.as_cmatrix(self.S0, "S0", square=True)
        Pi0 = mc.as_cmatrix(self.Pi0, "Pi0")
        n = A.shape[0]
        if S0.shape != (n, n):
            raise ShapeError(f"S0 must be {(n, n)}, got {S0.shape}")
        if Pi0.shape != (n, self.sig.m):
            raise ShapeError(f"Pi0 must be {(n, self.sig.m)}, got {Pi0.shape}")
        for name, arr in (("A", A), ("S0", S0), ("Pi0", Pi0)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.sig.m

    @property
    def j(self) -> np.ndarray:
        return self.sig.matrix

    @property
    def theta1(self) -> np.ndarray:
        return self.Pi0[:, : self.sig.m1]

    @property
    def theta2(self) -> np.ndarray:
        return self.Pi0[:, self.sig.m1 :]


class IdentityCheck(NamedTuple):
    residual: float
    bound: float
    ok: bool


def identity_residual(A, S, Pi, jdiag) -> float:
    """Frobenius norm of ``A S - S A^* - i Pi j Pi^*``."""
    R = A @ S - S @ A.conj().T - 1j * (Pi * jdiag) @ Pi.conj().T
    return mc.fro(R)


def verify_identity(t: GBDTTriple, rtol=1e-10) -> IdentityCheck:
    res = identity_residual(t.A, t.S0, t.Pi0, t.sig.diag)
    bound = rtol * (mc.fro(t.A) * mc.fro(t.S0) + mc.fro(t.Pi0) ** 2)
    return IdentityCheck(res, bound, bool(res <= bound))


def complete_S0(A, Pi0, sig: SignatureJ, sep_tol=None) -> GBDTTriple:
    """Solve the identity for S0 and return the triple if S0 > 0.

    Raises
    ------
    SpectralSeparationError
        If sigma(A) and sigma(A^*) are not separated.
    NotPositiveDefiniteError
        If the (symmetrized) solution is not positive definite.
    """
    A = mc.as_cmatrix(A, "A", square=True)
    Pi0 = mc.as_cmatrix(Pi0, "Pi0")
    if Pi0.shape != (A.shape[0], sig.m):
        raise ShapeError(f"Pi0 must be {(A.shape[0], sig.m)}, got {Pi0.shape}")
    rhs = 1j * (Pi0 * sig.diag) @ Pi0.conj().T
    S0 = mc.hermitian_part(mc.sylvester_solve(A, A.conj().T, rhs, sep_tol))
    chk = mc.posdef_check(S0, 1e-10)
    if not chk.is_pd:
        raise NotPositiveDefiniteError("S0", chk.min_eig, "complete_S0")
    return GBDTTriple(A, S0, Pi0, sig)


# -- random generation -----------------------------------------------------

def _cgauss(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def _draw_spd(rng, n):
    G = _cgauss(rng, n, n)
    return mc.hermitian_part(G @ G.conj().T / n + 0.5 * np.eye(n))


def _draw_eigs(rng, k, half):
    # half = +1 upper, -1 lower half plane
    re = rng.uniform(-1.0, 1.0, k)
    im = rng.uniform(0.5, 1.5, k)
    return re + 1j * half * im


def _draw_A(rng, n, spectrum):
    if spectrum in ("upper", "lower"):
        V = np.eye(n) + 0.3 * _cgauss(rng, n, n)
        lam = _draw_eigs(rng, n, 1 if spectrum == "upper" else -1)
        return V @ np.diag(lam) @ np.linalg.inv(V)
    A = _cgauss(rng, n, n) / np.sqrt(n) + _cgauss(rng, 1, 1)[0, 0] * np.eye(n) * 0.5
    return A


def _spectrum_ok(A, spectrum):
    lam = np.linalg.eigvals(A)
    if np.min(np.abs(lam)) < 1e-2:
        return False
    if spectrum == "any":
        return True
    if spectrum == "offreal":
        return bool(np.min(np.abs(lam.imag)) > 0.1)
    if spectrum == "upper":
        return bool(np.all(lam.imag > 0.1))
    if spectrum == "lower":
        return bool(np.all(lam.imag < -0.1))
    raise ValueError(f"unknown spectrum class {spectrum!r}")


def _j_unitary(rng, sig: SignatureJ, strength=0.5):
    # exp(i j H) with H Hermitian satisfies U^* j U = j
    H = mc.hermitian_part(_cgauss(rng, sig.m, sig.m)) * strength
    return mc.mat_exp(1j * sig.matrix @ H)


def _inertia_draw(rng, n, sig, spectrum):
    S0 = _draw_spd(rng, n)
    A = _draw_A(rng, n, spectrum)
    if not _spectrum_ok(A, spectrum):
        return None
    K = mc.hermitian_part(-1j * (A @ S0 - S0 @ A.conj().T))
    w, V = np.linalg.eigh(K)
    cut = 1e-12 * max(np.abs(w).max(), 1.0)
    pos = np.flatnonzero(w > cut)
    neg = np.flatnonzero(w < -cut)
    if pos.size > sig.m1 or neg.size > sig.m2:
        return None
    Pi0 = np.zeros((n, sig.m), dtype=complex)
    Pi0[:, : pos.size] = V[:, pos] * np.sqrt(w[pos])
    Pi0[:, sig.m1 : sig.m1 + neg.size] = V[:, neg] * np.sqrt(-w[neg])
    return A, S0, Pi0


def _lyapunov_draw(rng, n, sig, spectrum):
    # block-diagonal seed: an upper-half-plane block driven by theta1 and a
    # lower-half-plane block driven by theta2 give S0 > 0 from two
    # controllability Gramians; a similarity then mixes the blocks
    if spectrum == "upper" or sig.m2 == 0:
        n_up = n
    elif spectrum == "lower" or sig.m1 == 0:
        n_up = 0
    else:
        n_up = (n + 1) // 2
    if (n_up and not sig.m1) or (n - n_up and not sig.m2):
        return None
    A = np.zeros((n, n), dtype=complex)
    S0 = np.zeros((n, n), dtype=complex)
    Pi0 = np.zeros((n, sig.m), dtype=complex)
    blocks = ((slice(0, n_up), slice(0, sig.m1), 1), (slice(n_up, n), slice(sig.m1, sig.m), -1))
    for rows, cols, half in blocks:
        k = rows.stop - rows.start
        if k == 0:
            continue
        Ak = np.diag(_draw_eigs(rng, k, half)) + np.triu(0.3 * _cgauss(rng, k, k), 1)
        th = _cgauss(rng, k, cols.stop - cols.start)
        Sk = mc.sylvester_solve(Ak, Ak.conj().T, 1j * half * th @ th.conj().T)
        A[rows, rows] = Ak
        S0[rows, rows] = mc.hermitian_part(Sk)
        Pi0[rows, cols] = th
    V = np.eye(n) + 0.3 * _cgauss(rng, n, n)
    A = V @ A @ np.linalg.inv(V)
    S0 = mc.hermitian_part(V @ S0 @ V.conj().T)
    Pi0 = V @ Pi0
    if not _spectrum_ok(A, "any" if spectrum == "any" else spectrum):
        return None
    return A, S0, Pi0


def random_admissible(n, sig: SignatureJ, seed, *, spectrum="offreal",
                      method="inertia", mix=True) -> GBDTTriple:
    """Deterministic pseudo-random admissible triple.

    Parameters
    ----------
    n : int
        Size of A.
    sig : SignatureJ
    seed : int
        64-bit seed; equal seeds give bit-identical triples.
    spectrum : {"offreal", "upper", "lower", "any"}
        Constraint on sigma(A).  All classes keep |lambda| >= 1e-2, so
        ``det A != 0``; all but "any" keep sigma(A) away from the real axis.
    method : {"inertia", "lyapunov"}
        "inertia" draws S0 > 0 and A, then factors K = -i(A S0 - S0 A^*)
        into Pi0 j Pi0^*; it needs ``rank K <= m`` and so only reaches
        n <= m.  "lyapunov" builds S0 from controllability Gramians and
        works for any n when both blocks of j are present.
    mix : bool
        Right-multiply Pi0 by a random j-unitary matrix so that both blocks
        of Pi0 are populated.  The identity is unchanged.
    """
    if n < 1:
        raise ShapeError("n must be >= 1")
    rng = np.random.default_rng(np.uint64(seed % 2**64))
    draw = {"inertia": _inertia_draw, "lyapunov": _lyapunov_draw}[method]
    for _ in range(MAX_TRIES):
        got = draw(rng, n, sig, spectrum)
        if got is None:
            continue
        A, S0, Pi0 = got
        if mix:
            Pi0 = Pi0 @ _j_unitary(rng, sig)
        t = GBDTTriple(A, S0, Pi0, sig)
        if verify_identity(t).ok and mc.posdef_check(S0, 1e-10).is_pd:
            return t
    raise RetryBudgetExceeded(
        f"no admissible triple for n={n}, sig=({sig.m1},{sig.m2}), seed={seed}, "
        f"method={method}, spectrum={spectrum} after {MAX_TRIES} draws"
    )


def ex1_triple() -> GBDTTriple:
    """The scalar worked example: A = i/2, S0 = 1, Pi0 = (sqrt 2, 1)."""
    return GBDTTriple(
        np.array([[0.5j]]), np.array([[1.0]]), np.array([[np.sqrt(2.0), 1.0]]), SignatureJ(1, 1)
    )


# -- JSON ------------------------------------------------------------------

def triple_to_json(t: GBDTTriple) -> dict:
    return {
        "n": t.n,
        "m1": t.sig.m1,
        "m2": t.sig.m2,
        "A": matrix_to_json(t.A),
        "S0": matrix_to_json(t.S0),
        "Pi0": matrix_to_json(t.Pi0),
    }


def triple_from_json(obj) -> GBDTTriple:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        sig = SignatureJ(int(obj["m1"]), int(obj["m2"]))
        t = GBDTTriple(
            matrix_from_json(obj["A"], "A"),
            matrix_from_json(obj["S0"], "S0"),
            matrix_from_json(obj["Pi0"], "Pi0"),
            sig,
        )
    except KeyError as exc:
        raise GBDTError(f"triple JSON missing field {exc}") from None
    if "n" in obj and int(obj["n"]) != t.n:
        raise ShapeError(f"declared n={obj['n']} but A is {t.n}x{t.n}")
    return t
