"""Reference numpy implementation of the fixed-step RK4 GBDT kernel."""
import numpy as np
import scipy.linalg as sla


def _rhs(A, jd, Pi, S, U, H):
    PjH = (Pi * jd) @ H
    dPi = -1j * (A @ PjH)
    dS = (PjH * jd) @ Pi.conj().T
    Ssym = 0.5 * (S + S.conj().T)
    cho = sla.cho_factor(Ssym, lower=True, check_finite=False)
    P = Pi.conj().T @ sla.cho_solve(cho, Pi, check_finite=False)
    jPj = jd[:, None] * P * jd[None, :]
    jHj = jd[:, None] * H * jd[None, :]
    q = jPj @ H - jHj @ P
    return dPi, dS, -(q @ U)


def rk4_trajectory(A, Pi0, S0, jd, Hs, h, nsteps):
    """Integrate (Pi, S, u) with classical RK4.

    ``Hs`` holds H at the half-step nodes x_0, x_0 + h/2, ..., x_N, so
    ``Hs.shape == (2*nsteps + 1, m, m)``.  Returns ``(Pi, S, U, fail)``
    with ``fail == -1`` on success, otherwise the index of the first node
    at which S lost positivity (entries from that node on are NaN).
    """
    A = np.ascontiguousarray(A, dtype=complex)
    jd = np.ascontiguousarray(jd, dtype=float)
    n, m = Pi0.shape
    Pi = np.full((nsteps + 1, n, m), np.nan, dtype=complex)
    S = np.full((nsteps + 1, n, n), np.nan, dtype=complex)
    U = np.full((nsteps + 1, m, m), np.nan, dtype=complex)
    Pi[0], S[0], U[0] = Pi0, S0, np.eye(m)
    p, s, u = Pi[0].copy(), S[0].copy(), U[0].copy()
    for k in range(nsteps):
        try:
            k1 = _rhs(A, jd, p, s, u, Hs[2 * k])
            k2 = _rhs(A, jd, p + 0.5 * h * k1[0], s + 0.5 * h * k1[1], u + 0.5 * h * k1[2], Hs[2 * k + 1])
            k3 = _rhs(A, jd, p + 0.5 * h * k2[0], s + 0.5 * h * k2[1], u + 0.5 * h * k2[2], Hs[2 * k + 1])
            k4 = _rhs(A, jd, p + h * k3[0], s + h * k3[1], u + h * k3[2], Hs[2 * k + 2])
        except sla.LinAlgError:
            return Pi, S, U, k
        p = p + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        s = s + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        u = u + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        try:
            sla.cholesky(0.5 * (s + s.conj().T), lower=True, check_finite=False)
        except sla.LinAlgError:
            return Pi, S, U, k + 1
        Pi[k + 1], S[k + 1], U[k + 1] = p, s, u
    return Pi, S, U, -1
