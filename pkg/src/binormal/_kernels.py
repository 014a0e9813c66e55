"""Compiled inner loops: parallel-frame marches in x and t and the Frenet profile march.

Frames are packed as 9 floats ``(T, e1, e2)``.  The space march uses chirp
recurrences for ``exp(i (x - j)^2 / 4t)`` (resynchronised exactly every
``resync`` steps) so that each RK4 step costs a few complex multiplies per
corner instead of fresh exponentials.
"""

import numpy as np
from numba import njit

_TWO_PI = 2.0 * np.pi


@njit(cache=True, nogil=True)
def _taper(x, L, tw):
    ax = abs(x)
    if ax <= L - tw:
        return 1.0
    if ax >= L:
        return 0.0
    return 0.5 * (1.0 + np.cos(np.pi * (ax - (L - tw)) / tw))


@njit(cache=True, nogil=True)
def _gram_schmidt(F):
    """Reproject F in place; return the largest pre-projection defect."""
    d = 0.0
    nt = F[0] * F[0] + F[1] * F[1] + F[2] * F[2]
    na = F[3] * F[3] + F[4] * F[4] + F[5] * F[5]
    nb = F[6] * F[6] + F[7] * F[7] + F[8] * F[8]
    ta = F[0] * F[3] + F[1] * F[4] + F[2] * F[5]
    tb = F[0] * F[6] + F[1] * F[7] + F[2] * F[8]
    ab = F[3] * F[6] + F[4] * F[7] + F[5] * F[8]
    for v in (abs(nt - 1.0), abs(na - 1.0), abs(nb - 1.0), abs(ta), abs(tb), abs(ab)):
        if v > d:
            d = v
    s = 1.0 / np.sqrt(nt)
    for i in range(3):
        F[i] *= s
    p = F[0] * F[3] + F[1] * F[4] + F[2] * F[5]
    for i in range(3):
        F[3 + i] -= p * F[i]
    s = 1.0 / np.sqrt(F[3] * F[3] + F[4] * F[4] + F[5] * F[5])
    for i in range(3):
        F[3 + i] *= s
    # e2 = T x e1 keeps the triple right-handed
    F[6] = F[1] * F[5] - F[2] * F[4]
    F[7] = F[2] * F[3] - F[0] * F[5]
    F[8] = F[0] * F[4] - F[1] * F[3]
    return d


@njit(cache=True, nogil=True)
def _rhs_space(F, a, b, out):
    for i in range(3):
        out[i] = a * F[3 + i] + b * F[6 + i]
        out[3 + i] = -a * F[i]
        out[6 + i] = -b * F[i]


@njit(cache=True, nogil=True)
def march_space(F0, x0, h, nsteps, pos, camp, t, xis, L, tw, stride, resync, project):
    """RK4 march of T_x = a e1 + b e2, e1_x = -a T, e2_x = -b T from x0 in steps of h.

    u(x) = sum_k camp[k] exp(i (x - pos[k])^2 / 4t).  Returns the final frame,
    frames every ``stride`` steps (start included), the trapezoid sums
    ``sum w(x) exp(2 pi i xi x) T_x(x) h`` for every xi, and the largest
    orthonormality defect seen before reprojection.
    """
    nc = pos.size
    nq = xis.size
    inv4t = 1.0 / (4.0 * t)
    F = F0.copy()
    nout = nsteps // stride + 1
    samples = np.empty((nout, 9))
    samples[0] = F
    acc = np.zeros((nq, 3), dtype=np.complex128)
    z = np.empty(nc, dtype=np.complex128)
    r = np.empty(nc, dtype=np.complex128)
    hh = 0.5 * h
    q2 = np.exp(1j * 2.0 * hh * hh * inv4t)
    ef = np.empty(nq, dtype=np.complex128)
    er = np.empty(nq, dtype=np.complex128)
    k1 = np.empty(9)
    k2 = np.empty(9)
    k3 = np.empty(9)
    k4 = np.empty(9)
    Y = np.empty(9)
    drift = 0.0
    x = x0
    for k in range(nsteps):
        x = x0 + k * h
        if k % resync == 0:
            for m in range(nc):
                d = x - pos[m]
                z[m] = np.exp(1j * d * d * inv4t)
                r[m] = np.exp(1j * ((d + hh) ** 2 - d * d) * inv4t)
            for q in range(nq):
                ef[q] = np.exp(1j * _TWO_PI * xis[q] * x)
                er[q] = np.exp(1j * _TWO_PI * xis[q] * h)
        u0 = 0j
        um = 0j
        u1 = 0j
        for m in range(nc):
            z0 = z[m]
            zm = z0 * r[m]
            rm = r[m] * q2
            z1 = zm * rm
            r[m] = rm * q2
            z[m] = z1
            u0 += camp[m] * z0
            um += camp[m] * zm
            u1 += camp[m] * z1
        _rhs_space(F, u0.real, u0.imag, k1)
        for i in range(9):
            Y[i] = F[i] + hh * k1[i]
        _rhs_space(Y, um.real, um.imag, k2)
        for i in range(9):
            Y[i] = F[i] + hh * k2[i]
        _rhs_space(Y, um.real, um.imag, k3)
        for i in range(9):
            Y[i] = F[i] + h * k3[i]
        _rhs_space(Y, u1.real, u1.imag, k4)
        for i in range(9):
            F[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if project:
            d = _gram_schmidt(F)
            if d > drift:
                drift = d
        if nq > 0:
            a1 = u1.real
            b1 = u1.imag
            f0 = 0.5 * h * _taper(x, L, tw)
            f1 = 0.5 * h * _taper(x + h, L, tw)
            g0 = a1 * F[3] + b1 * F[6]
            g1 = a1 * F[4] + b1 * F[7]
            g2 = a1 * F[5] + b1 * F[8]
            for q in range(nq):
                e0 = ef[q]
                e1 = e0 * er[q]
                ef[q] = e1
                acc[q, 0] += f0 * e0 * k1[0] + f1 * e1 * g0
                acc[q, 1] += f0 * e0 * k1[1] + f1 * e1 * g1
                acc[q, 2] += f0 * e0 * k1[2] + f1 * e1 * g2
        if (k + 1) % stride == 0:
            samples[(k + 1) // stride] = F
    return F, samples, acc, drift


@njit(cache=True, nogil=True)
def _u_ux(x, t, pos, alphas, M):
    """u and u_x of the ansatz at (t, x)."""
    st = np.sqrt(t)
    half_log = 0.5 * np.log(t)
    u = 0j
    ux = 0j
    for m in range(pos.size):
        a2 = alphas[m].real ** 2 + alphas[m].imag ** 2
        A = np.exp(-1j * (a2 - M) * half_log) * alphas[m]
        d = x - pos[m]
        g = A * np.exp(1j * d * d / (4.0 * t)) / st
        u += g
        ux += g * (1j * d / (2.0 * t))
    return u, ux


@njit(cache=True, nogil=True)
def _rhs_time(S, t, x0, pos, alphas, M, out):
    u, ux = _u_ux(x0, t, pos, alphas, M)
    a = u.real
    b = u.imag
    p = ux.real
    q = ux.imag
    w2 = 0.5 * (a * a + b * b - M / t)
    for i in range(3):
        T = S[i]
        e1 = S[3 + i]
        e2 = S[6 + i]
        out[i] = -q * e1 + p * e2
        out[3 + i] = q * T - w2 * e2
        out[6 + i] = -p * T + w2 * e1
        out[9 + i] = a * e2 - b * e1


@njit(cache=True, nogil=True)
def march_time(S0, x0, t0, t1, pos, alphas, M, kappa, max_steps, project):
    """RK4 march of the frame and curve point along x = x0 from t0 to t1.

    State S = (T, e1, e2, chi).  The step is ``kappa * t / (1 + max (x0-j)^2/4t)``
    so the chirp phase advances by O(kappa) per step.  Returns the final state,
    the time reached, the number of steps and the largest pre-projection defect.
    """
    S = S0.copy()
    k1 = np.empty(12)
    k2 = np.empty(12)
    k3 = np.empty(12)
    k4 = np.empty(12)
    Y = np.empty(12)
    dmax = 0.0
    for m in range(pos.size):
        d = (x0 - pos[m]) ** 2
        if d > dmax:
            dmax = d
    sgn = 1.0 if t1 >= t0 else -1.0
    t = t0
    drift = 0.0
    steps = 0
    while sgn * (t1 - t) > 0.0:
        if steps >= max_steps:
            return S, t, steps, drift
        h = kappa * t / (1.0 + dmax / (4.0 * t))
        if h <= 1e-300 or t + sgn * h == t:
            return S, t, steps, drift
        if h >= sgn * (t1 - t):
            h = sgn * (t1 - t)
        dt = sgn * h
        _rhs_time(S, t, x0, pos, alphas, M, k1)
        for i in range(12):
            Y[i] = S[i] + 0.5 * dt * k1[i]
        _rhs_time(Y, t + 0.5 * dt, x0, pos, alphas, M, k2)
        for i in range(12):
            Y[i] = S[i] + 0.5 * dt * k2[i]
        _rhs_time(Y, t + 0.5 * dt, x0, pos, alphas, M, k3)
        for i in range(12):
            Y[i] = S[i] + dt * k3[i]
        _rhs_time(Y, t + dt, x0, pos, alphas, M, k4)
        for i in range(12):
            S[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        if project:
            d = _gram_schmidt(S[:9])
            if d > drift:
                drift = d
        tn = t + dt
        t = t1 if sgn * (t1 - tn) <= 0.0 else tn
        steps += 1
    return S, t, steps, drift


@njit(cache=True, nogil=True)
def _rhs_frenet(S, y, alpha, out):
    tau = 0.5 * y
    for i in range(3):
        T = S[i]
        n = S[3 + i]
        b = S[6 + i]
        out[i] = alpha * n
        out[3 + i] = -alpha * T + tau * b
        out[6 + i] = -tau * n
        out[9 + i] = T


@njit(cache=True, nogil=True)
def march_frenet(S0, alpha, dy, nout, max_halvings, phase_tol):
    """Frenet march T' = alpha n, n' = -alpha T + (y/2) b, b' = -(y/2) n, G' = T.

    Outputs the state at y = k*dy, k = 0..nout-1 (dy may be negative).  Each
    output interval is split into 2^k substeps with the smallest k for which
    the torsion rotation per substep stays below ``phase_tol``.  Returns
    the samples, the largest pre-projection defect and a failure flag.
    """
    S = S0.copy()
    out = np.empty((nout, 12))
    out[0] = S
    k1 = np.empty(12)
    k2 = np.empty(12)
    k3 = np.empty(12)
    k4 = np.empty(12)
    Y = np.empty(12)
    drift = 0.0
    for k in range(1, nout):
        ya = (k - 1) * dy
        yb = k * dy
        ymax = max(abs(ya), abs(yb))
        nh = 0
        while abs(dy) / 2.0 ** nh * (0.5 * ymax + alpha) > phase_tol:
            nh += 1
            if nh > max_halvings:
                return out[:k], drift, True
        ns = 2 ** nh
        h = dy / ns
        for s in range(ns):
            y = ya + s * h
            _rhs_frenet(S, y, alpha, k1)
            for i in range(12):
                Y[i] = S[i] + 0.5 * h * k1[i]
            _rhs_frenet(Y, y + 0.5 * h, alpha, k2)
            for i in range(12):
                Y[i] = S[i] + 0.5 * h * k2[i]
            _rhs_frenet(Y, y + 0.5 * h, alpha, k3)
            for i in range(12):
                Y[i] = S[i] + h * k3[i]
            _rhs_frenet(Y, y + h, alpha, k4)
            for i in range(12):
                S[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            d = _gram_schmidt(S[:9])
            if d > drift:
                drift = d
        out[k] = S
    return out, drift, False


@njit(cache=True, nogil=True)
def fourier_samples(x, w, fx, xis):
    """sum_k w_k exp(2 pi i xi x_k) f(x_k) for each xi; f has 3 real components."""
    nq = xis.size
    out = np.zeros((nq, 3), dtype=np.complex128)
    for q in range(nq):
        s0 = 0j
        s1 = 0j
        s2 = 0j
        for k in range(x.size):
            e = w[k] * np.exp(1j * _TWO_PI * xis[q] * x[k])
            s0 += e * fx[k, 0]
            s1 += e * fx[k, 1]
            s2 += e * fx[k, 2]
        out[q, 0] = s0
        out[q, 1] = s1
        out[q, 2] = s2
    return out
