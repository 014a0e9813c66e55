"""One-corner self-similar solutions chi(t, x) = sqrt(t) G(x / sqrt(t)).

The profile G has constant curvature alpha and torsion y/2.  With the Frenet
frame equal to the canonical basis at y = 0, the profile equation
``G/2 - (y/2) G' = G' x G''`` forces ``G = y T + 2 alpha b``, hence
``G(0) = 2 alpha b(0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicHermiteSpline

from . import _kernels
from ._io import write_csv
from .errors import ConvergenceError, ValidationError
from .geometry import angle_from_alpha


@dataclass(frozen=True, eq=False)
class ProfileTrajectory:
    alpha: float
    y: np.ndarray
    G: np.ndarray
    frames: np.ndarray  # (n, 9): T, n, b
    drift: float

    @property
    def T(self):
        return self.frames[:, 0:3]

    @property
    def n(self):
        return self.frames[:, 3:6]

    @property
    def b(self):
        return self.frames[:, 6:9]

    @property
    def ymax(self) -> float:
        return float(self.y[-1])

    def ode_residual(self, k: np.ndarray) -> np.ndarray:
        """|G/2 - (y/2) G' - G' x G''| at interior sample indices, G'' by central differences."""
        k = np.asarray(k)
        h = self.y[1] - self.y[0]
        G2 = (self.G[k + 1] - 2 * self.G[k] + self.G[k - 1]) / h ** 2
        G1 = (self.G[k + 1] - self.G[k - 1]) / (2 * h)
        r = 0.5 * self.G[k] - 0.5 * self.y[k, None] * G1 - np.cross(G1, G2)
        return np.linalg.norm(r, axis=1)

    def _splines(self):
        if not hasattr(self, "_sp"):
            dT = self.alpha * self.n
            object.__setattr__(self, "_sp", (CubicHermiteSpline(self.y, self.G, self.T, axis=0),
                                             CubicHermiteSpline(self.y, self.T, dT, axis=0)))
        return self._sp

    def at(self, y):
        """Interpolated (G, T) at arbitrary y inside the trajectory."""
        y = np.asarray(y, dtype=float)
        if np.any(np.abs(y) > self.ymax):
            raise ValidationError(f"|y| exceeds the trajectory range {self.ymax}; extend Ymax")
        sG, sT = self._splines()
        T = sT(y)
        return sG(y), T / np.linalg.norm(T, axis=-1, keepdims=True)

    def write_csv(self, path):
        return write_csv(path, ["y", "Gx", "Gy", "Gz", "Tx", "Ty", "Tz"],
                         np.column_stack([self.y, self.G, self.T]))


def integrate_profile(alpha: float, Ymax: float = 200.0, dy: float = 0.01,
                      phase_tol: float = 0.02, max_halvings: int = 16) -> ProfileTrajectory:
    """Frenet march from the canonical basis at y = 0 in both directions.

    Each output interval dy is halved until the frame rotates by less than
    ``phase_tol`` radians per RK4 substep.
    """
    if not (math.isfinite(alpha) and alpha >= 0):
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    if not (Ymax > 0 and dy > 0 and dy < Ymax):
        raise ValidationError("need 0 < dy < Ymax")
    nout = int(round(Ymax / dy)) + 1
    dy = Ymax / (nout - 1)
    S0 = np.zeros(12)
    S0[0] = S0[4] = S0[8] = 1.0
    S0[9:12] = 2.0 * alpha * S0[6:9]
    outs = []
    drift = 0.0
    for sgn in (1.0, -1.0):
        o, d, failed = _kernels.march_frenet(S0, float(alpha), sgn * dy, nout, max_halvings,
                                             phase_tol)
        if failed:
            raise ValidationError(f"dy = {dy} cannot be refined enough below y = {len(o) * dy:.4g}")
        outs.append(o)
        drift = max(drift, d)
    both = np.vstack([outs[1][:0:-1], outs[0]])
    y = dy * np.arange(-(nout - 1), nout)
    return ProfileTrajectory(float(alpha), y, both[:, 9:12].copy(), both[:, 0:9].copy(), drift)


def _period_mean(traj: ProfileTrajectory, Y: float, side: int):
    """Mean and peak deviation of T over the last torsion period (width 4 pi / Y) before Y."""
    w = 4.0 * math.pi / Y
    y = side * traj.y
    m = (y >= Y - w) & (y <= Y)
    T = traj.T[m]
    yy = y[m]
    mean = trapezoid(T, yy, axis=0) / (yy[-1] - yy[0])
    return mean, float(np.max(np.linalg.norm(T - mean, axis=1)))


def asymptotic_tangents(traj: ProfileTrajectory, check: bool = True):
    """(T^-inf, T^+inf): period averages at Ymax and Ymax/2, Richardson-extrapolated in 1/y^2."""
    Y = traj.ymax
    out = []
    for side in (-1, 1):
        m1, a1 = _period_mean(traj, Y, side)
        m2, a2 = _period_mean(traj, Y / 2, side)
        if check and traj.alpha > 0 and a1 >= a2:
            raise ConvergenceError(f"oscillation of T does not decay (amplitude {a2:.3g} at "
                                   f"y = {Y / 2:.4g}, {a1:.3g} at y = {Y:.4g})")
        lim = (4.0 * m1 - m2) / 3.0
        out.append(lim / np.linalg.norm(lim))
    return out[0], out[1]


def measured_corner_angle(alpha: float, Ymax: float = 200.0, dy: float = 0.01) -> float:
    """Interior angle arccos(-T^-inf . T^+inf) of the profile's corner."""
    if not alpha >= 0:
        raise ValidationError(f"alpha must be >= 0, got {alpha}")
    tm, tp = asymptotic_tangents(integrate_profile(alpha, Ymax, dy))
    return float(np.arccos(np.clip(-np.dot(tm, tp), -1.0, 1.0)))


def angle_law_row(alpha: float, Ymax: float = 200.0, dy: float = 0.01) -> dict:
    th = measured_corner_angle(alpha, Ymax, dy)
    law = angle_from_alpha(alpha)
    return {"alpha": float(alpha), "theta_measured": th, "theta_law": law,
            "abs_err": abs(th - law)}


class SelfSimilar:
    """chi(t, x) = sqrt(t) G(x/sqrt(t)) and T(t, x) = T(x/sqrt(t)) for one corner at 0."""

    def __init__(self, alpha: float, Ymax: float = 200.0, dy: float = 0.01):
        self.alpha = float(alpha)
        self.traj = integrate_profile(alpha, Ymax, dy)

    def state(self, t, x):
        if not t > 0:
            raise ValidationError("t must be > 0")
        st = math.sqrt(t)
        G, T = self.traj.at(np.asarray(x, dtype=float) / st)
        return st * G, T

    def limit_point(self, x):
        """chi(0, x) = x T^+inf for x >= 0 and x T^-inf for x < 0."""
        tm, tp = asymptotic_tangents(self.traj)
        x = np.asarray(x, dtype=float)
        return np.where(x[..., None] >= 0, x[..., None] * tp, x[..., None] * tm)


def selfsimilar_state(t: float, x, alpha: float, Ymax: float = 200.0, dy: float = 0.01):
    """(point, tangent) of the self-similar solution at (t, x)."""
    return SelfSimilar(alpha, Ymax, dy).state(t, x)
