"""Frame and curve reconstruction from u through the parallel-frame systems.

In x (fixed t):  T_x = Re(conj(u) N),  N_x = -u T,           N = e1 + i e2.
In t (fixed x):  T_t = Im(conj(u_x) N),
                 N_t = -i u_x T + (i/2)(|u|^2 - M/t) N,
                 chi_t = Im(conj(u) N).

The reference frame is imposed at (t0, x0) and the geometry is compared to
the polygonal line a posteriori through a rigid rotation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.spatial.transform import Rotation

from . import _kernels
from ._io import write_csv
from .ansatz import AnsatzField
from .errors import IntegrationError, RefinementError, ValidationError
from .geometry import PolyLine

FRAME_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class Frame:
    T: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def __post_init__(self):
        for name in ("T", "e1", "e2"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(3))

    @classmethod
    def canonical(cls) -> "Frame":
        return cls(np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))

    @classmethod
    def from_array(cls, a) -> "Frame":
        a = np.asarray(a, dtype=float)
        return cls(a[0:3], a[3:6], a[6:9])

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.T, self.e1, self.e2])

    @property
    def N(self) -> np.ndarray:
        return self.e1 + 1j * self.e2

    def defect(self) -> float:
        """Largest deviation from a right-handed orthonormal triple."""
        m = np.stack([self.T, self.e1, self.e2])
        return float(max(np.max(np.abs(m @ m.T - np.eye(3))), abs(np.linalg.det(m) - 1.0)))

    def check(self, tol: float = FRAME_TOL) -> "Frame":
        if not self.defect() <= tol:
            raise ValidationError(f"frame is not orthonormal (defect {self.defect():.3g})")
        return self


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_min + k dx, k = 0..n-1, with x_max on the grid."""

    x_min: float
    x_max: float
    dx: float

    def __post_init__(self):
        if not (self.dx > 0 and self.x_max > self.x_min):
            raise ValidationError("grid needs dx > 0 and x_max > x_min")
        n = (self.x_max - self.x_min) / self.dx
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ValidationError("grid length must be a multiple of dx")

    @property
    def n(self) -> int:
        return int(round((self.x_max - self.x_min) / self.dx)) + 1

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    def index_of(self, x0: float) -> int:
        k = (x0 - self.x_min) / self.dx
        if abs(k - round(k)) > 1e-9 * max(1.0, abs(k)) or not 0 <= round(k) < self.n:
            raise ValidationError(f"x0 = {x0} is not a grid node")
        return int(round(k))


@dataclass(frozen=True, eq=False)
class FrameField:
    """Frames and T_x samples on a grid at one time."""

    t: float
    grid: Grid
    frames: np.ndarray
    tx: np.ndarray
    drift: float = 0.0
    substeps: int = 1
    fourier: tuple = None  # (xi, sums) when requested during the march

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    @property
    def T(self) -> np.ndarray:
        return self.frames[:, 0:3]

    @property
    def e1(self) -> np.ndarray:
        return self.frames[:, 3:6]

    @property
    def e2(self) -> np.ndarray:
        return self.frames[:, 6:9]

    @property
    def N(self) -> np.ndarray:
        return self.e1 + 1j * self.e2

    def frame(self, k: int) -> Frame:
        return Frame.from_array(self.frames[k])

    def orthonormality_defect(self) -> float:
        m = self.frames.reshape(-1, 3, 3)
        g = np.einsum("kij,klj->kil", m, m) - np.eye(3)
        return float(np.max(np.abs(g))) if len(m) else 0.0

    def rotated(self, R: np.ndarray) -> "FrameField":
        fr = (self.frames.reshape(-1, 3, 3) @ R.T).reshape(-1, 9)
        return FrameField(self.t, self.grid, fr, self.tx @ R.T, self.drift, self.substeps,
                          self.fourier)

    def write_csv(self, path):
        """Columns x, Tx,Ty,Tz, e1x..e2z, txx,txy,txz."""
        head = ["x", "Tx", "Ty", "Tz", "e1x", "e1y", "e1z", "e2x", "e2y", "e2z",
                "txx", "txy", "txz"]
        return write_csv(path, head, np.column_stack([self.x, self.frames, self.tx]))


@dataclass(frozen=True, eq=False)
class Curve:
    t: float
    grid: Grid
    points: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def write_csv(self, path):
        return write_csv(path, ["x", "px", "py", "pz"], np.column_stack([self.x, self.points]))


@dataclass(frozen=True, eq=False)
class TimeMarch:
    frame: Frame
    point: np.ndarray
    t: float
    steps: int
    drift: float


def _corner_arrays(ansatz: AnsatzField):
    return (np.ascontiguousarray(ansatz.pos, dtype=float),
            np.ascontiguousarray(ansatz.alpha, dtype=complex))


def march_in_time(ansatz: AnsatzField, x0: float, frame0: Frame, t0: float, t_target: float,
                  point0=None, kappa: float = 0.02, max_steps: int = 50_000_000,
                  project: bool = True) -> TimeMarch:
    """Frame and curve point along x = x0 from t0 to t_target (either direction).

    The step ``kappa t / (1 + max_j (x0 - j)^2 / 4t)`` keeps the phase change of
    every coefficient per step of order kappa; coefficients grow like 1/t.
    """
    if not (t0 > 0 and t_target > 0 and math.isfinite(t0) and math.isfinite(t_target)):
        raise ValidationError("times must be positive and finite")
    if not 0 < kappa <= 0.5:
        raise ValidationError("kappa must lie in (0, 0.5]")
    S0 = np.concatenate([frame0.as_array(),
                         np.zeros(3) if point0 is None else np.asarray(point0, dtype=float)])
    pos, al = _corner_arrays(ansatz)
    S, t, steps, drift = _kernels.march_time(S0, float(x0), float(t0), float(t_target), pos, al,
                                             float(ansatz.M), float(kappa), int(max_steps),
                                             bool(project))
    if t != t_target:
        raise IntegrationError(f"time march stopped at t = {t:.6g} after {steps} steps "
                               f"(target {t_target:.6g})", reached=t)
    return TimeMarch(Frame.from_array(S[:9]), S[9:].copy(), t, int(steps), float(drift))


def integrate_frame_in_time(ansatz: AnsatzField, x0: float, frame0: Frame, t0: float,
                            t_target: float, kappa: float = 0.02) -> Frame:
    return march_in_time(ansatz, x0, frame0, t0, t_target, kappa=kappa).frame


def _space_frequency(ansatz: AnsatzField, t: float, lo: float, hi: float, xi_max: float = 0.0):
    """Bound on the local angular frequency of the integrand over [lo, hi]."""
    if len(ansatz.pos) == 0:
        return 2.0 * math.pi * xi_max
    dmax = max(abs(lo - ansatz.pos.min()), abs(hi - ansatz.pos.max()),
               abs(hi - ansatz.pos.min()), abs(lo - ansatz.pos.max()))
    amp = float(np.sum(np.abs(ansatz.alpha))) / math.sqrt(t)
    return dmax / (2.0 * t) + amp + 2.0 * math.pi * xi_max


def integrate_frame_in_space(ansatz: AnsatzField, t: float, frame_at_x0: Frame, grid: Grid,
                             x0: float = 0.0, substeps: int | None = None, kappa: float = 0.2,
                             xi=None, L: float | None = None, taper: float = 2.0,
                             project: bool = True, threads: int = 2) -> FrameField:
    """RK4 march left and right from x0 with per-step Gram-Schmidt reprojection.

    Each grid interval is split into ``substeps`` RK4 steps (chosen from the
    local oscillation when None).  When ``xi`` is given, the tapered
    quadrature ``int w(x) exp(2 pi i xi x) T_x dx`` over the grid is
    accumulated on the fly and stored in ``FrameField.fourier``.
    """
    if not (t > 0 and math.isfinite(t)):
        raise ValidationError("t must be > 0")
    k0 = grid.index_of(x0)
    xi = np.zeros(0) if xi is None else np.ascontiguousarray(np.atleast_1d(xi), dtype=float)
    xi_max = float(np.max(np.abs(xi))) if xi.size else 0.0
    omega = _space_frequency(ansatz, t, grid.x_min, grid.x_max, xi_max)
    need = max(1, math.ceil(grid.dx * omega / kappa))
    if substeps is None:
        substeps = need
    elif grid.dx / substeps * omega > 1.0:
        raise RefinementError(f"step {grid.dx / substeps:.3g} too coarse for local frequency "
                              f"{omega:.3g}", suggested=kappa / omega * substeps)
    if L is None:
        L = max(abs(grid.x_min), abs(grid.x_max))
    pos, al = _corner_arrays(ansatz)
    camp = np.ascontiguousarray(ansatz.amplitudes(t) / math.sqrt(t)) if len(pos) else al
    h = grid.dx / substeps
    F0 = frame_at_x0.as_array()
    jobs = []
    n_right = (grid.n - 1 - k0) * substeps
    n_left = k0 * substeps

    def run(step, nsteps):
        return _kernels.march_space(F0, float(x0), step, nsteps, pos, camp, float(t), xi,
                                    float(L), float(taper), substeps, 64, bool(project))

    with ThreadPoolExecutor(max_workers=max(1, min(2, threads))) as ex:
        jobs = [ex.submit(run, h, n_right), ex.submit(run, -h, n_left)]
        (_, sr, ar, dr), (_, sl, al_, dl) = [j.result() for j in jobs]
    frames = np.vstack([sl[::-1], sr[1:]])
    u = ansatz.eval_u(t, grid.x)
    tx = u.real[:, None] * frames[:, 3:6] + u.imag[:, None] * frames[:, 6:9]
    fourier = (xi, ar - al_) if xi.size else None
    return FrameField(float(t), grid, frames, tx, float(max(dr, dl)), int(substeps), fourier)


def reconstruct_curve(field: FrameField, anchor=(0.0, (0.0, 0.0, 0.0))) -> Curve:
    """chi(x) = P + int_{x0}^x T by cumulative Simpson from the anchor node."""
    x0, P = anchor
    k0 = field.grid.index_of(x0)
    x = field.x
    T = field.T
    if len(x) < 3:
        raise ValidationError("curve reconstruction needs at least three grid nodes")
    cum = cumulative_simpson(T, x=x, axis=0, initial=0.0)
    pts = cum - cum[k0] + np.asarray(P, dtype=float)
    return Curve(field.t, field.grid, pts)


class HasimotoSampler:
    """Frames imposed at (t0, x0) and propagated to any (t, grid) on request."""

    def __init__(self, ansatz: AnsatzField, t0: float = 1.0, x0: float = 0.0,
                 frame0: Frame | None = None, point0=None, kappa_t: float = 0.02):
        self.ansatz = ansatz
        self.t0 = float(t0)
        self.x0 = float(x0)
        self.frame0 = (frame0 or Frame.canonical()).check()
        self.point0 = np.zeros(3) if point0 is None else np.asarray(point0, dtype=float)
        self.kappa_t = kappa_t
        self._cache = {}

    def at_time(self, t: float) -> TimeMarch:
        key = float(t)
        if key not in self._cache:
            self._cache[key] = march_in_time(self.ansatz, self.x0, self.frame0, self.t0, key,
                                             self.point0, kappa=self.kappa_t)
        return self._cache[key]

    def field(self, t: float, grid: Grid, **kw) -> FrameField:
        return integrate_frame_in_space(self.ansatz, t, self.at_time(t).frame, grid, self.x0, **kw)

    def curve(self, t: float, grid: Grid, **kw) -> Curve:
        fld = self.field(t, grid, **kw)
        return reconstruct_curve(fld, (self.x0, self.at_time(t).point))


@dataclass(frozen=True, eq=False)
class Alignment:
    """Rotation taking measured segment directions onto the canonical polyline."""

    R: np.ndarray
    measured: np.ndarray
    residual_angle: float

    def apply(self, v):
        return np.asarray(v) @ self.R.T


def _quarter_points(lo: float, hi: float, margin: float, x_min: float, x_max: float):
    lo = max(lo, x_min + margin)
    hi = min(hi, x_max - margin)
    q = np.arange(math.ceil(2 * lo - 0.5), math.floor(2 * hi - 0.5) + 1) / 2.0 + 0.25
    return q[(q > lo) & (q < hi)]


def segment_directions(field: FrameField, poly: PolyLine, margin: float = 0.1,
                       reach: float = 3.0) -> np.ndarray:
    """Mean of T over the quarter points (x in 1/4 + Z/2) inside each segment.

    Outer segments use quarter points up to ``reach`` beyond the last corner.
    """
    p = poly.corners.position_array
    edges = np.concatenate([[(p[0] if len(p) else 0.0) - reach], p, [(p[-1] if len(p) else 0.0) + reach]])
    out = []
    for k in range(len(edges) - 1):
        q = _quarter_points(edges[k], edges[k + 1], margin, field.x[0], field.x[-1])
        if q.size == 0:
            raise ValidationError("grid does not cover every segment")
        T = np.column_stack([np.interp(q, field.x, field.T[:, i]) for i in range(3)])
        m = T.mean(axis=0)
        out.append(m / np.linalg.norm(m))
    return np.array(out)


def align_to_polyline(field: FrameField, poly: PolyLine, **kw) -> Alignment:
    meas = segment_directions(field, poly, **kw)
    ref = poly.directions
    rot, _ = Rotation.align_vectors(ref, meas)
    R = rot.as_matrix()
    ang = np.arccos(np.clip(np.einsum("ij,ij->i", meas @ R.T, ref), -1.0, 1.0))
    return Alignment(R, meas, float(np.max(ang)))


def polyline_limit_error(t: float, poly: PolyLine, field=None, delta_d: float = 0.05,
                         alignment: Alignment | None = None, return_excluded: bool = False):
    """sup |T(t, x) - T(0, x)| over grid points at distance >= delta_d from Z/2.

    At t = 0 the field is the polyline itself and the error is zero.  Otherwise
    the field is first rotated onto the polyline (``align_to_polyline``).
    """
    if t < 0:
        raise ValidationError("t must be >= 0")
    if t == 0:
        x = field.x if isinstance(field, FrameField) else np.asarray(field, dtype=float)
        keep = np.abs(x * 2 - np.round(x * 2)) / 2 >= delta_d
        T = poly.direction_at(x)
        err = float(np.max(np.linalg.norm(T[keep] - poly.direction_at(x[keep]), axis=1),
                           initial=0.0))
        return (err, int(np.sum(~keep))) if return_excluded else err
    if not isinstance(field, FrameField):
        raise ValidationError("t > 0 needs a FrameField")
    if alignment is None:
        alignment = align_to_polyline(field, poly)
    x = field.x
    keep = np.abs(x * 2 - np.round(x * 2)) / 2 >= delta_d
    T = alignment.apply(field.T[keep])
    err = float(np.max(np.linalg.norm(T - poly.direction_at(x[keep]), axis=1), initial=0.0))
    return (err, int(np.sum(~keep))) if return_excluded else err
