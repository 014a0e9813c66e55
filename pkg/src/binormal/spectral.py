"""Fourier transform of T_x in the resonance windows and the growth diagnostics.

Convention (normative for every stored spectrum):

    T^_x(t, xi) = int exp(+i 2 pi x xi) T_x(t, x) dx,

evaluated by direct quadrature over [-L, L] with a raised-cosine taper of
width ``taper`` at both ends.  Since T_x is real, T^_x(-xi) = conj(T^_x(xi)).

Window m (m >= 1) at time t is |xi -+ m/(2 pi t)| <= 1/n.  Writing
s = 4 pi t xi, corners j and r interact when |j - r + s| < 2 n t.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy.integrate import trapezoid

from . import _kernels
from ._io import write_csv
from .ansatz import AnsatzField
from .errors import (AdmissibilityError, BinormalError, RefinementError, ValidationError)
from .geometry import (GrowthVector, PolyLine, alpha_from_angle, growth_vector_V,
                       growth_vector_Vm)
from .hasimoto import FrameField, Grid, HasimotoSampler, align_to_polyline

XI_CONVENTION = "exp(+i2pi x xi)"
TAPER = 2.0


def default_L(positions) -> float:
    """max |corner| + 2N + 4 with 2N the corner count rounded up to even."""
    p = np.asarray(positions, dtype=float)
    n_pairs = max(1, math.ceil(len(p) / 2))
    return float((np.max(np.abs(p)) if len(p) else 0.0) + 2 * n_pairs + 4)


def taper_weight(x, L: float, tw: float = TAPER) -> np.ndarray:
    ax = np.abs(np.asarray(x, dtype=float))
    w = 0.5 * (1.0 + np.cos(np.pi * np.clip((ax - (L - tw)) / tw, 0.0, 1.0)))
    return np.where(ax >= L, 0.0, w)


@dataclass(frozen=True)
class Window:
    m: int
    t: float
    n: int
    center: float
    radius: float

    @property
    def centers(self):
        return (self.center, -self.center)

    def contains(self, xi) -> np.ndarray:
        """+1 / -1 for the window containing xi, 0 otherwise."""
        xi = np.asarray(xi, dtype=float)
        return np.where(np.abs(xi - self.center) <= self.radius, 1,
                        np.where(np.abs(xi + self.center) <= self.radius, -1, 0))


def xi_window(m: int, t: float, n: int) -> Window:
    if int(m) != m or m < 1:
        raise ValidationError("window index m must be an integer >= 1")
    if not t > 0 or n < 1:
        raise ValidationError("need t > 0 and n >= 1")
    return Window(int(m), float(t), int(n), m / (2.0 * math.pi * t), 1.0 / n)


def tag_windows(xi, t: float, n: int):
    """(m, sign) of the window containing each xi; (0, 0) off-window."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    m = np.rint(np.abs(xi) * 2.0 * math.pi * t).astype(int)
    inside = (m >= 1) & (np.abs(np.abs(xi) - m / (2.0 * math.pi * t)) <= 1.0 / n)
    return np.where(inside, m, 0), np.where(inside, np.sign(xi).astype(int), 0)


@dataclass(frozen=True, eq=False)
class Spectrum:
    t: float
    xi: np.ndarray
    values: np.ndarray
    n: int | None = None
    L: float = 0.0
    taper: float = TAPER
    two_grid_error: float = float("nan")
    window_m: np.ndarray = field(default=None)
    window_sign: np.ndarray = field(default=None)

    def __post_init__(self):
        xi = np.atleast_1d(np.asarray(self.xi, dtype=float))
        v = np.asarray(self.values, dtype=complex).reshape(len(xi), 3)
        if not np.all(np.isfinite(v)):
            raise BinormalError("spectrum contains non-finite values")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "values", v)
        if self.n is not None:
            wm, ws = tag_windows(xi, self.t, self.n)
        else:
            wm, ws = np.zeros(len(xi), int), np.zeros(len(xi), int)
        object.__setattr__(self, "window_m", wm)
        object.__setattr__(self, "window_sign", ws)

    @property
    def abs(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=1)

    def rotated(self, R) -> "Spectrum":
        return Spectrum(self.t, self.xi, self.values @ np.asarray(R).T, self.n, self.L,
                        self.taper, self.two_grid_error)

    def subset(self, mask) -> "Spectrum":
        return Spectrum(self.t, self.xi[mask], self.values[mask], self.n, self.L, self.taper,
                        self.two_grid_error)

    def write_csv(self, path):
        v = self.values
        rows = [(self.xi[k], v[k, 0].real, v[k, 0].imag, v[k, 1].real, v[k, 1].imag,
                 v[k, 2].real, v[k, 2].imag, self.abs[k], int(self.window_m[k]),
                 int(self.window_sign[k])) for k in range(len(self.xi))]
        return write_csv(path, ["xi", "re_x", "im_x", "re_y", "im_y", "re_z", "im_z", "abs",
                                "window_m", "window_sign"], rows)


def _rel_gap(a, b) -> float:
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    return float(np.max(np.abs(a - b), initial=0.0)) / scale


def _sampled_transform(x, fx, xi, L, tw):
    dx = x[1] - x[0]
    w = taper_weight(x, L, tw) * dx
    w[0] *= 0.5
    w[-1] *= 0.5
    return _kernels.fourier_samples(np.ascontiguousarray(x), np.ascontiguousarray(w),
                                    np.ascontiguousarray(fx, dtype=float), xi)


def march_transform(sampler: HasimotoSampler, t: float, xi, L: float, taper: float = TAPER,
                    dx_out: float = 1e-3, kappa: float = 0.2, check: bool = True,
                    threads: int = 2):
    """Fused space march returning (FrameField on [-L, L], transform values, two-grid gap).

    The gap compares substep h with 2h (RK4, so the fine error is about gap/15).
    """
    xi = np.ascontiguousarray(np.atleast_1d(xi), dtype=float)
    k = max(1, round(L / dx_out))
    grid = Grid(-L, L, L / k)
    fld = sampler.field(t, grid, kappa=kappa, xi=xi, L=L, taper=taper, threads=threads)
    vals = fld.fourier[1]
    gap = float("nan")
    if check:
        coarse = sampler.field(t, grid, substeps=max(1, fld.substeps // 2), xi=xi, L=L,
                               taper=taper, threads=threads)
        if fld.substeps >= 2:
            gap = _rel_gap(vals, coarse.fourier[1])
        else:
            gap = 0.0
    return fld, vals, gap


def fourier_transform_Tx(source, xi, t: float | None = None, L: float | None = None,
                         taper: float = TAPER, n: int | None = None, dx: float | None = None,
                         check: bool = True, tol: float = 1e-4, kappa: float = 0.2) -> Spectrum:
    """Tapered quadrature of exp(2 pi i x xi) T_x over [-L, L].

    ``source`` is a FrameField (samples), a HasimotoSampler (fused march at
    time ``t``) or a callable x -> T_x(x) of shape (len(x), 3) sampled with
    spacing ``dx``.  With ``check`` the result is recomputed on a grid twice
    as coarse and a relative disagreement above ``tol`` raises RefinementError.
    """
    xi = np.ascontiguousarray(np.atleast_1d(xi), dtype=float)
    if isinstance(source, HasimotoSampler):
        if t is None:
            raise ValidationError("a sampler source needs t")
        L = default_L(source.ansatz.pos) if L is None else L
        _, vals, gap = march_transform(source, t, xi, L, taper, kappa=kappa, check=check)
    elif isinstance(source, FrameField):
        t = source.t
        L = min(-source.x[0], source.x[-1]) if L is None else L
        m = (source.x >= -L - 1e-12) & (source.x <= L + 1e-12)
        x, fx = source.x[m], source.tx[m]
        if x[0] > -L + 1e-9 or x[-1] < L - 1e-9:
            raise ValidationError("field does not cover [-L, L]")
        vals = _sampled_transform(x, fx, xi, L, taper)
        gap = _rel_gap(vals, _sampled_transform(x[::2], fx[::2], xi, L, taper)) if check else float("nan")
        if check and (len(x) - 1) % 2:
            gap = float("nan")
    elif callable(source):
        if L is None or dx is None:
            raise ValidationError("a callable source needs L and dx")
        k = max(2, 2 * round(L / dx))
        x = np.linspace(-L, L, k + 1)
        fx = np.asarray(source(x), dtype=float).reshape(len(x), 3)
        vals = _sampled_transform(x, fx, xi, L, taper)
        gap = _rel_gap(vals, _sampled_transform(x[::2], fx[::2], xi, L, taper)) if check else float("nan")
        t = float("nan") if t is None else t
    else:
        raise ValidationError("unsupported source for the Fourier transform")
    if check and gap > tol:
        raise RefinementError(f"two-grid disagreement {gap:.3g} exceeds {tol:.3g}",
                              suggested=0.5)
    return Spectrum(float(t), xi, vals, n, float(L), float(taper), gap)


def resonant_pairs(t: float, xi: float, n: int, positions) -> list:
    """Corner pairs (j, r) with |j - r + 4 pi t xi| < 2 n t."""
    s = 4.0 * math.pi * t * xi
    lim = 2.0 * n * t
    p = [int(v) for v in positions]
    return [(j, r) for j in p for r in p if abs(j - r + s) < lim]


def _log_kernel_integral(x, f, a, b, rad):
    """int_{|x-a|>rad, |x-b|>rad} (1/(x-a) - 1/(x-b)) f(x) dx, f piecewise linear on x.

    Breakpoints at the excision edges are inserted; on each piece f is
    frozen at the midpoint and the kernel is integrated exactly.
    """
    cuts = np.array([a - rad, a + rad, b - rad, b + rad])
    cuts = cuts[(cuts > x[0]) & (cuts < x[-1])]
    xb = np.union1d(x, cuts)
    lo, hi = xb[:-1], xb[1:]
    mid = 0.5 * (lo + hi)
    keep = (np.abs(mid - a) > rad) & (np.abs(mid - b) > rad) & (hi > lo)
    lo, hi, mid = lo[keep], hi[keep], mid[keep]

    def prim(y):
        return np.log(np.abs(y - a)) - np.log(np.abs(y - b))

    wts = prim(hi) - prim(lo)
    fm = np.stack([np.interp(mid, x, f[:, i].real) + 1j * np.interp(mid, x, f[:, i].imag)
                   for i in range(f.shape[1])], axis=1)
    return wts @ fm


def resonant_predictor(t: float, xi, n: int, field, ansatz: AnsatzField,
                       L: float | None = None, taper: float = TAPER) -> np.ndarray:
    """Resonant-sum approximation of T^_x(t, xi) from T(t, .):

        i sum_pairs conj(A_j) A_r exp(-i (j^2 - r^2)/4t)
          int_{|x-j-s|>1/n, |x-r+s|>1/n} exp(i x (j-r+s)/2t) (1/(x-j-s) - 1/(x-r+s)) T dx

    with s = 4 pi t xi, the same taper as the transform, and T given by a
    FrameField or an (x, T) pair.
    """
    if isinstance(field, FrameField):
        x, T = field.x, field.T
    else:
        x, T = (np.asarray(v, dtype=float) for v in field)
    if len(x) < 2:
        raise ValidationError("predictor needs at least two samples")
    if 1.0 / n < 2.0 * (x[1] - x[0]):
        raise RefinementError("excision radius 1/n is below the grid resolution",
                              suggested=0.5 / n)
    L = min(-x[0], x[-1]) if L is None else L
    w = taper_weight(x, L, taper)
    xis = np.atleast_1d(np.asarray(xi, dtype=float))
    A = {int(p): a for p, a in zip(ansatz.pos, ansatz.amplitudes(t))}
    out = np.zeros((len(xis), 3), dtype=complex)
    for q, xv in enumerate(xis):
        s = 4.0 * math.pi * t * xv
        for j, r in resonant_pairs(t, xv, n, A.keys()):
            c = 1j * np.conj(A[j]) * A[r] * np.exp(-1j * (j * j - r * r) / (4.0 * t))
            f = (w * np.exp(1j * x * (j - r + s) / (2.0 * t)))[:, None] * T
            out[q] += c * _log_kernel_integral(x, f, j + s, r - s, 1.0 / n)
    return out if np.ndim(xi) else out[0]


# --- energy density -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class XiEstimate:
    value: float
    intervals: list
    per_interval: list
    excluded: list
    target: float = float("nan")

    def __float__(self):
        return float(self.value)

    @property
    def rel_err(self) -> float:
        return abs(self.value - self.target) / self.target if self.target else float("nan")


def energy_density_Xi(spectrum: Spectrum, k_range) -> XiEstimate:
    """Mean over unit intervals [k, k+1] of the trapezoid integral of |T^_x|^2.

    Intervals touching a resonance window of the spectrum are excluded.
    """
    vals, used, excl = [], [], []
    a2 = np.sum(np.abs(spectrum.values) ** 2, axis=1)
    for k in k_range:
        m = (spectrum.xi >= k - 1e-9) & (spectrum.xi <= k + 1 + 1e-9)
        xs = spectrum.xi[m]
        if len(xs) < 2 or xs.min() > k + 1e-9 or xs.max() < k + 1 - 1e-9:
            raise ValidationError(f"spectrum does not cover [{k}, {k + 1}]")
        if spectrum.n is not None and spectrum.t > 0:
            lo_m = math.floor(2 * math.pi * spectrum.t * (abs(k) - 1.0 / spectrum.n))
            hit = False
            for mm in range(max(1, lo_m), lo_m + 3):
                c = mm / (2 * math.pi * spectrum.t)
                for sgn in (1, -1):
                    if sgn * c + 1.0 / spectrum.n >= k and sgn * c - 1.0 / spectrum.n <= k + 1:
                        hit = True
            if hit:
                excl.append(int(k))
                continue
        order = np.argsort(xs)
        vals.append(float(trapezoid(a2[m][order], xs[order])))
        used.append(int(k))
    if not vals:
        raise ValidationError("every interval overlaps a resonance window")
    return XiEstimate(float(np.mean(vals)), used, vals, excl)


def xi_unit_intervals(t: float, count: int = 2, s_range=(0.3, 0.7)) -> list:
    """``count`` consecutive unit intervals centred in 4 pi t xi in ``s_range``."""
    lo, hi = (s / (4.0 * math.pi * t) for s in s_range)
    if hi - lo < count:
        raise ValidationError("t too large for the requested number of unit intervals")
    k0 = math.floor(0.5 * (lo + hi) - count / 2)
    return list(range(k0, k0 + count))


def measure_Xi(sampler: HasimotoSampler, t: float, count: int = 2, per_unit: int = 48,
               n: int | None = None, kappa: float = 0.2, check: bool = True) -> XiEstimate:
    ks = xi_unit_intervals(t, count)
    xi = np.concatenate([k + np.arange(per_unit) / per_unit for k in ks] + [[ks[-1] + 1.0]])
    spec = fourier_transform_Tx(sampler, xi, t=t, n=n, kappa=kappa, check=check)
    est = energy_density_Xi(spec, ks)
    return XiEstimate(est.value, est.intervals, est.per_interval, est.excluded,
                      4.0 * math.pi * sampler.ansatz.M)


# --- off-window bound -----------------------------------------------------

def offwindow_xi(t: float, n_pairs: int = 1, count: int = 16, seed: int = 0) -> np.ndarray:
    """Frequencies with s = 4 pi t xi in [0.05, 0.45] or [2N + 1.55, 2N + 1.95].

    Both bands keep |s -+ 2m| >= 3/2 for every window m <= N; placement is
    drawn from ``seed``.
    """
    rng = np.random.default_rng(seed)
    lo = rng.uniform(0.05, 0.45, count - count // 2)
    hi = rng.uniform(2 * n_pairs + 1.55, 2 * n_pairs + 1.95, count // 2)
    return np.sort(np.concatenate([lo, hi])) / (4.0 * math.pi * t)


def offwindow_mask(xi, t: float, n_pairs: int = 1) -> np.ndarray:
    s = 4.0 * math.pi * t * np.asarray(xi, dtype=float)
    m = np.arange(1, n_pairs + 1)
    return np.all(np.abs(np.abs(s)[:, None] - 2 * m) >= 1.5, axis=1)


def offwindow_check(t: float, spectrum: Spectrum, n: int | None = None,
                    n_pairs: int = 1) -> float:
    """sup over off-window xi of |T^_x| * sqrt(t n^2); 0 when no entry qualifies."""
    n = spectrum.n if n is None else n
    if n is None:
        raise ValidationError("offwindow_check needs n")
    mask = offwindow_mask(spectrum.xi, t, n_pairs) & (spectrum.window_m == 0)
    if not np.any(mask):
        return 0.0
    return float(np.max(spectrum.abs[mask]) * math.sqrt(t * n * n))


# --- admissible times -----------------------------------------------------

def load_calibration(path=None) -> dict:
    if path is None:
        text = resources.files("binormal").joinpath("data/calibration.json").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    return json.loads(text)


def _constants(theta: float, cal: dict) -> dict:
    c = dict(cal["constants"])
    for key, over in cal.get("per_theta", {}).items():
        if abs(float(key) - theta) < 1e-9:
            c.update(over)
    return c


def admissible_interval(theta: float, n: int, calibration: dict | None = None):
    """(lower, upper) bounds of tau = t n^2: (t_tilde / log^2 n, t_theta)."""
    cal = load_calibration() if calibration is None else calibration
    c = _constants(theta, cal)
    if n < 2:
        raise AdmissibilityError("n must be >= 2", required_n=int(c["n_theta"]))
    return c["t_tilde"] / math.log(n) ** 2, c["t_theta"]


def admissible_time(theta: float, n: int, snap_8pi: bool = False,
                    calibration: dict | None = None) -> float:
    """t = tau*/n^2, tau* the geometric mean of the admissible tau interval.

    With ``snap_8pi`` the nearest t with 1/t in 8 pi Z inside the interval.
    """
    cal = load_calibration() if calibration is None else calibration
    c = _constants(theta, cal)
    req = max(int(c["n_theta"]), math.floor(math.exp(math.sqrt(c["t_tilde"] / c["t_theta"]))) + 1)
    if n < 2:
        raise AdmissibilityError(f"n = {n} is below the admissible range; need n >= {req}",
                                 required_n=req)
    lo, hi = admissible_interval(theta, n, cal)
    if n < c["n_theta"] or lo >= hi:
        raise AdmissibilityError(f"no admissible time for n = {n}; need n >= {req}",
                                 required_n=req)
    t = math.sqrt(lo * hi) / n ** 2
    if snap_8pi:
        k0 = round(1.0 / (8.0 * math.pi * t))
        for k in sorted(range(max(1, k0 - 2), k0 + 3), key=lambda k: abs(k - k0)):
            ts = 1.0 / (8.0 * math.pi * k)
            if lo < ts * n * n < hi:
                return ts
        raise AdmissibilityError(f"no t with 1/t in 8 pi Z inside the interval for n = {n}",
                                 required_n=req)
    return t


def snap_index(t: float) -> float:
    """1/(8 pi t); an integer exactly when t is snapped."""
    return 1.0 / (8.0 * math.pi * t)


# --- growth scan ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GrowthEntry:
    n: int
    t: float
    sign: int
    delta: float
    xi: float
    measured: np.ndarray
    center: np.ndarray
    band: float
    predictor: np.ndarray

    @property
    def deviation(self) -> float:
        return float(np.linalg.norm(self.measured - self.center))

    @property
    def passed(self) -> bool:
        return self.deviation <= self.band

    @property
    def predictor_distance(self) -> float:
        return float(np.linalg.norm(self.measured - self.predictor))

    def to_dict(self) -> dict:
        v = self.measured
        return {"n": self.n, "t": self.t, "sign": self.sign, "delta": self.delta, "xi": self.xi,
                "measured": [v[0].real, v[0].imag, v[1].real, v[1].imag, v[2].real, v[2].imag],
                "center_mag": float(np.linalg.norm(self.center)), "band": self.band,
                "deviation": self.deviation, "predictor_distance": self.predictor_distance,
                "pass": self.passed}


@dataclass(eq=False)
class GrowthReport:
    theta: float
    N_corners: int
    m: int
    V: GrowthVector
    V_from_measured: np.ndarray
    alignment_residual: float
    entries: list = field(default_factory=list)
    n_values: list = field(default_factory=list)
    t_values: list = field(default_factory=list)
    offwindow: dict = field(default_factory=dict)
    logt_stat: dict = field(default_factory=dict)
    two_grid: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    slope_fit: dict = field(default_factory=dict)
    spectra: dict = field(default_factory=dict)

    def for_n(self, n: int) -> list:
        return [e for e in self.entries if e.n == n]

    def measured_peak(self, n: int) -> np.ndarray:
        e = [e for e in self.for_n(n) if e.sign == 1 and e.delta == 0.0]
        return e[0].measured if e else np.full(3, np.nan, dtype=complex)

    def predicted_center(self, n: int) -> np.ndarray:
        return self.V.value * math.log(n)

    def band_radius(self, n: int) -> float:
        return 0.5 * self.V.magnitude * math.log(n)

    def onwindow_peak(self, n: int) -> float:
        return max((float(np.linalg.norm(e.measured)) for e in self.for_n(n)), default=float("nan"))

    @property
    def pass_flags(self) -> dict:
        return {n: (n not in self.failures and bool(self.for_n(n))
                    and all(e.passed for e in self.for_n(n))) for n in self.n_values}

    def to_dict(self) -> dict:
        v = self.V.value
        return {
            "theta": self.theta, "N": self.N_corners // 2, "m": self.m,
            "V": [v[0].real, v[0].imag, v[1].real, v[1].imag, v[2].real, v[2].imag],
            "V_degenerate": self.V.degenerate,
            "V_from_measured": [c for z in self.V_from_measured for c in (z.real, z.imag)],
            "alignment_residual_rad": self.alignment_residual,
            "entries": [e.to_dict() for e in self.entries],
            "pass_flags": {str(k): v for k, v in self.pass_flags.items()},
            "offwindow_stat": {str(k): v for k, v in self.offwindow.items()},
            "logt_stat": {str(k): v for k, v in self.logt_stat.items()},
            "two_grid_gap": {str(k): v for k, v in self.two_grid.items()},
            "failures": {str(k): v for k, v in self.failures.items()},
            "slope_fit": self.slope_fit,
            "xi_convention": XI_CONVENTION,
        }


def _growth_vector(poly: PolyLine, m: int) -> GrowthVector:
    k = len(poly.corners)
    if k < 2:
        return GrowthVector(np.zeros(3, dtype=complex), True)
    if k == 2 and m == 1:
        return growth_vector_V(poly)
    return growth_vector_Vm(poly, m)


def _v_from_directions(d: np.ndarray, a2: float, m: int) -> np.ndarray:
    k = len(d) - 1
    if k < 2:
        return np.zeros(3, dtype=complex)
    N = k // 2
    return 1j * a2 * (d[0] - d[m] - d[2 * N - m] + d[2 * N])


def growth_scan(poly: PolyLine, n_values, m: int = 1, calibration: dict | None = None,
                threads: int = 1, kappa: float = 0.2, dx_out: float = 1e-3, check: bool = True,
                seed: int = 0, n_off: int = 16, t_align: float = 1e-5,
                snap_8pi: bool | None = None, keep_spectra: bool = False) -> GrowthReport:
    """Window values of T^_x against V log n (V_m log n) for every n.

    The frame is imposed at (t0, x0) = (1, 0); a single rotation taking the
    t -> 0 segment directions (measured at ``t_align``) onto the canonical
    polyline is applied to every measured transform.  In the -window the
    centre is conj(V) log n.  Per-n failures are recorded and the scan goes on.
    """
    cal = load_calibration() if calibration is None else calibration
    k = len(poly.corners)
    if k == 0:
        raise ValidationError("growth scan needs at least one corner")
    if not poly.corners.is_planar_equal:
        raise ValidationError("growth scan needs planar corners of equal angle")
    theta = float(poly.corners.angles[0])
    n_pairs = max(1, k // 2)
    if not 1 <= m <= n_pairs:
        raise ValidationError(f"m must lie in 1..{n_pairs}")
    snap = (n_pairs > 1) if snap_8pi is None else snap_8pi
    V = _growth_vector(poly, m)
    a2 = alpha_from_angle(theta) ** 2
    ansatz = AnsatzField(poly.corners)
    sampler = HasimotoSampler(ansatz)
    L = default_L(ansatz.pos)
    pmax = float(np.max(np.abs(ansatz.pos)))
    R_a = pmax + 3.25
    align = align_to_polyline(sampler.field(t_align, Grid(-R_a, R_a, 0.25)), poly)
    report = GrowthReport(theta, k, m, V, _v_from_directions(align.measured @ align.R.T, a2, m),
                          align.residual_angle)

    def one(n):
        t = admissible_time(theta, n, snap, cal)
        c = m / (2.0 * math.pi * t)
        win = [(sg, d) for sg in (1, -1) for d in (0.0, 0.5 / n, -0.5 / n)]
        xi_w = np.array([sg * c + d for sg, d in win])
        xi_o = offwindow_xi(t, n_pairs, n_off, seed + n)
        fld, vals, gap = march_transform(sampler, t, np.concatenate([xi_w, xi_o]), L, TAPER,
                                         dx_out, kappa, check)
        vals = vals @ align.R.T
        fld = fld.rotated(align.R)
        pred = resonant_predictor(t, xi_w, n, fld, ansatz, L=L)
        spec = Spectrum(t, np.concatenate([xi_w, xi_o]), vals, n, L, TAPER, gap)
        return n, t, win, xi_w, vals, pred, spec, gap

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        futs = [(n, ex.submit(one, n)) for n in n_values]
        results = []
        for n, f in futs:
            try:
                results.append(f.result())
            except BinormalError as exc:
                report.failures[n] = f"{type(exc).__name__}: {exc}"
    for n, t, win, xi_w, vals, pred, spec, gap in results:
        report.n_values.append(n)
        report.t_values.append(t)
        band = 0.5 * V.magnitude * math.log(n)
        for q, (sg, d) in enumerate(win):
            centre = V.value * math.log(n) if sg > 0 else np.conj(V.value) * math.log(n)
            report.entries.append(GrowthEntry(n, t, sg, d, float(xi_w[q]), vals[q], centre, band,
                                              pred[q]))
        report.offwindow[n] = offwindow_check(t, spec, n, n_pairs)
        report.logt_stat[n] = float(np.max(spec.abs)) / abs(math.log(t))
        report.two_grid[n] = gap
        if keep_spectra:
            report.spectra[n] = spec
    for n in report.failures:
        if n not in report.n_values:
            report.n_values.append(n)
    ok = [n for n in report.n_values if n not in report.failures]
    if len(ok) >= 2:
        y = [float(np.linalg.norm(report.measured_peak(n))) for n in ok]
        slope, icpt = np.polyfit(np.log(ok), y, 1)
        ref = V.magnitude
        report.slope_fit = {"slope": float(slope), "intercept": float(icpt), "V_abs": ref,
                            "rel_err": abs(slope - ref) / ref if ref > 0 else float("nan")}
    return report
