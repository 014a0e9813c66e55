"""Corner data, polygonal lines and the growth vectors of the resonance windows.

Angles follow the interior-angle convention: a straight line has theta = pi,
and a corner with Dirac amplitude alpha has ``sin(theta/2) = exp(-pi |alpha|^2 / 2)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ValidationError

__all__ = [
    "unit",
    "alpha_from_angle",
    "angle_from_alpha",
    "CornerData",
    "PolyLine",
    "GrowthVector",
    "build_polyline",
    "growth_vector_V",
    "growth_vector_Vm",
    "curvature_torsion_from_u",
    "torsion_from_phase",
]

UNIT_TOL = 1e-12


def unit(v) -> np.ndarray:
    """Return ``v`` scaled to unit length (rows, if ``v`` is 2-D)."""
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(nrm == 0.0):
        raise ValidationError("cannot normalise a zero vector")
    return v / nrm


def alpha_from_angle(theta):
    """Dirac amplitude of a corner with interior angle ``theta`` in (0, pi]."""
    th = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(th)) or np.any(th <= 0.0) or np.any(th > math.pi):
        raise DomainError(f"corner angle must lie in (0, pi], got {theta!r}")
    a2 = -2.0 / math.pi * np.log(np.sin(th / 2.0))
    out = np.sqrt(np.maximum(a2, 0.0))
    return float(out) if out.ndim == 0 else out


def angle_from_alpha(alpha):
    """Interior corner angle produced by a Dirac amplitude of modulus ``alpha``."""
    a = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(a)) or np.any(a < 0.0):
        raise DomainError(f"amplitude modulus must be >= 0, got {alpha!r}")
    out = 2.0 * np.arcsin(np.exp(-0.5 * math.pi * a * a))
    return float(out) if out.ndim == 0 else out


def _as_int_position(p) -> int:
    if isinstance(p, (bool, np.bool_)):
        raise ValidationError("corner positions must be integers")
    pf = float(p)
    if not math.isfinite(pf) or pf != round(pf):
        raise ValidationError(f"corner positions must be integers, got {p!r}")
    return int(round(pf))


@dataclass(frozen=True)
class CornerData:
    """Integer corner positions with their complex Dirac amplitudes.

    ``s`` is the weight exponent of the l^{2,s} class (s > 1/2) and ``gamma``
    the decay exponent of the neglected corrections; both are metadata only.
    """

    positions: tuple
    alphas: tuple
    s: float = 0.75
    gamma: float = 0.75

    def __post_init__(self):
        pos = tuple(_as_int_position(p) for p in self.positions)
        al = tuple(complex(a) for a in self.alphas)
        if len(pos) != len(al):
            raise ValidationError("positions and alphas differ in length")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValidationError("corner positions must be strictly increasing")
        if not all(math.isfinite(a.real) and math.isfinite(a.imag) for a in al):
            raise ValidationError("amplitudes must be finite")
        if not self.s > 0.5:
            raise ValidationError("weight exponent s must exceed 1/2")
        if not 0.0 < self.gamma < 1.0:
            raise ValidationError("gamma must lie in (0, 1)")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "alphas", al)

    @classmethod
    def from_angles(cls, positions: Sequence[int], thetas: Sequence[float], **kw):
        if len(positions) != len(thetas):
            raise ValidationError("positions and angles differ in length")
        return cls(tuple(positions), tuple(alpha_from_angle(th) for th in thetas), **kw)

    @classmethod
    def equal_angle(cls, positions: Sequence[int], theta: float, **kw):
        return cls.from_angles(positions, [theta] * len(positions), **kw)

    @classmethod
    def symmetric(cls, n_pairs: int, theta: float, **kw):
        """``2 n_pairs`` equal corners at the odd integers -2N+1, ..., 2N-1."""
        if n_pairs < 0:
            raise ValidationError("number of corner pairs must be >= 0")
        return cls.equal_angle(list(range(-2 * n_pairs + 1, 2 * n_pairs, 2)), theta, **kw)

    def __len__(self):
        return len(self.positions)

    @property
    def position_array(self) -> np.ndarray:
        return np.array(self.positions, dtype=float)

    @property
    def alpha_array(self) -> np.ndarray:
        return np.array(self.alphas, dtype=complex)

    @property
    def mass(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.alphas))

    @property
    def weighted_norm(self) -> float:
        # <j> = sqrt(1 + j^2) keeps the j = 0 corner in the norm
        return math.sqrt(sum((1.0 + p * p) ** self.s * abs(a) ** 2
                             for p, a in zip(self.positions, self.alphas)))

    @property
    def angles(self) -> tuple:
        return tuple(angle_from_alpha(abs(a)) for a in self.alphas)

    @property
    def is_planar_equal(self) -> bool:
        if not self.alphas:
            return True
        mods = [abs(a) for a in self.alphas]
        return (all(a.imag == 0.0 for a in self.alphas)
                and max(mods) - min(mods) <= 1e-14 * max(1.0, max(mods)))

    def amplitude_of(self, j: int) -> complex:
        try:
            return self.alphas[self.positions.index(int(j))]
        except ValueError:
            return 0j


@dataclass(frozen=True, eq=False)
class PolyLine:
    """Polygonal line parametrised by arclength, corners at ``corners.positions``.

    ``directions[k]`` is the unit tangent on the k-th segment, so
    ``directions[0]`` and ``directions[-1]`` are the far-field directions.
    ``vertices[i]`` is the point at the i-th corner; the curve passes through
    the origin at x = 0.
    """

    corners: CornerData
    directions: np.ndarray
    vertices: np.ndarray = field(default=None)

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if d.shape != (len(self.corners) + 1, 3):
            raise ValidationError("need one direction per segment")
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > UNIT_TOL):
            raise ValidationError("segment directions must be unit vectors")
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "vertices", self.point_at(self.corners.position_array))

    @property
    def theta(self):
        """Common interior angle, or None when the corners differ."""
        ang = self.interior_angles
        if len(ang) == 0:
            return None
        return float(ang[0]) if np.ptp(ang) <= 1e-12 else None

    @property
    def interior_angles(self) -> np.ndarray:
        c = np.einsum("ij,ij->i", self.directions[:-1], self.directions[1:])
        return math.pi - np.arccos(np.clip(c, -1.0, 1.0))

    def segment_index(self, x) -> np.ndarray:
        """Index of the segment containing x (a corner belongs to its right segment)."""
        return np.searchsorted(self.corners.position_array, np.asarray(x, dtype=float),
                               side="right")

    def direction_at(self, x) -> np.ndarray:
        return self.directions[self.segment_index(x)]

    def point_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        p = self.corners.position_array
        # chi(x) = int_0^x T: sum of the signed overlaps of [0, x] with every segment
        edges = np.concatenate([[-np.inf], p, [np.inf]])
        lo = np.minimum(0.0, x)[..., None]
        hi = np.maximum(0.0, x)[..., None]
        overlap = np.clip(np.minimum(hi, edges[1:]) - np.maximum(lo, edges[:-1]), 0.0, None)
        overlap = np.where(np.isfinite(overlap), overlap, 0.0)
        sign = np.where(x >= 0.0, 1.0, -1.0)[..., None]
        return sign * (overlap @ self.directions)

    def to_dict(self) -> dict:
        return {
            "corners": [{"pos": int(p), "alpha_re": a.real, "alpha_im": a.imag}
                        for p, a in zip(self.corners.positions, self.corners.alphas)],
            "theta": self.theta,
            "directions": self.directions.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PolyLine":
        cd = CornerData(tuple(c["pos"] for c in d["corners"]),
                        tuple(complex(c["alpha_re"], c["alpha_im"]) for c in d["corners"]))
        return cls(cd, np.array(d["directions"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "PolyLine":
        return cls.from_dict(json.loads(text))


def build_polyline(corners: CornerData, planar: bool = True,
                   alternate: bool = False) -> PolyLine:
    """Canonical planar embedding of the corner data.

    The segment through x = 0 points along +x (when x = 0 is itself a corner
    the x-axis bisects it) and every corner turns by ``pi - theta_j`` inside the
    xy-plane, counter-clockwise.  Real equal amplitudes evolve from this
    same-sense polygon; ``alternate=True`` gives the zig-zag variant instead.

    With ``planar=True`` the growth-band hypotheses are enforced (real amplitudes
    of equal modulus).  Otherwise per-corner angles are used and the phases
    of complex amplitudes are ignored with a warning.
    """
    if planar and not corners.is_planar_equal:
        raise ValidationError("planar mode requires real amplitudes with equal angles")
    if not planar and not corners.is_planar_equal:
        warnings.warn("corner data is not planar with equal angles; amplitude phases "
                      "are ignored by the embedding", stacklevel=2)
    turns = np.array([math.pi - th for th in corners.angles])
    if alternate:
        turns = turns * (-1.0) ** np.arange(len(turns))
    heading = np.concatenate([[0.0], np.cumsum(turns)])
    p = corners.position_array
    k0 = int(np.searchsorted(p, 0.0, side="right"))
    ref = heading[k0]
    if len(p) and np.any(p == 0.0):
        i = int(np.flatnonzero(p == 0.0)[0])
        ref = 0.5 * (heading[i] + heading[i + 1])
    heading = heading - ref
    d = np.stack([np.cos(heading), np.sin(heading), np.zeros_like(heading)], axis=1)
    return PolyLine(corners, d)


@dataclass(frozen=True, eq=False)
class GrowthVector:
    """Complex 3-vector predicted to multiply ``log n`` inside a resonance window."""

    value: np.ndarray
    degenerate: bool

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.value))


def _common_alpha_sq(poly: PolyLine) -> float:
    th = poly.theta
    if th is None:
        raise ValidationError("growth vectors need corners of one common angle")
    if th >= math.pi:
        return 0.0
    return -2.0 / math.pi * math.log(math.sin(th / 2.0))


def growth_vector_V(poly: PolyLine) -> GrowthVector:
    """i |alpha|^2 (T^-inf - 2 T^0 + T^+inf) for a two-corner line."""
    if len(poly.corners) != 2:
        raise ValidationError("growth_vector_V needs exactly two corners")
    a2 = _common_alpha_sq(poly)
    d = poly.directions
    v = 1j * a2 * (d[0] - 2.0 * d[1] + d[2])
    return GrowthVector(v, bool(np.linalg.norm(v) < 1e-14))


def growth_vector_Vm(poly: PolyLine, m: int) -> GrowthVector:
    """Telescoped growth vector of the m-th window for 2N corners at odd integers."""
    n_c = len(poly.corners)
    N = n_c // 2
    expected = tuple(range(-2 * N + 1, 2 * N, 2))
    if n_c == 0 or n_c % 2 or poly.corners.positions != expected:
        raise ValidationError("growth_vector_Vm needs 2N corners at -2N+1, ..., 2N-1")
    if not 1 <= int(m) <= N:
        raise ValidationError(f"m must lie in 1..{N}, got {m}")
    m = int(m)
    a2 = _common_alpha_sq(poly)
    d = poly.directions
    v = 1j * a2 * (d[0] - d[m] - d[2 * N - m] + d[2 * N])
    return GrowthVector(v, bool(np.linalg.norm(v) < 1e-14))


def curvature_torsion_from_u(u, theta_x):
    """Curvature |u| and torsion (the supplied phase derivative); NaN torsion where u = 0."""
    u = np.asarray(u, dtype=complex)
    k = np.abs(u)
    tor = np.where(k > 0.0, np.asarray(theta_x, dtype=float), np.nan)
    if k.ndim == 0:
        return float(k), float(tor)
    return k, tor


def torsion_from_phase(u_samples: Iterable[complex], dx: float) -> np.ndarray:
    """Finite-difference derivative of the unwrapped phase of sampled u."""
    ph = np.unwrap(np.angle(np.asarray(u_samples, dtype=complex)))
    return np.gradient(ph, dx)
