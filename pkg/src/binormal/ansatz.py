"""Leading-order NLS field generated by a Dirac comb of corners.

    u(t, x) = sum_j A_j(t) exp(i (x - j)^2 / 4t) / sqrt(t),
    A_j(t)  = exp(-i (|alpha_j|^2 - M) log sqrt(t)) alpha_j,

which solves ``i u_t + u_xx + 1/2 (|u|^2 - M/t) u = 0`` exactly for one corner
and approximately otherwise (the corrections to ``alpha_j`` are set to zero).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._io import write_csv
from .errors import ValidationError
from .geometry import CornerData


@dataclass(frozen=True)
class ComplexScalarSample:
    t: float
    x: float
    value: complex

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValidationError("sample value is not finite")


def _check_time(t, name="t"):
    ta = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(ta)) or np.any(ta <= 0.0):
        raise ValidationError(f"{name} must be > 0, got {t!r}")


class AnsatzField:
    """Closed-form evaluators of u, u_x, u_xx, u_t and the periodic companion v."""

    def __init__(self, corners: CornerData):
        self.corners = corners
        self.pos = corners.position_array
        self.alpha = corners.alpha_array
        self.M = corners.mass
        self._c = np.abs(self.alpha) ** 2 - self.M

    def a(self, t):
        """Phase normalisation a(t) = M/t."""
        _check_time(t)
        return self.M / t

    def amplitudes(self, t) -> np.ndarray:
        _check_time(t)
        return np.exp(-1j * self._c * 0.5 * np.log(t)) * self.alpha

    def amplitude(self, j, t) -> complex:
        _check_time(t)
        a = self.corners.amplitude_of(j)
        if a == 0:
            return 0j
        c = abs(a) ** 2 - self.M
        return complex(np.exp(-1j * c * 0.5 * np.log(t)) * a)

    def mass(self, t) -> float:
        return float(np.sum(np.abs(self.amplitudes(t)) ** 2))

    def _terms(self, t, x):
        """Per-corner terms g_j(t, x) and offsets x - j, shapes (..., ncorners)."""
        _check_time(t)
        x = np.asarray(x, dtype=float)
        d = x[..., None] - self.pos
        g = self.amplitudes(t) * np.exp(1j * d * d / (4.0 * t)) / np.sqrt(t)
        return g, d

    def eval_u(self, t, x):
        g, _ = self._terms(t, x)
        return g.sum(axis=-1)

    def eval_ux(self, t, x):
        g, d = self._terms(t, x)
        return (g * (1j * d / (2.0 * t))).sum(axis=-1)

    def eval_uxx(self, t, x):
        g, d = self._terms(t, x)
        return (g * (-(d * d) / (4.0 * t * t) + 0.5j / t)).sum(axis=-1)

    def eval_ut(self, t, x):
        g, d = self._terms(t, x)
        return (g * (-0.5j * self._c / t - 1j * d * d / (4.0 * t * t) - 0.5 / t)).sum(axis=-1)

    def nls_residual(self, t, x):
        """i u_t + u_xx + 1/2 (|u|^2 - M/t) u from the term-wise analytic derivatives."""
        u = self.eval_u(t, x)
        return 1j * self.eval_ut(t, x) + self.eval_uxx(t, x) + 0.5 * (np.abs(u) ** 2 - self.M / t) * u

    @property
    def v_period(self) -> float:
        """Period of v in y: 2 pi when all corners sit at even integers, else 4 pi."""
        return 2.0 * np.pi if np.all(np.mod(self.pos, 2.0) == 0.0) else 4.0 * np.pi

    def eval_v(self, tau, y):
        """Companion with u(t, x) = exp(i x^2/4t) / sqrt(t) * conj(v(1/t, x/t)).

        v(tau, y) = sum_j conj(A_j(1/tau)) exp(i (j/2) y - i (j/2)^2 tau).
        """
        _check_time(tau, "tau")
        y = np.asarray(y, dtype=float)
        k = 0.5 * self.pos
        terms = np.conj(self.amplitudes(1.0 / tau)) * np.exp(1j * (k * y[..., None] - k * k * tau))
        return terms.sum(axis=-1)

    def samples(self, t, xs):
        return [ComplexScalarSample(float(t), float(x), complex(v))
                for x, v in zip(np.atleast_1d(xs), np.atleast_1d(self.eval_u(t, xs)))]

    def write_csv(self, path, t, xs):
        """Columns x, re_u, im_u, re_ux, im_ux."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        u = self.eval_u(t, xs)
        ux = self.eval_ux(t, xs)
        return write_csv(path, ["x", "re_u", "im_u", "re_ux", "im_ux"],
                         zip(xs, u.real, u.imag, ux.real, ux.imag))
