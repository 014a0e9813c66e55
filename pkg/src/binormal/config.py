"""Run configuration: a flat ``key = value`` text file with one schema.

Lists are comma-separated, booleans are ``true``/``false``, ``#`` starts a
comment.  Floats are written with 17 significant digits so that
``RunConfig.loads(cfg.dumps())`` reproduces every field bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

from ._io import fmt
from .errors import ValidationError


def _pos(v):
    return v > 0


def _nonneg(v):
    return v >= 0


# key: (kind, documentation, check)
SCHEMA = {
    "positions": ("int_list", "integer corner positions, strictly increasing", None),
    "theta": ("float", "interior angle of every corner, radians in (0, pi]",
              lambda v: 0 < v <= math.pi),
    "alpha": ("float", "corner amplitude; overrides theta unless nan", lambda v: math.isnan(v) or v >= 0),
    "alphas": ("float_list", "selfsimilar: amplitudes to sweep", None),
    "ymax": ("float", "selfsimilar: half-length of the profile march", _pos),
    "dy": ("float", "selfsimilar: output spacing of the profile march", _pos),
    "angle_tol": ("float", "selfsimilar: pass threshold on |theta_measured - theta_law|", _pos),
    "n_values": ("int_list", "growth-scan / xi: window scales n", None),
    "m": ("int", "growth-scan: window index, 1 <= m <= N", lambda v: v >= 1),
    "snap_8pi": ("bool", "growth-scan: snap t to 1/t in 8 pi Z (always on for N > 1)", None),
    "kappa": ("float", "spatial march safety factor h * omega", _pos),
    "dx_out": ("float", "output spacing of reconstructed frame fields", _pos),
    "tol": ("float", "two-grid refinement tolerance for transforms", _pos),
    "n_off": ("int", "growth-scan: off-window frequencies per n", lambda v: v >= 0),
    "seed": ("int", "seed for off-window frequency placement", _nonneg),
    "xi_times": ("float_list", "xi: times; empty means admissible times of n_values", None),
    "xi_intervals": ("int", "xi: unit intervals per time", lambda v: v >= 1),
    "xi_per_unit": ("int", "xi: frequency samples per unit interval", lambda v: v >= 4),
    "xi_tol": ("float", "xi: relative tolerance against 4 pi M", _pos),
    "t": ("float", "compare: time of the reconstructed frame", _pos),
    "L": ("float", "direct-sim: half-width of the grid", _pos),
    "h": ("float", "direct-sim: grid spacing (L must be a multiple)", _pos),
    "eps": ("float_list", "direct-sim / compare: corner mollification widths", None),
    "t_final": ("float", "direct-sim / compare: simulated time", _nonneg),
    "stability": ("float", "direct-sim: dt <= stability * h^2", _pos),
    "snapshot_times": ("float_list", "direct-sim: snapshot times", None),
    "boundary": ("float", "compare: excluded layer at each end", _nonneg),
    "compare_halfwidth": ("float", "compare: distances measured on |x| <= this", _pos),
    "thetas": ("float_list", "calibrate: angles to tabulate", None),
    "calibration": ("str", "calibration file; empty means the packaged one", None),
    "threads": ("int", "worker threads", lambda v: v >= 1),
    "out": ("str", "output directory", None),
}


@dataclass
class RunConfig:
    positions: list = field(default_factory=lambda: [-1, 1])
    theta: float = math.pi / 2
    alpha: float = float("nan")
    alphas: list = field(default_factory=lambda: [0.25, 0.5, 1.0])
    ymax: float = 200.0
    dy: float = 0.01
    angle_tol: float = 5e-3
    n_values: list = field(default_factory=lambda: [16, 32, 64])
    m: int = 1
    snap_8pi: bool = False
    kappa: float = 0.2
    dx_out: float = 1e-3
    tol: float = 1e-4
    n_off: int = 16
    seed: int = 0
    xi_times: list = field(default_factory=list)
    xi_intervals: int = 2
    xi_per_unit: int = 48
    xi_tol: float = 0.25
    t: float = 0.01
    L: float = 4.0
    h: float = 0.005
    eps: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    t_final: float = 0.01
    stability: float = 0.2
    snapshot_times: list = field(default_factory=list)
    boundary: float = 1.0
    compare_halfwidth: float = 1.0
    thetas: list = field(default_factory=lambda: [math.pi / 3, math.pi / 2, 2 * math.pi / 3])
    calibration: str = ""
    threads: int = 1
    out: str = "out"

    def validate(self) -> "RunConfig":
        for f in fields(self):
            kind, _, check = SCHEMA[f.name]
            v = getattr(self, f.name)
            if kind.endswith("_list"):
                items = v
            else:
                items = [v]
            for item in items:
                if kind.startswith("float") and not isinstance(item, float):
                    raise ValidationError(f"{f.name}: expected float, got {item!r}")
                if kind.startswith("int") and (isinstance(item, bool) or not isinstance(item, int)):
                    raise ValidationError(f"{f.name}: expected int, got {item!r}")
            if check is not None and not check(v):
                raise ValidationError(f"{f.name} = {v!r} out of range: {SCHEMA[f.name][1]}")
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise ValidationError("positions must be strictly increasing")
        if any(n < 2 for n in self.n_values):
            raise ValidationError("n_values must be >= 2")
        if any(e <= 0 for e in self.eps):
            raise ValidationError("eps must be > 0")
        if any(not 0 < th <= math.pi for th in self.thetas):
            raise ValidationError("thetas must lie in (0, pi]")
        if any(t <= 0 for t in self.xi_times):
            raise ValidationError("xi_times must be > 0")
        return self

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"# {SCHEMA[f.name][1]}")
            lines.append(f"{f.name} = {_format(SCHEMA[f.name][0], getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        return cls().with_pairs(_parse_lines(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.loads(fh.read())

    def with_pairs(self, pairs) -> "RunConfig":
        """Copy with string values parsed according to the schema."""
        upd = {}
        for key, raw in pairs:
            if key not in SCHEMA:
                raise ValidationError(f"unknown config key {key!r}")
            upd[key] = _parse(SCHEMA[key][0], raw.strip(), key)
        return replace(self, **upd)


def _format(kind, v) -> str:
    if kind == "float":
        return fmt(v)
    if kind == "int":
        return str(v)
    if kind == "bool":
        return "true" if v else "false"
    if kind == "float_list":
        return ", ".join(fmt(x) for x in v)
    if kind == "int_list":
        return ", ".join(str(x) for x in v)
    return v


def _parse(kind, raw, key):
    try:
        if kind == "float":
            return float(raw)
        if kind == "int":
            return int(raw)
        if kind == "bool":
            if raw.lower() not in ("true", "false"):
                raise ValueError(raw)
            return raw.lower() == "true"
        if kind in ("float_list", "int_list"):
            conv = float if kind == "float_list" else int
            return [conv(s) for s in raw.split(",") if s.strip()]
        return raw
    except ValueError:
        raise ValidationError(f"{key}: cannot parse {raw!r} as {kind}") from None


def _parse_lines(text):
    pairs = []
    for k, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"line {k}: expected key = value")
        key, raw = line.split("=", 1)
        pairs.append((key.strip(), raw))
    return pairs


def schema_text() -> str:
    """Human-readable schema: key, kind, default and meaning."""
    d = RunConfig()
    rows = [f"{k:18s} {kind:11s} {_format(kind, getattr(d, k)) or '(empty)'}\n{'':31s}{doc}"
            for k, (kind, doc, _) in SCHEMA.items()]
    return "\n".join(rows) + "\n"
