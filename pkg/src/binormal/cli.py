"""Command-line experiment runner.

Every subcommand reads a ``RunConfig`` (file plus flag overrides), writes its
reports into ``--out`` and finishes with ``run_manifest.json`` listing every
produced file with its sha256.  Exit codes: 0 ok, 1 acceptance failure,
2 validation error, 3 infrastructure or numerical error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from ._io import dumps17, sha256_file, write_atomic
from .ansatz import AnsatzField
from .config import RunConfig, schema_text
from .direct_sim import compare_to_hasimoto, init_from_polyline, make_grid, simulate
from .errors import BinormalError, ValidationError
from .geometry import CornerData, angle_from_alpha, build_polyline
from .hasimoto import Grid, HasimotoSampler
from .selfsimilar import angle_law_row, integrate_profile
from .spectral import (admissible_time, growth_scan, load_calibration, measure_Xi,
                       snap_index)

EXIT_OK, EXIT_FAIL, EXIT_VALIDATION, EXIT_INFRA = 0, 1, 2, 3


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.out)
        self.files = []
        self.timings = {}
        self.t0 = time.perf_counter()

    def json(self, name, obj):
        self.files.append(write_atomic(self.out / name, dumps17(obj)))

    def add(self, path):
        self.files.append(str(path))

    def manifest(self, summary, status):
        self.timings["total_s"] = time.perf_counter() - self.t0
        rel = sorted({os.path.relpath(f, self.out) for f in self.files})
        man = {"command": self.command, "version": __version__, "status": status,
               "config": self.cfg.to_dict(), "timings": self.timings,
               "files": [{"path": r, "sha256": sha256_file(self.out / r)} for r in rel],
               "summary": summary}
        write_atomic(self.out / "run_manifest.json", dumps17(man))
        return man


def _corners(cfg: RunConfig) -> CornerData:
    if not math.isnan(cfg.alpha):
        return CornerData(tuple(cfg.positions), tuple([cfg.alpha] * len(cfg.positions)))
    return CornerData.equal_angle(cfg.positions, cfg.theta)


def _calibration(cfg: RunConfig):
    return load_calibration(cfg.calibration or None)


def _tag(v) -> str:
    return format(v, ".6g").replace("-", "m").replace(".", "p")


def cmd_selfsimilar(cfg: RunConfig, run: Run):
    for a in cfg.alphas:
        if not (math.isfinite(a) and a >= 0):
            raise ValidationError(f"alpha must be >= 0, got {a}")

    def one(a):
        row = angle_law_row(a, cfg.ymax, cfg.dy)
        traj = integrate_profile(a, min(cfg.ymax, 20.0), cfg.dy)
        return row, traj

    with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
        res = list(ex.map(one, cfg.alphas))
    rows = []
    for a, (row, traj) in zip(cfg.alphas, res):
        row["pass"] = row["abs_err"] <= cfg.angle_tol
        rows.append(row)
        run.add(traj.write_csv(run.out / f"profile_alpha_{_tag(a)}.csv"))
    ok = all(r["pass"] for r in rows)
    run.json("angle_law.json", {"ymax": cfg.ymax, "dy": cfg.dy, "tolerance": cfg.angle_tol,
                                "rows": rows, "all_pass": ok})
    return ok, {"rows": len(rows), "all_pass": ok}


def cmd_growth_scan(cfg: RunConfig, run: Run):
    cal = _calibration(cfg)
    corners = _corners(cfg)
    poly = build_polyline(corners)
    if len(corners) == 0:
        raise ValidationError("growth-scan needs at least one corner")
    theta = float(corners.angles[0])
    snap = cfg.snap_8pi or len(corners) > 2
    for n in cfg.n_values:
        admissible_time(theta, n, snap, cal)
    rep = growth_scan(poly, cfg.n_values, cfg.m, cal, threads=cfg.threads, kappa=cfg.kappa,
                      dx_out=cfg.dx_out, seed=cfg.seed, n_off=cfg.n_off,
                      snap_8pi=True if snap else None, keep_spectra=True)
    d = rep.to_dict()
    d["snap_8pi"] = bool(snap)
    d["snap_index"] = {str(n): snap_index(t) for n, t in zip(rep.n_values, rep.t_values)}
    run.json("growth_report.json", d)
    for n, spec in sorted(rep.spectra.items()):
        run.add(spec.write_csv(run.out / f"spectrum_n{n}.csv"))
    flags = rep.pass_flags
    summary = {"pass_flags": {str(k): v for k, v in flags.items()},
               "failures": {str(k): v for k, v in rep.failures.items()},
               "degenerate": rep.V.degenerate}
    # band failures are soft: recorded in the report, exit status stays 0
    return True, summary


def cmd_xi(cfg: RunConfig, run: Run):
    corners = _corners(cfg)
    ansatz = AnsatzField(corners)
    sampler = HasimotoSampler(ansatz)
    times = list(cfg.xi_times)
    if not times:
        cal = _calibration(cfg)
        theta = angle_from_alpha(abs(corners.alphas[0])) if len(corners) else cfg.theta
        times = [admissible_time(theta, n, False, cal) for n in cfg.n_values[:2]]
    target = 4.0 * math.pi * ansatz.M
    rows = []
    for t in times:
        if ansatz.M == 0:
            rows.append({"t": t, "value": 0.0, "rel_err": 0.0, "intervals": [],
                         "per_interval": [], "excluded": [], "pass": True})
            continue
        est = measure_Xi(sampler, t, cfg.xi_intervals, cfg.xi_per_unit, kappa=cfg.kappa)
        rows.append({"t": t, "value": est.value, "rel_err": est.rel_err,
                     "intervals": est.intervals, "per_interval": est.per_interval,
                     "excluded": est.excluded, "pass": est.rel_err <= cfg.xi_tol})
    ok = all(r["pass"] for r in rows)
    run.json("xi_report.json", {"mass": ansatz.M, "target": target, "tolerance": cfg.xi_tol,
                                "measurements": rows, "all_pass": ok})
    return ok, {"target": target, "all_pass": ok}


def cmd_direct_sim(cfg: RunConfig, run: Run):
    poly = build_polyline(_corners(cfg), planar=False)
    if not cfg.eps:
        raise ValidationError("eps list is empty")
    eps = cfg.eps[0]
    f0 = init_from_polyline(poly, make_grid(cfg.L, cfg.h), eps)
    snaps = sorted(set(cfg.snapshot_times) | {0.0, cfg.t_final})
    if any(s < 0 or s > cfg.t_final for s in snaps):
        raise ValidationError("snapshot times must lie in [0, t_final]")
    t1 = time.perf_counter()
    res = simulate(f0, cfg.t_final, stability=cfg.stability, snapshot_times=snaps, eps=eps)
    run.timings["simulate_s"] = time.perf_counter() - t1
    for s in snaps:
        run.add(res.write_snapshot(run.out / f"snapshot_t{_tag(s)}.csv", s))
    man = res.manifest()
    man["energy_drift"] = res.energy_drift
    man["unit_defect"] = res.field.unit_defect()
    run.json("direct_sim.json", man)
    return True, {"energy_drift": res.energy_drift}


def cmd_compare(cfg: RunConfig, run: Run):
    if abs(cfg.t - cfg.t_final) > 1e-12 * max(cfg.t, cfg.t_final):
        raise ValidationError(f"compare needs t == t_final, got {cfg.t} and {cfg.t_final}")
    corners = _corners(cfg)
    poly = build_polyline(corners, planar=False)
    sampler = HasimotoSampler(AnsatzField(corners))
    hf = sampler.field(cfg.t, Grid(-cfg.L, cfg.L, cfg.dx_out), threads=cfg.threads)
    w = cfg.compare_halfwidth
    rows = []
    for eps in cfg.eps:
        f0 = init_from_polyline(poly, make_grid(cfg.L, cfg.h), eps)
        res = simulate(f0, cfg.t_final, stability=cfg.stability, eps=eps)
        d = compare_to_hasimoto(res.field, hf, cfg.boundary, domain=(-w, w))
        d.update({"eps": eps, "energy_drift": res.energy_drift})
        rows.append(d)
    sup = [r["sup"] for r in rows]
    mono = all(b < a for a, b in zip(sup, sup[1:]))
    run.json("compare_report.json", {"t": cfg.t, "h": cfg.h, "L": cfg.L, "rows": rows,
                                     "monotone": mono})
    return mono, {"monotone": mono, "sup": sup}


def cmd_calibrate(cfg: RunConfig, run: Run):
    """Tabulate max deviation / band per (theta, n) and the smallest stable n."""
    cal = _calibration(cfg)
    table = []
    stable = {}
    for th in cfg.thetas:
        poly = build_polyline(CornerData.equal_angle([-1, 1], th))
        rep = growth_scan(poly, cfg.n_values, 1, cal, threads=cfg.threads, kappa=cfg.kappa,
                          dx_out=cfg.dx_out, seed=cfg.seed, n_off=0)
        passing = []
        for n in rep.n_values:
            ent = rep.for_n(n)
            ratio = max(e.deviation / e.band for e in ent) if ent else float("nan")
            table.append({"theta": th, "n": n, "max_ratio": ratio,
                          "pass": bool(rep.pass_flags.get(n))})
            passing.append((n, bool(rep.pass_flags.get(n))))
        # smallest n from which every larger n in the sweep passes
        s = None
        for n, _ in sorted(passing):
            if all(p for k, p in passing if k >= n):
                s = n
                break
        stable[str(th)] = s
    new = dict(cal)
    new["band_ratio_table"] = table
    new["n_band_stable"] = stable
    run.json("calibration.json", new)
    return True, {"n_band_stable": stable}


COMMANDS = {
    "selfsimilar": cmd_selfsimilar,
    "growth-scan": cmd_growth_scan,
    "direct-sim": cmd_direct_sim,
    "xi": cmd_xi,
    "compare": cmd_compare,
    "calibrate": cmd_calibrate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="binormal", description=__doc__.splitlines()[0])
    p.add_argument("command", nargs="?", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--theta", type=float, help="corner angle in radians")
    p.add_argument("--n", help="comma-separated window scales n")
    p.add_argument("--snap-8pi", action="store_true", help="snap t to 1/t in 8 pi Z")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config key (repeatable)")
    p.add_argument("--show-config", action="store_true",
                   help="print the effective configuration and exit")
    p.add_argument("--schema", action="store_true", help="print the configuration schema")
    p.add_argument("--version", action="version", version=__version__)
    return p


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    pairs = []
    if args.out is not None:
        pairs.append(("out", args.out))
    if args.threads is not None:
        pairs.append(("threads", str(args.threads)))
    if args.theta is not None:
        pairs.append(("theta", repr(args.theta)))
    if args.n is not None:
        pairs.append(("n_values", args.n))
    if args.snap_8pi:
        pairs.append(("snap_8pi", "true"))
    for s in args.set:
        if "=" not in s:
            raise ValidationError(f"--set expects KEY=VALUE, got {s!r}")
        k, v = s.split("=", 1)
        pairs.append((k.strip(), v))
    return cfg.with_pairs(pairs).validate()


def _error_doc(exc, code):
    doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    for attr in ("required_n", "suggested", "reached"):
        v = getattr(exc, attr, None)
        if v is not None:
            doc[attr] = v
    return doc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.schema:
        sys.stdout.write(schema_text())
        return EXIT_OK
    cfg = None
    try:
        cfg = resolve_config(args)
        if args.show_config:
            sys.stdout.write(cfg.dumps())
            return EXIT_OK
        if args.command is None:
            parser.error("a command is required")
        run = Run(cfg, args.command)
        run.out.mkdir(parents=True, exist_ok=True)
        (run.out / "error.json").unlink(missing_ok=True)
        ok, summary = COMMANDS[args.command](cfg, run)
        code = EXIT_OK if ok else EXIT_FAIL
        run.manifest(summary, "ok" if ok else "acceptance_failure")
        sys.stdout.write(dumps17({"command": args.command, "status": code, **summary}) + "\n")
        return code
    except ValidationError as exc:
        code, err = EXIT_VALIDATION, exc
    except (BinormalError, OSError, ArithmeticError) as exc:
        code, err = EXIT_INFRA, exc
    doc = _error_doc(err, code)
    sys.stderr.write(dumps17(doc) + "\n")
    if cfg is not None:
        try:
            Path(cfg.out).mkdir(parents=True, exist_ok=True)
            write_atomic(Path(cfg.out) / "error.json", dumps17(doc))
        except OSError:
            pass
    return code


if __name__ == "__main__":
    raise SystemExit(main())
