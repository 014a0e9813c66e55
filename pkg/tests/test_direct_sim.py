import json
import math

import numpy as np
import pytest

from binormal.ansatz import AnsatzField
from binormal.direct_sim import (TangentField, compare_to_hasimoto, init_from_polyline, make_grid,
                                 simulate, step, total_turning)
from binormal.errors import IntegrationError, ValidationError
from binormal.geometry import CornerData, build_polyline
from binormal.hasimoto import Grid, HasimotoSampler


def two_corner_poly(theta=1.5):
    return build_polyline(CornerData.equal_angle([-1, 1], theta))


def great_circle(k=2.0, L=2.0, h=0.02):
    x = make_grid(L, h)
    return TangentField(x, np.column_stack([np.cos(k * x), np.sin(k * x), 0 * x]))


def test_no_corners_constant():
    f = init_from_polyline(build_polyline(CornerData((), ())), make_grid(2, 0.05), 0.2)
    np.testing.assert_array_equal(f.T, np.tile([1.0, 0, 0], (len(f.x), 1)))


def test_constant_field_fixed_point():
    f = init_from_polyline(build_polyline(CornerData((), ())), make_grid(2, 0.05), 0.2)
    g = f
    for _ in range(20):
        g = step(g, 0.2 * f.h ** 2)
    np.testing.assert_array_equal(g.T, f.T)


def test_two_corners_piecewise_outside_neighbourhoods():
    poly = two_corner_poly()
    eps = 0.3
    f = init_from_polyline(poly, make_grid(4, 0.01), eps)
    d = poly.directions
    for lo, hi, ref in [(-4, -1 - eps / 2, d[0]), (-1 + eps / 2, 1 - eps / 2, d[1]),
                        (1 + eps / 2, 4, d[2])]:
        m = (f.x >= lo + 1e-9) & (f.x <= hi - 1e-9)
        np.testing.assert_allclose(f.T[m], np.tile(ref, (m.sum(), 1)), atol=1e-15)
    assert f.unit_defect() <= 1e-15


@pytest.mark.parametrize("theta", [0.8, 1.5, 2.5])
def test_total_turning(theta):
    poly = two_corner_poly(theta)
    f = init_from_polyline(poly, make_grid(4, 0.005), 0.4)
    assert abs(total_turning(f) - 2 * (math.pi - theta)) <= 1e-6


def test_init_validation():
    poly = two_corner_poly()
    with pytest.raises(ValidationError):
        init_from_polyline(poly, make_grid(4, 0.05), 0.05)
    with pytest.raises(ValidationError):
        init_from_polyline(poly, make_grid(4, 0.01), 2.0)
    with pytest.raises(ValidationError):
        make_grid(1.0, 0.3)


def test_great_circle_stationary():
    f = great_circle()
    g = f
    for _ in range(1000):
        g = step(g, 0.2 * f.h ** 2)
    assert np.max(np.abs(g.T - f.T)) <= 1e-8


def test_unit_norm_after_step():
    f = init_from_polyline(two_corner_poly(), make_grid(4, 0.02), 0.5)
    g = simulate(f, 0.01).field
    assert g.unit_defect() <= 1e-12


def test_energy_conserved_smooth_data():
    f = init_from_polyline(two_corner_poly(), make_grid(4, 0.02), 1.0)
    r = simulate(f, 0.05)
    assert r.energy_drift <= 1e-4
    assert r.times[-1] == pytest.approx(0.05)


def test_dt_too_large_rejected():
    f = great_circle()
    with pytest.raises(ValidationError):
        step(f, 0.3 * f.h ** 2)


def test_blowup_guard():
    x = make_grid(1, 0.05)
    rng = np.random.default_rng(0)
    T = rng.normal(size=(len(x), 3))
    f = TangentField(x, T / np.linalg.norm(T, axis=1, keepdims=True))
    with pytest.raises(IntegrationError):
        step(f, 5 * f.h ** 2, stability=10.0)


def test_self_convergence_order():
    poly = build_polyline(CornerData.from_angles((0,), (1.5,)))
    sols = [simulate(init_from_polyline(poly, make_grid(4, h), 1.0), 0.01).field
            for h in (0.02, 0.01, 0.005)]
    e1 = np.max(np.abs(sols[0].T - sols[1].T[::2]))
    e2 = np.max(np.abs(sols[1].T - sols[2].T[::2]))
    assert math.log2(e1 / e2) >= 1.9


def test_compare_no_corners_zero():
    t = 0.01
    f = simulate(init_from_polyline(build_polyline(CornerData((), ())), make_grid(2, 0.05), 0.2),
                 t).field
    ff = HasimotoSampler(AnsatzField(CornerData((), ()))).field(t, Grid(-2, 2, 1e-3))
    m = compare_to_hasimoto(f, ff, boundary=0.5)
    assert m["sup"] == 0.0 and m["l2"] == 0.0


def test_compare_time_mismatch():
    f = simulate(init_from_polyline(build_polyline(CornerData((), ())), make_grid(2, 0.05), 0.2),
                 0.01).field
    ff = HasimotoSampler(AnsatzField(CornerData((), ()))).field(0.02, Grid(-2, 2, 1e-2))
    with pytest.raises(ValidationError):
        compare_to_hasimoto(f, ff)


def test_compare_single_corner_refinement():
    a, t = 0.5, 0.01
    poly = build_polyline(CornerData((0,), (a,)))
    ff = HasimotoSampler(AnsatzField(poly.corners)).field(t, Grid(-4, 4, 1e-3))
    sups = []
    for eps in (0.2, 0.1, 0.05):
        f = simulate(init_from_polyline(poly, make_grid(4, 0.005), eps), t).field
        sups.append(compare_to_hasimoto(f, ff, domain=(-1, 1))["sup"])
    assert np.all(np.diff(sups) < 0), sups
    assert sups[-1] <= 5e-2


def test_snapshots_and_manifest(tmp_path):
    f = init_from_polyline(two_corner_poly(), make_grid(2, 0.05), 0.2)
    r = simulate(f, 0.01, snapshot_times=(0.0, 0.005, 0.01), eps=0.2)
    assert set(r.snapshots) == {0.0, 0.005, 0.01}
    assert r.snapshots[0.0].t == 0.0
    assert r.snapshots[0.005].t == pytest.approx(0.005, abs=r.dt)
    p = r.write_snapshot(tmp_path / "s.csv", 0.01)
    lines = open(p).read().splitlines()
    assert lines[0] == "x,Tx,Ty,Tz" and len(lines) == len(f.x) + 1
    m = json.loads(json.dumps(r.manifest()))
    assert m["grid"] == {"L": 2.0, "h": pytest.approx(0.05), "nodes": len(f.x)}
    assert m["eps"] == 0.2 and m["energy"][0][0] == 0.0
