import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from binormal.ansatz import AnsatzField
from binormal.errors import IntegrationError, RefinementError, ValidationError
from binormal.geometry import CornerData, build_polyline
from binormal.hasimoto import (Frame, Grid, HasimotoSampler, align_to_polyline,
                               integrate_frame_in_space, integrate_frame_in_time, march_in_time,
                               polyline_limit_error, reconstruct_curve)
from binormal.selfsimilar import SelfSimilar


def one_corner(alpha=0.5):
    return AnsatzField(CornerData((0,), (alpha,)))


def random_frame(seed=3):
    R = Rotation.random(random_state=seed).as_matrix()
    return Frame(R[:, 0], R[:, 1], R[:, 2])


def test_frame_check_rejects_skew():
    with pytest.raises(ValidationError):
        Frame(np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), np.array([0, 0, 1.0])).check()
    assert Frame.canonical().defect() == 0.0


def test_grid_validation():
    with pytest.raises(ValidationError):
        Grid(0.0, 1.0, 0.3)
    g = Grid(-1.0, 1.0, 0.25)
    assert g.n == 9 and g.index_of(0.0) == 4
    with pytest.raises(ValidationError):
        g.index_of(0.1)


def test_time_march_zero_field_constant():
    f = AnsatzField(CornerData((), ()))
    fr = random_frame()
    out = integrate_frame_in_time(f, 0.3, fr, 1.0, 0.01)
    np.testing.assert_allclose(out.as_array(), fr.as_array(), atol=1e-15)


def test_time_march_reversible():
    f = AnsatzField(CornerData((-1, 1), (0.6, 0.6)))
    fr = random_frame()
    m = march_in_time(f, 0.3, fr, 1.0, 0.01)
    back = march_in_time(f, 0.3, m.frame, 0.01, 1.0)
    np.testing.assert_allclose(back.frame.as_array(), fr.as_array(), atol=1e-6)


def test_time_march_norm_drift():
    f = AnsatzField(CornerData((-1, 1), (0.6, 0.6)))
    m = march_in_time(f, 0.2, Frame.canonical(), 1.0, 1e-3, project=False)
    assert m.drift <= 1e-8
    assert m.frame.defect() <= 1e-8


def test_time_march_step_cap():
    f = one_corner()
    with pytest.raises(IntegrationError) as exc:
        march_in_time(f, 0.5, Frame.canonical(), 1.0, 1e-3, max_steps=10)
    assert 1e-3 < exc.value.reached < 1.0


def test_space_march_zero_field():
    f = AnsatzField(CornerData((), ()))
    fr = random_frame()
    fld = integrate_frame_in_space(f, 0.1, fr, Grid(-2, 2, 0.01))
    np.testing.assert_allclose(fld.frames, np.tile(fr.as_array(), (fld.grid.n, 1)), atol=1e-15)


def test_space_march_refinement_error():
    f = one_corner()
    with pytest.raises(RefinementError) as exc:
        integrate_frame_in_space(f, 1e-3, Frame.canonical(), Grid(-1, 1, 0.01), substeps=1)
    assert exc.value.suggested > 0


def test_space_march_orthonormality_and_tx():
    f = AnsatzField(CornerData((-1, 1), (0.6, 0.6)))
    s = HasimotoSampler(f)
    fld = s.field(0.01, Grid(-10, 10, 1e-3))
    assert fld.drift <= 1e-8
    assert fld.orthonormality_defect() <= 1e-8
    np.testing.assert_allclose(np.linalg.norm(fld.tx, axis=1), np.abs(f.eval_u(0.01, fld.x)),
                               rtol=0, atol=1e-10)
    np.testing.assert_allclose(np.einsum("ij,ij->i", fld.tx, fld.T), 0.0, atol=1e-10)


def test_space_march_rk4_drift_order():
    f = AnsatzField(CornerData((-1, 1), (0.6, 0.6)))
    fr = march_in_time(f, 0.0, Frame.canonical(), 1.0, 0.005).frame
    d = []
    for dx in (1e-3, 5e-4):
        fld = integrate_frame_in_space(f, 0.005, fr, Grid(-2, 2, dx), substeps=1)
        d.append(fld.drift)
    # skew linear system: the per-step defect is O(dx^6), at least the required dx^4
    assert math.log2(d[0] / d[1]) >= 4.0


def test_tx_matches_derivative_of_T():
    f = AnsatzField(CornerData((-1, 1), (0.6, 0.6)))
    fld = HasimotoSampler(f).field(0.05, Grid(-3, 3, 1e-3))
    T, h = fld.T, fld.grid.dx
    dT = (T[:-4] - 8 * T[1:-3] + 8 * T[3:-1] - T[4:]) / (12 * h)
    np.testing.assert_allclose(dT, fld.tx[2:-2], atol=1e-6)


def test_single_corner_matches_selfsimilar():
    a, t = 0.5, 0.01
    fld = HasimotoSampler(one_corner(a)).field(t, Grid(-1, 1, 1e-3))
    _, Ts = SelfSimilar(a, Ymax=20.0, dy=1e-3).state(t, fld.x)
    rot, _ = Rotation.align_vectors(Ts, fld.T)
    d = np.linalg.norm(rot.apply(fld.T) - Ts, axis=1)
    assert d.max() <= 5e-3


def test_mixed_partials_single_corner():
    f = one_corner(0.7)
    fr0 = Frame.canonical()
    t, x1 = 0.05, 0.8
    # (t0, 0) -> (t, 0) -> (t, x1)
    a = integrate_frame_in_space(f, t, integrate_frame_in_time(f, 0.0, fr0, 1.0, t),
                                 Grid(-1, 1, 1e-3))
    # (t0, 0) -> (t0, x1) -> (t, x1)
    b0 = integrate_frame_in_space(f, 1.0, fr0, Grid(-1, 1, 1e-3))
    k = b0.grid.index_of(x1)
    b = integrate_frame_in_time(f, x1, b0.frame(k), 1.0, t)
    np.testing.assert_allclose(a.frame(k).as_array(), b.as_array(), atol=1e-5)


def test_curve_straight_for_zero_field():
    f = AnsatzField(CornerData((), ()))
    fr = random_frame()
    fld = integrate_frame_in_space(f, 0.1, fr, Grid(-1, 1, 0.01))
    P = np.array([0.3, -1.0, 2.0])
    c = reconstruct_curve(fld, (0.0, P))
    np.testing.assert_allclose(c.points, P + fld.x[:, None] * fr.T, atol=1e-13)


def test_curve_arclength_and_tangent():
    f = AnsatzField(CornerData((-1, 1), (0.6, 0.6)))
    s = HasimotoSampler(f)
    c = s.curve(0.05, Grid(-2, 2, 1e-3))
    fld = s.field(0.05, Grid(-2, 2, 1e-3))
    # chord sums converge like h^2; extrapolate from spacings h and 2h
    chord = [np.linalg.norm(np.diff(c.points[::k], axis=0), axis=1).sum() for k in (1, 2)]
    np.testing.assert_allclose((4 * chord[0] - chord[1]) / 3, 4.0, atol=1e-6)
    P, h = c.points, c.grid.dx
    dchi = (P[:-4] - 8 * P[1:-3] + 8 * P[3:-1] - P[4:]) / (12 * h)
    np.testing.assert_allclose(dchi, fld.T[2:-2], atol=1e-6)


def test_curve_corner_bound():
    # chi(t) and chi at a much smaller time share frame and anchor history
    a, t, t_small = 0.5, 0.01, 1e-6
    s = HasimotoSampler(one_corner(a))
    g = Grid(-1, 1, 1e-3)
    c = s.curve(t, g).points
    c0 = s.curve(t_small, g).points
    d = np.linalg.norm(c - c0, axis=1)
    assert d.max() <= 2 * a * (math.sqrt(t) + math.sqrt(t_small)) + 1e-4
    assert d.max() >= 0.9 * 2 * a * math.sqrt(t)


def test_curve_csv(tmp_path):
    s = HasimotoSampler(one_corner())
    fld = s.field(0.1, Grid(-1, 1, 0.5))
    p = fld.write_csv(tmp_path / "f.csv")
    head = open(p).readline().strip().split(",")
    assert head == ["x", "Tx", "Ty", "Tz", "e1x", "e1y", "e1z", "e2x", "e2y", "e2z",
                    "txx", "txy", "txz"]
    p = s.curve(0.1, Grid(-1, 1, 0.5)).write_csv(tmp_path / "c.csv")
    assert open(p).readline().strip() == "x,px,py,pz"


def test_polyline_limit_error_zero_time():
    poly = build_polyline(CornerData.equal_angle([-1, 1], 1.0))
    assert polyline_limit_error(0.0, poly, np.linspace(-3, 3, 601)) == 0.0


def test_polyline_limit_error_sqrt_rate():
    poly = build_polyline(CornerData.equal_angle([-1, 1], math.pi / 2))
    s = HasimotoSampler(AnsatzField(poly.corners))
    al = align_to_polyline(s.field(1e-5, Grid(-4.25, 4.25, 0.25)), poly)
    errs = []
    for t in (1e-2, 2.5e-3, 6.25e-4):
        fld = s.field(t, Grid(-3, 3, 1e-3))
        errs.append(polyline_limit_error(t, poly, fld, delta_d=0.2, alignment=al))
    r = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((r > 1.5) & (r < 2.5)), r


def test_polyline_limit_error_single_corner_bound():
    a = 0.5
    poly = build_polyline(CornerData((0,), (a,)))
    s = HasimotoSampler(AnsatzField(poly.corners))
    al = align_to_polyline(s.field(1e-5, Grid(-3.25, 3.25, 0.25)), poly)
    dd = 0.2
    for t in (1e-2, 2.5e-3):
        fld = s.field(t, Grid(-3, 3, 1e-3))
        err, excl = polyline_limit_error(t, poly, fld, delta_d=dd, alignment=al,
                                         return_excluded=True)
        assert excl > 0
        assert err <= 3 * 2 * a * math.sqrt(t) / dd


def test_alignment_residual_small_two_corners():
    poly = build_polyline(CornerData.equal_angle([-1, 1], math.pi / 2))
    s = HasimotoSampler(AnsatzField(poly.corners))
    al = align_to_polyline(s.field(1e-5, Grid(-4.25, 4.25, 0.25)), poly)
    assert al.residual_angle < 1e-2
    np.testing.assert_allclose(al.R @ al.R.T, np.eye(3), atol=1e-12)
