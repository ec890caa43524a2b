import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from oracles import disk_distance, simplex_distance
from regulus.errors import (DimensionMismatch, EmptyIntersection, NotAutomorphism,
                            OutsideDomain)
from regulus.groups import boost, gallery_group, klein_schottky, word_ball
from regulus.hilbert import (ConvexDomain, RayTrace, act, automorphism_check, ball_interval,
                             boundary_horofunction, compact_part, extract_sequence,
                             fact_singular_value_gap, hausdorff_geodesic_bound, hilbert_distance,
                             horofunction, in_horoball, run_pipeline, sample_points,
                             union_measure)
from regulus.matrixcore import GroupElement, identity, random_sl

seeds = st.integers(min_value=0, max_value=2**32 - 1)
DISK = ConvexDomain.unit_ball(2)
TRIANGLE = ConvexDomain.simplex(2)


def _x_ray(dom=DISK):
    return RayTrace(dom, dom.base_point, np.array([1.0, 0.0]))


@pytest.mark.parametrize("t", [round(0.1 * k, 1) for k in range(1, 10)])
def test_disk_closed_form(t):
    assert abs(hilbert_distance([0.0, 0.0], [t, 0.0], DISK) - np.arctanh(t)) <= 1e-12


def test_half_log_three():
    assert abs(hilbert_distance([0.0, 0.0], [0.5, 0.0], DISK) - 0.5 * np.log(3)) < 1e-15


def test_same_point():
    assert hilbert_distance([0.2, 0.1], [0.2, 0.1], DISK) == 0.0


@given(seeds)
def test_disk_matches_hyperboloid(seed):
    p, q = sample_points(DISK, 2, np.random.default_rng(seed))
    assert abs(hilbert_distance(p, q, DISK) - disk_distance(p, q)) < 1e-9


@given(seeds)
def test_simplex_matches_barycentric(seed):
    p, q = sample_points(TRIANGLE, 2, np.random.default_rng(seed))
    assert abs(hilbert_distance(p, q, TRIANGLE) - simplex_distance(p, q, TRIANGLE.vertices)) < 1e-9


@settings(max_examples=60)
@given(seeds, st.sampled_from(["ball", "simplex"]))
def test_metric_axioms(seed, which):
    dom = DISK if which == "ball" else TRIANGLE
    x, y, z = sample_points(dom, 3, np.random.default_rng(seed))
    assert abs(hilbert_distance(x, y, dom) - hilbert_distance(y, x, dom)) < 1e-9
    assert hilbert_distance(x, z, dom) <= hilbert_distance(x, y, dom) + hilbert_distance(y, z, dom) + 1e-9


def test_outside_and_dimension():
    with pytest.raises(OutsideDomain):
        hilbert_distance([0.0, 0.0], [1.2, 0.0], DISK)
    with pytest.raises(OutsideDomain):
        hilbert_distance([0.0, 0.0], [0.6, 0.6], TRIANGLE)
    with pytest.raises(DimensionMismatch):
        hilbert_distance([0.0, 0.0, 0.0], [0.1, 0.0, 0.0], DISK)


def test_domain_validation_and_json():
    with pytest.raises(ValueError):
        ConvexDomain("ellipsoid", form=np.eye(3))
    with pytest.raises(ValueError):
        ConvexDomain("polytope", vertices=[[0.0, 0.0], [1.0, 0.0]])
    with pytest.raises(OutsideDomain):
        ConvexDomain.unit_ball(2, base_point=[2.0, 0.0])
    for dom in (DISK, TRIANGLE):
        back = ConvexDomain.from_dict(dom.to_dict())
        assert back.kind == dom.kind and np.allclose(back.base_point, dom.base_point)


def test_automorphisms():
    assert automorphism_check(np.eye(3), DISK)
    assert automorphism_check(boost(0, 1.3) @ boost(1, -0.4), DISK)
    assert not automorphism_check(random_sl(3, np.random.default_rng(0)), DISK)
    # rotation of the triangle's vertices in homogeneous coordinates
    cyc = np.array([[-1.0, -1.0, 1.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert automorphism_check(cyc, TRIANGLE)
    with pytest.raises(DimensionMismatch):
        automorphism_check(np.eye(4), DISK)


@given(seeds)
def test_distance_invariance(seed):
    r = np.random.default_rng(seed)
    g = boost(0, r.uniform(-2, 2)) @ boost(1, r.uniform(-2, 2))
    x, y = sample_points(DISK, 2, r, spread=0.6)
    assert abs(hilbert_distance(act(g, x), act(g, y), DISK) - hilbert_distance(x, y, DISK)) < 1e-8


def test_fact_identity_only():
    sup, rows = fact_singular_value_gap([identity(3)], DISK.base_point, DISK)
    assert sup == 0 and rows[0].hilbert == 0


def test_fact_powers_plateau():
    g = klein_schottky()
    powers = [g.element("a" * k) for k in range(1, 7)]
    sup_centre, _ = fact_singular_value_gap(powers, [0.0, 0.0], DISK)
    # on the axis the two sides agree up to chart rounding near the boundary
    assert sup_centre < 1e-5
    sup_off, rows = fact_singular_value_gap(powers, [0.3, 0.2], DISK)
    assert sup_centre < sup_off < np.inf
    devs = np.array([row.deviation for row in rows])
    assert np.all(np.diff(devs) >= 0)
    assert devs[-1] - devs[-2] < 1e-3 * devs[-1]


def test_fact_rejects_non_automorphism():
    orbit = [identity(3), random_sl(3, np.random.default_rng(1))]
    with pytest.raises(NotAutomorphism) as exc:
        fact_singular_value_gap(orbit, [0.0, 0.0], DISK)
    assert exc.value.index == 1


def test_ray_is_unit_speed():
    ray = _x_ray()
    for t in (0.5, 3.0, 12.0):
        assert abs(ray.distance_from(ray.base, t) - t) < 1e-9
    assert abs(hilbert_distance(ray.point(1.0), ray.point(2.5), DISK) - 1.5) < 1e-9


def test_ray_needs_boundary_target():
    with pytest.raises(ValueError):
        RayTrace(DISK, [0.0, 0.0], [0.5, 0.0])


def test_compact_part_single_ball():
    ray = _x_ray()
    assert abs(compact_part(ray, [ray.base], 2.0, 10.0)[0] - 2.0) < 1e-8
    assert abs(compact_part(ray, [ray.base], 2.0, 1.5)[0] - 1.5) < 1e-12


def test_compact_part_covered():
    ray = _x_ray()
    pts = [ray.point(k) for k in range(0, 11)]
    m, merged = compact_part(ray, pts, 0.6, 10.0)
    assert abs(m - 10.0) < 1e-8 and len(merged) == 1


@given(st.floats(0.2, 1.5), st.floats(0.0, 1.0), st.floats(2.0, 8.0), st.floats(0.0, 4.0))
@settings(max_examples=20)
def test_compact_part_monotone(r, dr, T, dT):
    ray = _x_ray()
    pts = [ray.point(k) + np.array([0.0, 0.05]) for k in (0.0, 2.5, 5.0)]
    m = compact_part(ray, pts, r, T)[0]
    assert m <= T + 1e-12
    assert compact_part(ray, pts, r + dr, T)[0] >= m - 1e-8
    assert compact_part(ray, pts, r, T + dT)[0] >= m - 1e-8


def test_union_measure():
    assert union_measure([(3, 4), (0, 1), (0.5, 2)]) == (3.0, [(0.0, 2.0), (3.0, 4.0)])


def test_ball_interval_fallback_scan():
    # two separate dips defeat unimodality; the scan returns their hull
    f = lambda t: min(abs(t - 0.2), abs(t - 0.8)) * 10
    a, b, _ = ball_interval(f, 0.5, 1.0)
    assert abs(a - 0.15) < 2e-4 and abs(b - 0.85) < 2e-4


def test_extract_identity_only():
    ex = extract_sequence(_x_ray(), [identity(3)], 0.5, 1.0, 5.0)
    assert len(ex.a_gamma) == 1 and len(ex.a_gamma_c) == 1


def test_extract_every_third():
    orbit = [GroupElement(boost(0, float(k)), inverse=boost(0, -float(k))) for k in range(10)]
    ex = extract_sequence(_x_ray(), orbit[::-1], 0.6, 2.5, 12.0)
    picked = [round(np.arccosh(g.matrix[2, 2])) for g in ex.a_gamma_c]
    assert picked == [0, 3, 6, 9]


def test_extract_empty():
    far = GroupElement(boost(1, 5.0))
    with pytest.raises(EmptyIntersection):
        extract_sequence(_x_ray(), [far], 0.5, 1.0, 5.0)


def test_extraction_separation_on_gallery():
    gens = klein_schottky()
    ray = _x_ray()
    orbit = [n.element for n in word_ball(gens, 4)]
    C = 3.0
    ex = extract_sequence(ray, orbit, 2.0, C, 8.0)
    # F counts orbit points within C of the base point
    F = sum(hilbert_distance(DISK.base_point, act(g.matrix, DISK.base_point), DISK) <= C for g in orbit)
    chosen = ex.a_gamma_c
    for g, h in zip(chosen, chosen[1:]):
        d = hilbert_distance(act(g.matrix, DISK.base_point), act(h.matrix, DISK.base_point), DISK)
        assert C <= d <= C * (F + 1) + 1e-6


def test_horofunction_trivial():
    assert horofunction([0.5, 0.0], [0.1, 0.2], [0.1, 0.2], DISK) == 0


@pytest.mark.parametrize("t", [0.2, 0.5, 0.8])
def test_boundary_horofunction_closed_form(t):
    hv = boundary_horofunction(_x_ray(), [0.0, 0.0], [t, 0.0], t_cut=20.0)
    # d(0, x) - d((t, 0), x) tends to artanh(t) as x runs out to (1, 0)
    assert abs(hv.value - np.arctanh(t)) < 1e-6
    assert hv.cauchy_gap < 1e-6


def _parabolic(s):
    # nilpotent element of so(2, 1) killing the null vector (1, 0, 1)
    x = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, -1.0], [0.0, -1.0, 0.0]])
    return expm(s * x)


def test_parabolic_fixes_point_and_form():
    p = _parabolic(0.7)
    assert np.allclose(p @ np.array([1.0, 0.0, 1.0]), [1.0, 0.0, 1.0])
    assert automorphism_check(p, DISK)


@settings(max_examples=25)
@given(seeds, st.floats(-2.0, 2.0))
def test_horoballs_preserved_by_parabolic(seed, s):
    ray = _x_ray()
    p = _parabolic(s)
    x, y = sample_points(DISK, 2, np.random.default_rng(seed), spread=0.5)
    before = boundary_horofunction(ray, x, y).value
    after = boundary_horofunction(ray, act(p, x), act(p, y)).value
    assert abs(before - after) < 1e-6
    if abs(before) > 1e-5:
        assert in_horoball(ray, x, y) == in_horoball(ray, act(p, x), act(p, y))


def test_hausdorff_identical():
    lhs, rhs = hausdorff_geodesic_bound([0.0, 0.1], [0.5, 0.1], [0.0, 0.1], [0.5, 0.1], DISK, count=30)
    assert lhs < 1e-8 and rhs == 0


def test_hausdorff_parallel_chords():
    r = np.random.default_rng(7)
    for _ in range(100):
        y1, y2 = r.uniform(-0.6, 0.6, 2)
        xs = r.uniform(-0.7, 0.7, 4)
        p1, q1 = [xs[0], y1], [xs[1], y1]
        p2, q2 = [xs[2], y2], [xs[3], y2]
        lhs, rhs = hausdorff_geodesic_bound(p1, q1, p2, q2, DISK, count=25)
        assert lhs <= rhs + 1e-6


def test_hausdorff_common_endpoint():
    lhs, rhs = hausdorff_geodesic_bound([0.0, 0.0], [1.0, 0.0], [0.0, 0.5], [1.0, 0.0], DISK,
                                        count=50, length=8.0)
    assert lhs <= rhs + 1e-6


def test_pipeline_short_input():
    rep = run_pipeline(klein_schottky(), DISK, "toward:1,1", 2.0, 3.0, 10.0, radius=4)
    assert rep.status in ("short-input", "pass", "fail")
    assert 0 <= rep.fraction <= 1


def test_pipeline_bad_arguments():
    with pytest.raises(ValueError):
        run_pipeline(klein_schottky(), DISK, "axis:a", 2.0, 3.0, 0.0)
    with pytest.raises(ValueError):
        run_pipeline(klein_schottky(), DISK, "sideways:a", 2.0, 3.0, 5.0)
