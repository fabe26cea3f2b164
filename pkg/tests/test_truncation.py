import numpy as np
import pytest

from horocat.core.discrete_groups import dirichlet_domain
from horocat.core.errors import InsideHoroball, NoDisjointLevel, RankDeficientCusp
from horocat.core.models import BoundaryPoint, Model, ModelPoint, dist
from horocat.core.presets import load_preset
from horocat.core.truncation import (CuspOrbit, Horoball, HoroballFamily, HorosphericalArc, HyperbolicArc,
                                     Cat0Report, Cat0Suite, LimitHull, build_horoball_family, cat0_check, cat0_suite,
                                     certify_disjoint, compactness_check, detect_cusps, random_outside_point,
                                     rank_of_cusp, truncated_distance, truncated_geodesic)


@pytest.fixture(scope="module")
def top():
    """Horoball at (1, 0, 1) of level 2, i.e. height > 2 in its own chart"""
    return Horoball.at(BoundaryPoint.from_null([1.0, 0.0, 1.0]), 2.0)


@pytest.fixture(scope="module")
def modular():
    group = load_preset("modular").group()
    domain = dirichlet_domain(group, (1, 0, 4), 4)
    return group, domain, detect_cusps(group, domain, 4)


def on_chart(ball, w, height):
    return ModelPoint(Model.HYPERBOLOID, tuple(ball.chart().to_hyperboloid([w], height)))


def test_horoball_geometry(top):
    origin = np.array([1.0, 0.0, 0.0])
    assert top.c == pytest.approx(0.5)
    assert not top.contains(origin)
    unit = Horoball.at(BoundaryPoint.from_null([1.0, 0.0, 1.0]), 1.0)
    centre, rho = unit.ball_model()
    assert rho == pytest.approx(0.5)
    assert centre == pytest.approx(np.array([0.0, 0.5]))
    # The origin is the point of the horosphere farthest from the base
    assert unit.antipodal_point() == pytest.approx(origin)
    assert unit.contains(origin, closed=True)


def test_opposite_horoballs_are_disjoint():
    up = Horoball.at(BoundaryPoint.from_null([1.0, 0.0, 1.0]), 1.0)
    down = Horoball.at(BoundaryPoint.from_null([1.0, 0.0, -1.0]), 1.0)
    # <v1, v2> = 2 = 2 c1 c2: the closures touch at the origin
    assert not up.disjoint_from(down)
    assert up.with_level(1.5).disjoint_from(down.with_level(1.5))


def test_geodesic_on_horosphere_runs_along_it(top):
    a = 0.75
    x = on_chart(top, -a, top.level)
    y = on_chart(top, a, top.level)
    path = truncated_geodesic(x, y, HoroballFamily.single(top))
    assert path.total_length == pytest.approx(2.0 * a / top.level, rel=1e-9)
    assert len(path.arcs) == 1
    assert isinstance(path.arcs[0], HorosphericalArc)
    assert path.horoballs_crossed == [0]
    assert path.total_length > dist(x, y)


def test_geodesic_away_from_horoball_is_hyperbolic(top):
    x = ModelPoint.of("ball", (-0.3, -0.4))
    y = ModelPoint.of("ball", (0.35, -0.2))
    path = truncated_geodesic(x, y, HoroballFamily.single(top))
    assert len(path.arcs) == 1
    assert isinstance(path.arcs[0], HyperbolicArc)
    assert path.total_length == pytest.approx(dist(x, y))
    assert truncated_distance(y, x, HoroballFamily.single(top)) == pytest.approx(dist(x, y))


def test_endpoint_inside_horoball(top):
    family = HoroballFamily.single(top)
    with pytest.raises(InsideHoroball):
        truncated_geodesic(on_chart(top, 0.0, 4.0), ModelPoint.of("ball", (0.0, -0.5)), family)


def test_pure_hyperbolic_triangle_is_strictly_thin(top):
    x = ModelPoint.of("ball", (0.0, -0.6))
    y = ModelPoint.of("ball", (0.5, -0.1))
    z = ModelPoint.of("ball", (-0.5, -0.2))
    report = cat0_check(x, y, z, HoroballFamily.single(top))
    assert report.pure_hyperbolic
    assert report.pairs > 0
    assert report.excess < 0.0
    assert report.strictly_negative
    assert report.passed


def test_modular_group_has_one_full_rank_cusp(modular):
    group, domain, cusps = modular
    assert len(cusps) == 1
    assert cusps[0].rank == 1
    assert cusps[0].full_rank
    assert cusps[0].representative.exact == (0, 0, 1)
    assert rank_of_cusp(group, cusps[0].representative, 4) == 1


def test_modular_horoballs_at_level_one(modular):
    group, _, cusps = modular
    family = build_horoball_family(group, cusps, 3)
    # Translates of the cusp at infinity touch the horoball of height 1
    assert family.level == pytest.approx(1.0, rel=1e-9)
    assert family.level > 1.0
    ok, exact_checked = certify_disjoint(family)
    assert ok
    assert exact_checked > 0
    assert len(family.representatives) == 1
    assert len(family.translates) > 1


def test_level_below_tangency_is_rejected(modular):
    group, _, cusps = modular
    with pytest.raises(NoDisjointLevel):
        build_horoball_family(group, cusps, 3, level=0.5)


def test_rank_deficient_cusp_is_rejected(modular):
    group, _, cusps = modular
    weak = CuspOrbit(cusps[0].representative, cusps[0].members, cusps[0].stabilizer, 0, group.form.n)
    with pytest.raises(RankDeficientCusp):
        build_horoball_family(group, [weak], 3)


def test_limit_hull_of_a_circle_is_the_disk():
    angles = np.linspace(0.0, 2.0 * np.pi, 400, endpoint=False)
    hull = LimitHull(np.column_stack([np.cos(angles), np.sin(angles)]))
    assert not hull.degenerate
    assert hull.contains_klein([0.0, 0.0])
    assert hull.contains_klein([0.9, 0.0])
    assert not hull.contains_klein([1.0, 0.0])


def test_degenerate_limit_hull_uses_segment():
    hull = LimitHull(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    assert hull.degenerate
    assert hull.contains_klein([0.2, 0.0])
    assert not hull.contains_klein([0.0, 0.2])


def test_truncation_makes_the_cusp_compact(modular):
    group, domain, cusps = modular
    family = build_horoball_family(group, cusps, 3)
    before = compactness_check(domain, None, None, cusps, refinements=(32, 64))
    after = compactness_check(domain, None, family, cusps, refinements=(32, 64))
    assert before.unbounded
    assert not after.unbounded
    assert after.bounded_at_scale
    # The farthest point of the truncated domain is the corner at exp(i pi / 3)
    assert max(after.suprema) == pytest.approx(np.arccosh(1.0 + (0.25 + (2.0 - np.sqrt(3.0) / 2.0) ** 2)
                                                          / (4.0 * np.sqrt(3.0) / 2.0)), abs=1e-3)


def test_strict_margin_applies_once_sides_are_long():
    long_sides = Cat0Report(-5e-5, 0.0, 9, (1.0, 1.2, 0.8), True)
    short_side = Cat0Report(-5e-5, 0.0, 9, (0.3, 1.2, 1.0), True)
    assert long_sides.passed and not long_sides.strictly_negative
    assert short_side.strictly_negative
    assert not Cat0Report(0.0, 0.0, 9, (0.1, 0.1, 0.1), True).strictly_negative
    # A thin pure triangle is not excused from the margin
    thin = Cat0Report(-2e-5, 0.0, 9, (2.0, 2.0, 0.5), True)
    suite = Cat0Suite((short_side, thin), seed=0)
    assert suite.pure_failures == 1
    assert not suite.passed
    assert suite.to_json()["pure_hyperbolic_failures"] == 1


def test_truncated_metric_is_symmetric_and_triangular(modular):
    group, domain, cusps = modular
    family = build_horoball_family(group, cusps, 3)
    rng = np.random.default_rng(11)
    x, y, z = (random_outside_point(domain.basepoint, 3.0, family, rng) for _ in range(3))
    xy = truncated_distance(x, y, family)
    xz = truncated_distance(x, z, family)
    yz = truncated_distance(y, z, family)
    assert truncated_distance(y, x, family) == pytest.approx(xy, abs=1e-6)
    assert truncated_distance(z, y, family) == pytest.approx(yz, abs=1e-6)
    assert xz <= xy + yz + 1e-6
    assert xy <= xz + yz + 1e-6
    assert yz <= xy + xz + 1e-6
    # Removing horoballs only lengthens paths
    assert xy >= dist(x, y) - 1e-8


def test_cat0_suite_passes_on_triangles_crossing_horoballs(modular):
    group, domain, cusps = modular
    family = build_horoball_family(group, cusps, 3)
    suite = cat0_suite(family, domain.basepoint, 4, seed=5)
    assert any(not r.pure_hyperbolic for r in suite.reports)
    assert all(r.passed for r in suite.reports)
    assert suite.pure_failures == 0
    assert suite.passed


def test_cat0_suite_is_independent_of_jobs(top):
    family = HoroballFamily.single(top)
    origin = ModelPoint(Model.HYPERBOLOID, (1.0, 0.0, 0.0))
    serial = cat0_suite(family, origin, 3, seed=2, radius=1.0)
    parallel = cat0_suite(family, origin, 3, seed=2, radius=1.0, jobs=2)
    assert parallel.to_json() == serial.to_json()
