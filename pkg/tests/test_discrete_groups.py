from dataclasses import replace

import numpy as np
import pytest

from horocat.core.discrete_groups import (boundary_stabilizer, conical_limit_test, dirichlet_domain, limit_sample,
                                          parse_word, properness_witness, tiling_check, word_length)
from horocat.core.errors import BudgetExceeded, InvalidGenerator, InvalidPoint, NotInBall, StabilizerNontrivial
from horocat.core.isometries import axis_points, classify
from horocat.core.models import BoundaryPoint, Model, ModelPoint, to_hyperboloid
from horocat.core.presets import load_preset


@pytest.fixture(scope="module")
def modular():
    return load_preset("modular").group()


@pytest.fixture(scope="module")
def modular_domain(modular):
    return dirichlet_domain(modular, (1, 0, 4), 8)


def test_parse_word():
    assert parse_word("aB b", 2) == [(0, False), (1, True), (1, False)]
    with pytest.raises(InvalidGenerator):
        parse_word("ac", 2)
    with pytest.raises(InvalidGenerator):
        parse_word("a1", 2)


def test_word_ball_deduplicates(modular):
    # S is an involution, so A and a coincide
    assert len(modular.word_ball(1)) == 4
    assert modular.element("aa").is_identity
    assert word_length(modular, modular.element("Ab"), 3) == 2


def test_word_length_outside_ball(modular):
    with pytest.raises(NotInBall):
        word_length(modular, modular.element("bbbbb"), 2)


def test_free_group_ball_growth():
    group = load_preset("free2").group()
    assert [len(group.layer(k)) for k in range(4)] == [1, 4, 12, 36]
    assert len(group.word_ball(3)) == 53


def test_element_cap():
    group = load_preset("free2").group(element_cap=10)
    with pytest.raises(BudgetExceeded) as info:
        group.word_ball(3)
    # 5 elements at radius 1, then 6 new ones of radius 2 push past the cap
    assert len(info.value.partial) == 11
    assert len(group.dedup_index) == 5
    assert len(group.word_ball(1)) == 5
    with pytest.raises(BudgetExceeded):
        group.word_ball(2)
    assert len(group.dedup_index) == 5


def test_modular_dirichlet_domain(modular, modular_domain):
    assert len(modular_domain.bisectors) == 3
    assert {b.element.word for b in modular_domain.bisectors} == {"a", "b", "B"}
    assert modular_domain.certified_locally_finite
    assert modular_domain.contains((1, 0, 4), strict=True)
    assert modular_domain.contains_ideal((0, 0, 1))
    assert not modular_domain.contains((1, 0, 1), strict=True)
    # Every other bisector of the radius-8 ball is dropped with an exact proof
    assert len(modular_domain.redundant) == len(modular.word_ball(8)) - 1 - 3
    assert all(r.holds(modular_domain) for r in modular_domain.redundant)
    assert all(w >= 0 for r in modular_domain.redundant for w in r.weights)


def test_tampered_redundancy_proof_fails(modular_domain):
    proof = modular_domain.redundant[0]
    assert proof.holds(modular_domain)
    bumped = tuple(w + 1 for w in proof.weights)
    assert not replace(proof, weights=bumped).holds(modular_domain)
    negative = (-proof.weights[0] - 1,) + proof.weights[1:]
    assert not replace(proof, weights=negative).holds(modular_domain)


def test_basepoint_with_stabilizer_is_rejected(modular):
    with pytest.raises(StabilizerNontrivial):
        dirichlet_domain(modular, (1, 0, 1), 2)


def test_spacelike_basepoint_is_invalid(modular):
    with pytest.raises(InvalidPoint):
        dirichlet_domain(modular, (0, 1, 0), 2)
    # The past sheet is rejected too
    with pytest.raises(InvalidPoint):
        dirichlet_domain(modular, (-1, 0, -4), 2)


def test_modular_translates_tile(modular, modular_domain):
    report = tiling_check(modular_domain, modular, 8, 2.0, np.random.default_rng(7), samples=200)
    assert report.covered == 200
    assert report.overlaps == 0
    assert report.single_interior == 200
    assert report.passed


def test_tiling_detects_a_missing_facet(modular, modular_domain):
    # Without the T facet the region is unbounded to one side and overlaps its translates
    broken = replace(modular_domain, bisectors=tuple(b for b in modular_domain.bisectors if b.element.word != "b"))
    assert len(broken.bisectors) == 2
    report = tiling_check(broken, modular, 8, 2.0, np.random.default_rng(7), samples=200)
    assert report.overlaps > 0
    assert not report.passed


def test_cusp_stabilizer_rank(modular):
    frame = modular.frame
    stabilizer = boundary_stabilizer(modular, frame.boundary((0, 0, 1)), 3)
    assert stabilizer.bieberbach_rank == 1
    assert "b" in [g.word for g in stabilizer.parabolics]


def test_limit_sample_directions_are_unit():
    group = load_preset("free2").group()
    sample = limit_sample(group, 4)
    directions = sample.directions()
    assert len(directions) > 0
    assert np.linalg.norm(directions, axis=1) == pytest.approx(np.ones(len(directions)))
    with pytest.raises(ValueError):
        limit_sample(group, 0)


def test_dedup_index_and_conjugation(modular):
    modular.word_ball(1)
    assert {"", "a", "b", "B"} <= set(modular.dedup_index.values())
    conj = modular.conjugated(modular.element("b"))
    assert conj.generators[0].matrix == modular.element("baB").matrix
    assert len(conj.word_ball(1)) == 4


def test_properness_witness_at_2i(modular):
    witness = properness_witness(modular, (1, 0, 4), 2)
    # T moves 2i by 2 asinh(1/4), the least displacement in the ball
    assert witness.ball_radius == pytest.approx(np.arcsinh(0.25))
    assert witness.counts == (3, 3)
    assert witness.stable


def test_loxodromic_endpoint_is_conical():
    group = load_preset("cyclic-lox").group()
    c = classify(group.generators[0])
    on_axis = axis_points(c, 0.0)
    verdict = conical_limit_test(group, c.axis[0], 6, basepoint=on_axis)
    assert verdict.conical and not verdict.inconclusive
    assert verdict.reach > 0.0


def test_parabolic_cusp_is_not_conical(modular):
    frame = modular.frame
    verdict = conical_limit_test(modular, frame.boundary((0, 0, 1)), 6, basepoint=frame.point((1, 0, 4)))
    assert not verdict.conical
    assert not verdict.inconclusive


def test_finite_group_has_no_conical_points():
    torsion = load_preset("torsion").group()
    origin = torsion.frame.point((1, 0, 0, 0))
    verdict = conical_limit_test(torsion, BoundaryPoint.from_unit([1.0, 0.0, 0.0]), 4, basepoint=origin)
    assert not verdict.conical


def test_limit_sample_grows_for_a_free_group():
    group = load_preset("parabolic-pair").group()
    counts = [len(limit_sample(group, depth).points) for depth in (4, 6, 8)]
    assert counts[0] < counts[1] < counts[2]


def test_cyclic_limit_sample_is_two_points():
    group = load_preset("cyclic-lox").group()
    c = classify(group.generators[0])
    sample = limit_sample(group, 6)
    assert len(sample.points) == 2
    for point, _ in sample.points:
        assert min(point.angle_to(p) for p in c.fixed_boundary) < 1e-2


def test_finite_group_has_empty_limit_sample():
    sample = limit_sample(load_preset("torsion").group(), 10)
    assert sample.points == ()


def test_limit_sample_is_conjugation_equivariant(modular):
    frame = modular.frame
    h = modular.element("b")
    base = frame.point((1, 0, 4))
    x = to_hyperboloid(base)
    moved = ModelPoint(Model.HYPERBOLOID, tuple(frame.matrix(h) @ x))
    sample = limit_sample(modular, 3, base)
    conj = limit_sample(modular.conjugated(h), 3, moved)
    assert [w for _, w in conj.points] == [w for _, w in sample.points]
    for point, word in conj.points:
        image = frame.matrix(h @ modular.element(word)) @ x
        assert point.direction == pytest.approx(image[1:] / np.linalg.norm(image[1:]), abs=1e-9)
