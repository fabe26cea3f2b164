import numpy as np
import pytest

from horocat.core.errors import NotLoxodromic
from horocat.core.group_properties import (AdditivityReport, AdditivityRow, TitsKind, burnside_check, distortion_profile, finite_subgroup_census,
                                           ping_pong_certificate, reduce_word, tits_classify,
                                           translation_additivity_check)
from horocat.core.presets import load_preset


@pytest.fixture(scope="module")
def torsion():
    return load_preset("torsion").group()


@pytest.fixture(scope="module")
def free2():
    return load_preset("free2").group()


def test_reduce_word():
    assert reduce_word("aAb") == "b"
    assert reduce_word("abBA") == ""
    assert reduce_word("ab ab") == "abab"
    assert reduce_word("aab", "coxeter") == "b"
    assert reduce_word("abba", "coxeter") == ""
    assert reduce_word("aA", "coxeter") == ""


def test_cyclic_group_is_virtually_abelian():
    verdict = tits_classify(load_preset("cyclic-lox").group(), 3)
    assert verdict.kind is TitsKind.VIRTUALLY_ABELIAN
    assert verdict.rank == 1


def test_finite_group_is_virtually_abelian(torsion):
    verdict = tits_classify(torsion, 10)
    assert verdict.kind is TitsKind.VIRTUALLY_ABELIAN
    assert verdict.rank == 0


def test_rank_one_lattice_is_virtually_abelian():
    verdict = tits_classify(load_preset("pell").group(), 2)
    assert verdict.kind is TitsKind.VIRTUALLY_ABELIAN
    assert verdict.rank == 1


def test_free_group_has_ping_pong_certificate(free2):
    verdict = tits_classify(free2, 2)
    assert verdict.kind is TitsKind.CONTAINS_FREE_GROUP
    certificate = verdict.certificate
    assert 1 <= certificate.power <= 3
    assert 0.0 < certificate.least_aperture <= certificate.aperture
    assert certificate.words_checked == 200


def test_ping_pong_needs_loxodromics():
    modular = load_preset("modular").group()
    with pytest.raises(NotLoxodromic):
        ping_pong_certificate(modular.element("b"), modular.element("ab"))


def test_census_of_finite_group(torsion):
    census = finite_subgroup_census(torsion, 10)
    assert census.classes[0].order == 1
    assert 48 % census.bound == 0
    assert {2, 3, 4} <= set(census.orders)


def test_census_of_modular_group():
    census = finite_subgroup_census(load_preset("modular").group(), 3)
    assert census.orders == [1, 2, 3]
    assert census.bound == 3


def test_burnside_on_finite_group(torsion):
    report = burnside_check(torsion, 10, 30, seed=1)
    assert report.passed
    assert report.non_torsion == 0
    assert all(48 % size == 0 for size in report.closure_sizes)


def test_burnside_counts_infinite_closures():
    report = burnside_check(load_preset("modular").group(), 2, 20, seed=3)
    assert report.passed
    assert report.non_torsion + len(report.closure_sizes) == 20


def test_free_generators_are_undistorted(free2):
    profile = distortion_profile(free2, "a", 10)
    assert [ratio for _, _, ratio in profile.rows] == [1.0] * 10
    assert profile.undistorted
    profile = distortion_profile(free2, "ab", 10)
    assert profile.min_ratio == 2.0
    assert profile.lower_bound > 0.0


def test_distortion_by_enumeration():
    modular = load_preset("modular").group()
    profile = distortion_profile(modular, "b", 3)
    assert not profile.partial
    assert profile.infinite_order
    assert [length for _, length, _ in profile.rows] == [1, 2, 3]


def test_translation_length_is_additive():
    g = load_preset("cyclic-lox").group().element("a")
    report = translation_additivity_check(g, 5, displacement_upto=0)
    assert report.passed
    assert all(row.exact for row in report.rows)
    assert report.rows[-1].power_log == pytest.approx(5 * report.log_lambda)


def test_pell_unit_displacement_is_additive_to_twenty():
    g = load_preset("pell").group().element("a")
    report = translation_additivity_check(g, 20, displacement_upto=0)
    assert report.log_lambda == pytest.approx(np.log(3 + 2 * np.sqrt(2)))
    assert report.passed
    assert report.mismatches() == []
    for row in report.rows:
        assert row.axis_displacement == pytest.approx(row.n * np.log(3 + 2 * np.sqrt(2)), abs=1e-6 * row.n)


def test_additivity_flags_a_displacement_mismatch():
    good = AdditivityRow(1, 1.0, 1.0, True, 1.0)
    off = AdditivityRow(2, 2.0, 2.0, True, 2.5)
    report = AdditivityReport("a", 1.0, (good, off))
    assert report.mismatches() == [2]
    assert not report.passed
    assert report.to_json()["mismatches"] == [2]


def test_additivity_needs_loxodromic():
    modular = load_preset("modular").group()
    with pytest.raises(NotLoxodromic):
        translation_additivity_check(modular.element("b"), 3)
