import numpy as np
import pytest

from horocat.core.coxeter import (build_rep, chamber_separation, classify_coxeter_words, in_chamber,
                                  parse_coxeter_word, reduced_words, tits_cone_membership, wehler_dictionary,
                                  word_to_matrix)
from horocat.core.errors import DegenerateForm, InvalidGenerator
from horocat.core.isometries import IsometryKind, classify


@pytest.fixture(scope="module")
def rank3():
    return build_rep(2)


def test_signature_by_rank():
    for n in range(2, 7):
        rep = build_rep(n)
        assert not rep.degenerate
        assert rep.form.negated
        assert rep.form.inertia == (1, 0, n)


def test_rank_two_is_degenerate():
    rep = build_rep(1)
    assert rep.degenerate
    with pytest.raises(DegenerateForm):
        rep.group()
    with pytest.raises(DegenerateForm):
        classify_coxeter_words(rep, 2)


def test_reflections_are_involutions(rank3):
    for s in rank3.reflections:
        assert (s @ s).is_identity
        c = classify(s)
        assert c.kind is IsometryKind.ELLIPTIC
        assert c.order == 2


def test_parse_coxeter_word():
    assert parse_coxeter_word("s1s2s3", 3) == [0, 1, 2]
    assert parse_coxeter_word("1 2, 3", 3) == [0, 1, 2]
    assert parse_coxeter_word("abc", 3) == [0, 1, 2]
    with pytest.raises(InvalidGenerator):
        parse_coxeter_word("14", 3)
    with pytest.raises(InvalidGenerator):
        parse_coxeter_word("1?", 3)


def test_products_of_two_reflections_are_parabolic(rank3):
    assert classify(word_to_matrix(rank3, "12")).kind is IsometryKind.PARABOLIC
    assert classify(word_to_matrix(build_rep(4), "35")).kind is IsometryKind.PARABOLIC


def test_product_of_three_reflections_is_loxodromic(rank3):
    c = classify(word_to_matrix(rank3, "123"))
    assert c.kind is IsometryKind.LOXODROMIC
    # trace 17 and determinant -1 give eigenvalues -1, 9 +- 4 sqrt(5)
    assert c.spectral_radius.value == pytest.approx(9.0 + 4.0 * np.sqrt(5.0), rel=1e-12)


def test_reduced_word_counts():
    for rank in (3, 4):
        for length in range(4):
            assert len(reduced_words(rank, length)) == (1 if length == 0 else rank * (rank - 1) ** (length - 1))


def test_classification_counts(rank3):
    stats = classify_coxeter_words(rank3, 3)
    assert stats.counts[1] == {"elliptic": 3}
    assert stats.counts[2] == {"parabolic": 6}
    assert sum(stats.counts[3].values()) == 12
    assert "123" in stats.spectral_radii


def test_chamber_contains_witness(rank3):
    assert in_chamber(rank3, rank3.form.witness, strict=True)
    assert not in_chamber(rank3, word_to_matrix(rank3, "1").apply(rank3.form.witness))


def test_tits_cone_membership(rank3):
    verdict = tits_cone_membership(rank3, (1, 1, 1), 2)
    assert verdict.found
    assert verdict.word == ""
    verdict = tits_cone_membership(rank3, (3, 1, 1), 2)
    assert verdict.found
    assert verdict.word == "1"


def test_chamber_images_are_separated(rank3):
    walls = chamber_separation(rank3, 3)
    assert len(walls) == 3 + 6 + 12
    assert all(wall >= 0 for wall in walls.values())


def test_wehler_dictionary():
    entries = wehler_dictionary(3)
    assert len(entries) == 4
    assert entries[0]["reflection"] == "s1"
