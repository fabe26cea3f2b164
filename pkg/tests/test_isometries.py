import itertools

import numpy as np
import pytest

from horocat.core.errors import NotAnIsometry, NotLoxodromic
from horocat.core.forms import FormIsometry, QuadraticForm
from horocat.core.isometries import (DISCRIMINANT_GRAM, IsometryKind, axis_points, char_poly, classify, conjugate,
                                     frame_for, min_displacement, order_of_elliptic, power_charpoly, sym_square,
                                     translation_length)
from horocat.core.presets import CAT_MAP, S, T

# lambda(A)^2 for the cat map A, the dominant eigenvalue of its symmetric square
CAT_RADIUS = ((3.0 + np.sqrt(5.0)) / 2.0) ** 2


@pytest.fixture(scope="module")
def form():
    return QuadraticForm.from_gram(DISCRIMINANT_GRAM, witness=(1, 0, 1))


def element(matrix, form, word="a"):
    return FormIsometry.checked(sym_square(matrix), form, word)


def test_sym_square_preserves_discriminant(form):
    for matrix in (S, T, CAT_MAP, ((3, -1), (1, 0))):
        FormIsometry.checked(sym_square(matrix), form)
    with pytest.raises(NotAnIsometry):
        sym_square(((2, 0), (0, 1)))


def test_involution_is_elliptic(form):
    c = classify(element(S, form))
    assert c.kind is IsometryKind.ELLIPTIC
    assert order_of_elliptic(c) == 2
    assert translation_length(c).value == 0.0


def test_order_three_rotation(form):
    # ST has order 3 in PSL2(Z)
    c = classify(element(((0, -1), (1, 1)), form))
    assert c.kind is IsometryKind.ELLIPTIC
    assert c.order == 3
    assert c.fixed_interior is not None


def test_translation_is_parabolic(form):
    c = classify(element(T, form))
    assert c.kind is IsometryKind.PARABOLIC
    assert c.fixed_boundary[0].exact == (0, 0, 1)
    assert translation_length(c).value == 0.0
    assert not translation_length(c).attained


def test_cat_map_is_loxodromic(form):
    c = classify(element(CAT_MAP, form))
    assert c.kind is IsometryKind.LOXODROMIC
    assert c.spectral_radius.lo <= c.spectral_radius.hi
    assert c.spectral_radius.value == pytest.approx(CAT_RADIUS, rel=1e-12)
    assert translation_length(c).value == pytest.approx(np.log(CAT_RADIUS), rel=1e-12)
    assert len(c.fixed_boundary) == 2


def test_axis_is_translated(form):
    g = element(CAT_MAP, form)
    c = classify(g)
    length = c.spectral_radius.log
    start = np.array(axis_points(c, 0.0).coords)
    image = frame_for(form).matrix(g) @ start
    assert image == pytest.approx(np.array(axis_points(c, length).coords), abs=1e-6)


def test_min_displacement_equals_translation_length(form):
    g = element(CAT_MAP, form)
    assert min_displacement(g) == pytest.approx(np.log(CAT_RADIUS), rel=1e-6)


def test_axis_needs_loxodromic(form):
    with pytest.raises(NotLoxodromic):
        axis_points(classify(element(T, form)), 0.0)


def test_power_charpoly_matches_power(form):
    g = element(CAT_MAP, form)
    coeffs = [int(c) for c in char_poly(g).all_coeffs()]
    for n in (2, 3):
        assert power_charpoly(coeffs, n).all_coeffs() == char_poly(g ** n).all_coeffs()


def test_finite_order_in_dimension_three():
    form = QuadraticForm.diagonal([1, -1, -1, -1])
    quarter = FormIsometry.checked(((1, 0, 0, 0), (0, 0, -1, 0), (0, 1, 0, 0), (0, 0, 0, 1)), form)
    c = classify(quarter)
    assert c.kind is IsometryKind.ELLIPTIC
    assert c.order == 4


def sl2_matrices(bound=2):
    for p, q, r, s in itertools.product(range(-bound, bound + 1), repeat=4):
        if p * s - q * r == 1 and (p, q, r, s) not in ((1, 0, 0, 1), (-1, 0, 0, -1)):
            yield (p, q), (r, s)


def test_trace_decides_the_class(form):
    seen = set()
    for matrix in sl2_matrices():
        trace = abs(matrix[0][0] + matrix[1][1])
        c = classify(element(matrix, form))
        if trace < 2:
            assert c.kind is IsometryKind.ELLIPTIC, matrix
            assert order_of_elliptic(c) == {0: 2, 1: 3}[trace]
        elif trace == 2:
            assert c.kind is IsometryKind.PARABOLIC, matrix
        else:
            assert c.kind is IsometryKind.LOXODROMIC, matrix
            eigenvalue = (trace + np.sqrt(trace * trace - 4.0)) / 2.0
            assert c.spectral_radius.value == pytest.approx(eigenvalue ** 2, rel=1e-9)
        seen.add(c.kind)
    assert seen == set(IsometryKind)


@pytest.mark.parametrize("matrix", [S, T, CAT_MAP, ((0, -1), (1, 1))])
def test_class_is_conjugation_invariant(form, matrix):
    g = element(matrix, form)
    c = classify(g)
    for h in (S, T, ((2, 1), (1, 1)), ((1, -3), (0, 1))):
        d = classify(conjugate(element(h, form, "h"), g))
        assert d.kind is c.kind
        assert d.charpoly == c.charpoly
        assert d.order == c.order
        assert translation_length(d).value == pytest.approx(translation_length(c).value, rel=1e-12)


def test_translation_length_scales_with_powers(form):
    g = element(CAT_MAP, form)
    base = translation_length(classify(g)).value
    for n in range(1, 7):
        assert translation_length(classify(g ** n)).value == pytest.approx(n * base, rel=1e-9)
    assert min_displacement(g ** 2) == pytest.approx(2 * base, rel=1e-6)
    t = element(T, form)
    assert translation_length(classify(t ** 4)).value == 0.0
