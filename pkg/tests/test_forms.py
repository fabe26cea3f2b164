from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from horocat.core.errors import DegenerateForm, DimensionMismatch, NonSymmetric, NotAnIsometry
from horocat.core.forms import (FormIsometry, QuadraticForm, RationalCone, congruent_gram, cone_contains,
                                group_to_json, inner_product, invert_word, load_group_json, primitive, signature,
                                unimodular_random)
from horocat.core.isometries import DISCRIMINANT_GRAM, sym_square


def test_signature_counts_exactly():
    assert signature([[1, 0], [0, -1]]) == (1, 0, 1)
    assert signature([[0, 0, 2], [0, -1, 0], [2, 0, 0]]) == (1, 0, 2)
    assert signature([[1, 1], [1, 1]]) == (1, 1, 0)


def test_signature_rejects_bad_gram():
    with pytest.raises(NonSymmetric):
        signature([[1, 2], [0, 1]])
    with pytest.raises(DimensionMismatch):
        signature([[1, 0]])


def test_opposite_sign_convention_is_negated():
    form = QuadraticForm.from_gram([[-1, 0, 0], [0, 1, 0], [0, 0, 1]])
    assert form.negated
    assert form.inertia == (1, 0, 2)
    assert form.is_hyperbolic
    assert form.q(form.witness) > 0


def test_witness_must_be_timelike():
    with pytest.raises(DegenerateForm):
        QuadraticForm.from_gram([[1, 0], [0, -1]], witness=(0, 1))


def test_degenerate_form_is_not_hyperbolic():
    form = QuadraticForm.from_gram([[1, -1], [-1, 1]])
    assert not form.is_hyperbolic
    with pytest.raises(DegenerateForm):
        form.require_hyperbolic()


def test_inner_product_is_exact():
    form = QuadraticForm.from_gram(DISCRIMINANT_GRAM, witness=(1, 0, 1))
    assert inner_product((1, 0, 4), (1, 0, 4), form) == 16
    assert inner_product(("1/2", 0, 0), (0, 0, 3), form) == 3
    assert form.q((Fraction(1, 3), 0, 3)) == 4


def test_checked_rejects_non_isometries():
    form = QuadraticForm.diagonal([1, -1, -1])
    with pytest.raises(NotAnIsometry):
        FormIsometry.checked(((2, 0, 0), (0, 1, 0), (0, 0, 1)), form)
    # -I preserves the form but swaps the two sheets
    with pytest.raises(NotAnIsometry):
        FormIsometry.checked(((-1, 0, 0), (0, -1, 0), (0, 0, -1)), form)


def test_checked_rejects_non_integral_matrices():
    # Preserves x^2 - y^2 - z^2 and the sheet, but is not a lattice map
    form = QuadraticForm.diagonal([1, -1, -1])
    rotation = ((1, 0, 0), (0, "3/5", "-4/5"), (0, "4/5", "3/5"))
    with pytest.raises(NotAnIsometry, match="non-integral"):
        FormIsometry.checked(rotation, form)
    assert FormIsometry.checked(((1, 0, 0), (0, 0, -1), (0, 1, 0)), form).matrix[1] == (0, 0, -1)


def test_inverse_and_powers():
    form = QuadraticForm.from_gram(DISCRIMINANT_GRAM, witness=(1, 0, 1))
    t = FormIsometry.checked(sym_square(((1, 1), (0, 1))), form, "b")
    assert (t @ t.inverse()).is_identity
    assert (t ** -3).matrix == (t.inverse() ** 3).matrix
    assert (t ** 2).word == "bb"
    assert t.inverse().word == "B"


def test_invert_word():
    assert invert_word("aB") == "bA"
    assert invert_word("") == ""


def test_primitive():
    assert primitive((2, 4, -6)) == (1, 2, -3)
    assert primitive(("1/2", "1/3")) == (3, 2)
    with pytest.raises(ValueError):
        primitive((0, 0))


def test_cone_membership():
    form = QuadraticForm.diagonal([1, -1, -1])
    positive = RationalCone.positive()
    assert cone_contains(positive, (2, 1, 1), form)
    assert not cone_contains(positive, (-2, 1, 1), form)
    assert not cone_contains(positive, (1, 1, 1), form)
    half = RationalCone.from_functionals([(0, 1, 0)])
    assert cone_contains(half, (2, 1, 0), form)
    assert not cone_contains(half, (2, -1, 0), form)


def test_group_json_keeps_witness():
    form = QuadraticForm.from_gram(DISCRIMINANT_GRAM, witness=(1, 0, 1))
    s = FormIsometry.checked(sym_square(((0, -1), (1, 0))), form)
    data = group_to_json(form, [s], RationalCone.positive())
    assert data["witness"] == [1, 0, 1]
    form2, generators, cone = load_group_json(data)
    assert form2.witness == form.witness
    assert generators[0].matrix == s.matrix
    assert cone.full_positive


def test_form_json_accepts_fraction_strings():
    form = QuadraticForm.from_json([["1/2", 0], [0, -3]])
    assert form.gram[0][0] == Fraction(1, 2)
    assert form.is_hyperbolic
    assert form.q(form.rational_witness()) > 0
    assert QuadraticForm.from_json(form.to_json()).gram == form.gram


def test_unimodular_congruence_keeps_signature():
    rng = np.random.default_rng(5)
    form = QuadraticForm.from_gram(DISCRIMINANT_GRAM, witness=(1, 0, 1))
    for _ in range(5):
        p = unimodular_random(3, rng)
        assert abs(int(sp.Matrix(p.tolist()).det())) == 1
        assert signature(congruent_gram(form, p)) == form.inertia
