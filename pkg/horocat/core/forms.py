"""
Exact integral quadratic forms of signature (1, n)
Holds the lattice data of a hyperbolic setup: the Gram matrix, the integer
matrices preserving it, and rational polyhedral cones. Everything in this
module is exact; floating point only enters in the model layer.
"""
import logging
import numbers
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Optional, Sequence, Tuple

import numpy as np
import sympy as sp

from .errors import DegenerateForm, DimensionMismatch, NonSymmetric, NotAnIsometry

LOGGER = logging.getLogger(__name__)


def to_fraction(value):
    """Read an integer, a Fraction or an exact string "p/q" as a Fraction"""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError(f"not a number: {value!r}")
    if isinstance(value, numbers.Integral):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, sp.Rational):
        return Fraction(int(value.p), int(value.q))
    raise ValueError(f"inexact value {value!r}; use integers or 'p/q' strings")


def exact_vector(values):
    return tuple(to_fraction(v) for v in values)


def exact_array(rows):
    """Object-dtype numpy array of Python ints / Fractions (exact products)"""
    arr = np.empty((len(rows), len(rows[0])), dtype=object)
    for i, row in enumerate(rows):
        for j, entry in enumerate(row):
            value = to_fraction(entry)
            arr[i, j] = int(value) if value.denominator == 1 else value
    return arr


def freeze(arr):
    """Hashable tuple-of-tuples view of an exact matrix"""
    return tuple(tuple(row) for row in np.asarray(arr, dtype=object).tolist())


def primitive(vector):
    """Scale a rational vector to the primitive integer vector on its ray"""
    fracs = exact_vector(vector)
    lcm = reduce(lambda a, b: a * b // gcd(a, b), (f.denominator for f in fracs), 1)
    ints = [int(f * lcm) for f in fracs]
    g = reduce(gcd, (abs(i) for i in ints), 0)
    if g == 0:
        raise ValueError("zero vector has no primitive representative")
    return tuple(i // g for i in ints)


def signature(gram) -> Tuple[int, int, int]:
    """Exact inertia (pos, zero, neg) of a symmetric rational matrix

    The characteristic polynomial of a symmetric matrix is real-rooted, so
    Descartes' rule of signs counts its positive and negative roots exactly.
    """
    rows = [[sp.Rational(str(to_fraction(e))) for e in row] for row in gram]
    dim = len(rows)
    if any(len(row) != dim for row in rows):
        raise DimensionMismatch("Gram matrix must be square")
    matrix = sp.Matrix(rows)
    if matrix != matrix.T:
        raise NonSymmetric("Gram matrix is not symmetric")

    x = sp.Symbol("x")
    poly = sp.Poly(matrix.charpoly(x).as_expr(), x)
    coeffs = poly.all_coeffs()

    # Multiplicity of the root 0
    zero = 0
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
        zero += 1

    def sign_changes(seq):
        signs = [sp.sign(c) for c in seq if c != 0]
        return sum(1 for a, b in zip(signs, signs[1:]) if a != b)

    degree = len(coeffs) - 1
    pos = sign_changes(coeffs)
    neg = sign_changes([c * (-1) ** (degree - k) for k, c in enumerate(coeffs)])
    return pos, zero, neg


@dataclass(frozen=True)
class QuadraticForm:
    """Integral symmetric bilinear form, normalized to one positive direction

    `negated` records that the form was supplied in the opposite sign
    convention and flipped on ingestion. `witness` is a rational vector with
    q(witness) > 0 selecting the sheet H+ of the hyperboloid.
    """
    gram: Tuple[Tuple[Fraction, ...], ...]
    inertia: Tuple[int, int, int]
    negated: bool = False
    witness: Optional[Tuple[Fraction, ...]] = None

    @classmethod
    def from_gram(cls, rows, normalize=True, witness=None):
        """Build a form from a Gram matrix, negating a (n, 0, 1) form when asked"""
        gram = tuple(exact_vector(row) for row in rows)
        pos, zero, neg = signature(gram)
        negated = False
        if normalize and neg == 1 and zero == 0 and pos > 1:
            gram = tuple(tuple(-e for e in row) for row in gram)
            pos, neg = neg, pos
            negated = True
            LOGGER.debug("negated form to signature (1, 0, %d)", neg)
        form = cls(gram=gram, inertia=(pos, zero, neg), negated=negated)
        if form.is_hyperbolic:
            chosen = exact_vector(witness) if witness is not None else form.rational_witness()
            if form.q(chosen) <= 0:
                raise DegenerateForm("witness vector must satisfy q(witness) > 0")
            object.__setattr__(form, "witness", chosen)
        return form

    @classmethod
    def diagonal(cls, entries):
        n = len(entries)
        return cls.from_gram([[entries[i] if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def from_json(cls, rows, witness=None):
        """Gram rows of ints or "p/q" strings, as written by to_json"""
        return cls.from_gram(rows, witness=witness)

    @property
    def dim(self):
        return len(self.gram)

    @property
    def n(self):
        """Dimension of the hyperbolic space"""
        return self.dim - 1

    @property
    def is_hyperbolic(self):
        return self.inertia == (1, 0, self.dim - 1) and self.dim >= 2

    def require_hyperbolic(self):
        if not self.is_hyperbolic:
            raise DegenerateForm(f"form has signature {self.inertia}, expected (1, 0, {self.dim - 1})")
        return self

    @property
    def array(self):
        return exact_array(self.gram)

    @property
    def float_gram(self):
        return np.array([[float(e) for e in row] for row in self.gram], dtype=float)

    def q(self, v):
        return inner_product(v, v, self)

    def rational_witness(self):
        """Small rational vector with q > 0"""
        # Small integer vectors first; the Gram diagonal usually has a positive entry
        dim = self.dim
        for i in range(dim):
            e = tuple(Fraction(int(i == j)) for j in range(dim))
            if self.q(e) > 0:
                return e
        eigvals, eigvecs = np.linalg.eigh(self.float_gram)
        direction = eigvecs[:, int(np.argmax(eigvals))]
        for scale in (4, 16, 64, 256, 1024):
            candidate = exact_vector(int(round(c * scale)) for c in direction)
            if next((c for c in candidate if c), 0) < 0:
                candidate = tuple(-c for c in candidate)
            if any(candidate) and self.q(candidate) > 0:
                return candidate
        raise DegenerateForm("could not find a rational vector with q > 0")

    def to_json(self):
        return [[_fraction_json(e) for e in row] for row in self.gram]


def _fraction_json(value):
    value = to_fraction(value)
    return int(value) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"


def inner_product(u, v, form: QuadraticForm):
    """Exact bilinear pairing u^T gram v"""
    u = exact_vector(u)
    v = exact_vector(v)
    if len(u) != form.dim or len(v) != form.dim:
        raise DimensionMismatch(f"vectors of length {len(u)}, {len(v)} against form of dimension {form.dim}")
    total = Fraction(0)
    for i, ui in enumerate(u):
        if ui:
            row = form.gram[i]
            total += ui * sum((row[j] * vj for j, vj in enumerate(v) if vj), Fraction(0))
    return total


@dataclass(frozen=True)
class FormIsometry:
    """Integer matrix preserving a QuadraticForm and the sheet H+"""
    matrix: Tuple[Tuple[int, ...], ...]
    form: QuadraticForm = field(compare=False, repr=False)
    word: Optional[str] = field(default=None, compare=False)

    @classmethod
    def checked(cls, matrix, form, word=None):
        frozen = freeze(exact_array(matrix))
        if any(isinstance(e, Fraction) for row in frozen for e in row):
            raise NotAnIsometry(f"matrix {frozen} has non-integral entries")
        if not is_isometry(frozen, form):
            raise NotAnIsometry(f"matrix {frozen} does not preserve the form and H+")
        return cls(frozen, form, word)

    @classmethod
    def identity(cls, form):
        dim = form.dim
        return cls(tuple(tuple(int(i == j) for j in range(dim)) for i in range(dim)), form, "")

    @property
    def array(self):
        return exact_array(self.matrix)

    @property
    def float_array(self):
        return np.array([[float(e) for e in row] for row in self.matrix], dtype=float)

    @property
    def key(self):
        return self.matrix

    @property
    def is_identity(self):
        return all(e == int(i == j) for i, row in enumerate(self.matrix) for j, e in enumerate(row))

    def __matmul__(self, other):
        word = None
        if self.word is not None and other.word is not None:
            word = self.word + other.word
        return FormIsometry(freeze(self.array.dot(other.array)), self.form, word)

    def __pow__(self, power):
        if power < 0:
            return self.inverse() ** (-power)
        result = FormIsometry.identity(self.form)
        base = self
        while power:
            if power & 1:
                result = result @ base
            base = base @ base
            power >>= 1
        return result

    def inverse(self):
        """g^-1 = G^-1 g^T G, exact"""
        gram = sp.Matrix([[sp.Rational(str(e)) for e in row] for row in self.form.gram])
        g = sp.Matrix(self.matrix)
        inv = gram.inv() * g.T * gram
        entries = [[to_fraction(e) for e in inv.row(i)] for i in range(inv.rows)]
        if any(e.denominator != 1 for row in entries for e in row):
            raise NotAnIsometry("inverse is not integral")
        return FormIsometry(tuple(tuple(int(e) for e in row) for row in entries), self.form,
                            invert_word(self.word) if self.word is not None else None)

    def apply(self, v):
        """Exact image of a rational vector"""
        v = exact_vector(v)
        if len(v) != self.form.dim:
            raise DimensionMismatch("vector dimension does not match isometry")
        return tuple(sum((Fraction(row[j]) * v[j] for j in range(len(v))), Fraction(0)) for row in self.matrix)


def invert_word(word):
    """Formal inverse of a generator word: reverse and swap case"""
    return "".join(ch.swapcase() for ch in reversed(word))


def is_isometry(g, form: QuadraticForm) -> bool:
    """True iff g^T gram g = gram exactly and g maps the witness into H+"""
    rows = [list(r) for r in g]
    if len(rows) != form.dim or any(len(r) != form.dim for r in rows):
        raise DimensionMismatch(f"matrix is not {form.dim}x{form.dim}")
    arr = exact_array(rows)
    gram = form.array
    if freeze(arr.T.dot(gram).dot(arr)) != freeze(gram):
        return False
    if form.witness is None:
        return True
    image = tuple(sum((Fraction(arr[i, j]) * form.witness[j] for j in range(form.dim)), Fraction(0))
                  for i in range(form.dim))
    # Timelike vectors lie in the same sheet iff they pair positively
    return inner_product(image, form.witness, form) > 0


@dataclass(frozen=True)
class RationalCone:
    """Cone {x : l_k(x) >= 0 for all k}, or the full positive cone"""
    halfspaces: Tuple[Tuple[Fraction, ...], ...] = ()
    full_positive: bool = False

    @classmethod
    def from_functionals(cls, functionals):
        cleared = []
        for ell in functionals:
            cleared.append(tuple(Fraction(c) for c in primitive(ell)))
        return cls(tuple(cleared), False)

    @classmethod
    def positive(cls):
        return cls((), True)

    def to_json(self):
        if self.full_positive:
            return "full_positive"
        return {"halfspaces": [[_fraction_json(c) for c in ell] for ell in self.halfspaces]}


def cone_contains(cone: RationalCone, x, form: QuadraticForm) -> bool:
    """Exact membership; for the full positive cone x must lie in the H+ component"""
    x = exact_vector(x)
    if len(x) != form.dim:
        raise DimensionMismatch("vector dimension does not match form")
    if cone.full_positive:
        if form.q(x) <= 0:
            return False
        witness = form.witness if form.witness is not None else tuple(Fraction(int(i == 0)) for i in range(form.dim))
        return inner_product(x, witness, form) > 0
    for ell in cone.halfspaces:
        if len(ell) != form.dim:
            raise DimensionMismatch("cone functional dimension does not match form")
        if sum((a * b for a, b in zip(ell, x)), Fraction(0)) < 0:
            return False
    return True


def load_group_json(data):
    """Parse {"gram", "generators", "cone"} into (form, generators, cone)"""
    form = QuadraticForm.from_gram(data["gram"], witness=data.get("witness"))
    generators = [FormIsometry.checked(m, form) for m in data.get("generators", [])]
    cone_data = data.get("cone", "full_positive")
    if cone_data == "full_positive":
        cone = RationalCone.positive()
    else:
        cone = RationalCone.from_functionals(cone_data["halfspaces"])
    return form, generators, cone


def group_to_json(form: QuadraticForm, generators: Sequence[FormIsometry], cone: RationalCone):
    data = {
        "gram": form.to_json(),
        "generators": [[list(row) for row in g.matrix] for g in generators],
        "cone": cone.to_json(),
    }
    if form.witness is not None:
        data["witness"] = [_fraction_json(c) for c in form.witness]
    return data


def unimodular_random(dim, rng, steps=8):
    """Random integer matrix of determinant +-1 built from elementary moves"""
    matrix = exact_array([[int(i == j) for j in range(dim)] for i in range(dim)])
    for _ in range(steps):
        i, j = rng.choice(dim, size=2, replace=False)
        factor = int(rng.integers(-2, 3))
        matrix[i, :] = matrix[i, :] + factor * matrix[j, :]
    return matrix


def congruent_gram(form: QuadraticForm, p):
    """Gram matrix of P^T Q P"""
    p = np.asarray(p, dtype=object)
    return freeze(p.T.dot(form.array).dot(p))
