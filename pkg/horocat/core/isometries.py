"""
Classification of hyperbolic isometries
Elliptic / parabolic / loxodromic is decided exactly from the integer
characteristic polynomial: Sturm sequences count roots off the unit circle,
the squarefree part detects non-semisimple (parabolic) elements, and
cyclotomic factors give the order of elliptic elements.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from functools import lru_cache, reduce
from math import gcd, log
from typing import Optional, Tuple

import numpy as np
import sympy as sp
from scipy.optimize import minimize

from .errors import InvalidPoint, NotAnIsometry, NotLoxodromic
from .forms import FormIsometry, QuadraticForm, exact_array, inner_product, is_isometry, primitive
from .models import (BoundaryPoint, HyperbolicFrame, Model, ModelPoint, hyperboloid_distance,
                     minkowski, to_hyperboloid)

LOGGER = logging.getLogger(__name__)

X = sp.Symbol("x")

# Gram matrix of 4AC - B^2 on binary quadratic forms A x^2 + B xy + C y^2
DISCRIMINANT_GRAM = ((0, 0, 2), (0, -1, 0), (2, 0, 0))


class IsometryKind(Enum):
    ELLIPTIC = "elliptic"
    PARABOLIC = "parabolic"
    LOXODROMIC = "loxodromic"


@dataclass(frozen=True)
class SpectralRadius:
    """Isolating interval [lo, hi] of the dominant real eigenvalue"""
    lo: Fraction
    hi: Fraction
    factor: Tuple[int, ...]

    @property
    def value(self):
        return float((self.lo + self.hi) / 2)

    @property
    def log(self):
        return log(self.value)

    def to_json(self):
        return {"interval": [str(self.lo), str(self.hi)], "value": self.value,
                "minimal_polynomial": list(self.factor)}


@dataclass(frozen=True)
class TranslationLength:
    value: float
    attained: bool


@dataclass(frozen=True)
class ClassifiedIsometry:
    base: FormIsometry
    kind: IsometryKind
    charpoly: Tuple[int, ...]
    spectral_radius: Optional[SpectralRadius] = None
    order: Optional[int] = None
    fixed_boundary: Tuple[BoundaryPoint, ...] = ()
    fixed_interior: Optional[Tuple[Fraction, ...]] = None

    @property
    def axis(self):
        """(attractive, repulsive) boundary points of a loxodromic element"""
        if self.kind is not IsometryKind.LOXODROMIC:
            return None
        return self.fixed_boundary[0], self.fixed_boundary[1]

    def to_json(self):
        data = {"class": self.kind.value, "charpoly": list(self.charpoly),
                "fixed_boundary": [p.to_json() for p in self.fixed_boundary]}
        if self.spectral_radius is not None:
            data["spectral_radius"] = self.spectral_radius.to_json()
            data["translation_length"] = self.spectral_radius.log
        if self.order is not None:
            data["order"] = self.order
        if self.base.word is not None:
            data["word"] = self.base.word
        return data


@lru_cache(maxsize=None)
def frame_for(form: QuadraticForm) -> HyperbolicFrame:
    return HyperbolicFrame(form)


def char_poly(g: FormIsometry) -> sp.Poly:
    return sp.Poly(sp.Matrix(g.matrix).charpoly(X).as_expr(), X, domain="ZZ")


def sturm_count(poly: sp.Poly, a, b, sequence=None) -> int:
    """Number of distinct real roots in (a, b] by Sturm's theorem; poly squarefree"""
    if sequence is None:
        sequence = sp.sturm(poly)

    def changes(point):
        values = [s.eval(sp.Rational(point.numerator, point.denominator)) for s in sequence]
        signs = [sp.sign(v) for v in values if v != 0]
        return sum(1 for u, v in zip(signs, signs[1:]) if u != v)

    return changes(Fraction(a)) - changes(Fraction(b))


def cauchy_bound(poly: sp.Poly) -> Fraction:
    coeffs = [Fraction(int(c)) for c in poly.all_coeffs()]
    lead = abs(coeffs[0])
    return 1 + max((abs(c) / lead for c in coeffs[1:]), default=Fraction(0))


def isolate_real_roots(poly: sp.Poly, lo, hi, width=Fraction(1, 10 ** 15)):
    """Disjoint intervals (a, b] of width <= width, one per distinct root of poly in (lo, hi]"""
    poly = sp.Poly(sp.sqf_part(poly.as_expr()), X)
    sequence = sp.sturm(poly)
    pending = [(Fraction(lo), Fraction(hi))]
    found = []
    while pending:
        a, b = pending.pop()
        count = sturm_count(poly, a, b, sequence)
        if count == 0:
            continue
        if count == 1 and b - a <= width:
            found.append((a, b))
            continue
        mid = (a + b) / 2
        pending.append((mid, b))
        pending.append((a, mid))
    return sorted(found)


def dominant_real_root(poly: sp.Poly) -> Optional[SpectralRadius]:
    """Largest |root| among real roots of modulus > 1, or None"""
    bound = cauchy_bound(poly)
    candidates = isolate_real_roots(poly, Fraction(1), bound)
    candidates += [(-b, -a) for a, b in isolate_real_roots(sp.Poly(poly.as_expr().subs(X, -X), X),
                                                         Fraction(1), bound)]
    if not candidates:
        return None
    lo, hi = max(candidates, key=lambda ab: abs(ab[0] + ab[1]))
    factor = None
    for f, _ in sp.factor_list(poly.as_expr(), X)[1]:
        fpoly = sp.Poly(f, X)
        if sturm_count(fpoly, lo, hi):
            factor = tuple(int(c) for c in fpoly.all_coeffs())
            break
    if lo < 0:
        lo, hi = -hi, -lo
    return SpectralRadius(lo, hi, factor)


def cyclotomic_index(factor: sp.Poly) -> Optional[int]:
    """m with factor = Phi_m, or None"""
    degree = factor.degree()
    coeffs = [int(c) for c in factor.all_coeffs()]
    if coeffs[0] < 0:
        coeffs = [-c for c in coeffs]
    for m in range(1, 2 * degree * degree + 3):
        if sp.totient(m) != degree:
            continue
        if [int(c) for c in sp.Poly(sp.cyclotomic_poly(m, X), X).all_coeffs()] == coeffs:
            return m
    return None


def semisimple_order(poly: sp.Poly) -> Optional[int]:
    """lcm of cyclotomic indices of the factors, None if some factor is not cyclotomic"""
    orders = []
    for f, _ in sp.factor_list(poly.as_expr(), X)[1]:
        m = cyclotomic_index(sp.Poly(f, X))
        if m is None:
            return None
        orders.append(m)
    return reduce(lambda a, b: a * b // gcd(a, b), orders, 1)


def evaluate_poly(poly: sp.Poly, g: FormIsometry):
    """poly(g) as an exact matrix (Horner)"""
    dim = len(g.matrix)
    identity = exact_array([[int(i == j) for j in range(dim)] for i in range(dim)])
    result = exact_array([[0] * dim for _ in range(dim)])
    arr = g.array
    for c in poly.all_coeffs():
        result = result.dot(arr) + int(c) * identity
    return result


def classify(g: FormIsometry) -> ClassifiedIsometry:
    """Exact elliptic / parabolic / loxodromic trichotomy"""
    if not is_isometry(g.matrix, g.form):
        raise NotAnIsometry(f"{g.matrix} does not preserve the form")
    result = _classify(g.matrix, g.form)
    if result.base.word != g.word:
        result = replace(result, base=g)
    return result


@lru_cache(maxsize=65536)
def _classify(matrix, form) -> ClassifiedIsometry:
    g = FormIsometry(matrix, form)
    poly = char_poly(g)
    coeffs = tuple(int(c) for c in poly.all_coeffs())
    radius = dominant_real_root(poly)
    frame = frame_for(form) if form.is_hyperbolic else None

    if radius is not None:
        fixed = _loxodromic_fixed_points(g, radius, frame) if frame is not None else ()
        return ClassifiedIsometry(g, IsometryKind.LOXODROMIC, coeffs, radius, None, fixed)

    order = semisimple_order(poly)
    squarefree = sp.Poly(sp.sqf_part(poly.as_expr()), X)
    semisimple = all(e == 0 for e in evaluate_poly(squarefree, g).flat)
    if semisimple:
        interior = _elliptic_fixed_point(g, order)
        return ClassifiedIsometry(g, IsometryKind.ELLIPTIC, coeffs, None, order, (), interior)

    fixed = ()
    if frame is not None:
        fixed = (_parabolic_fixed_point(g, order, frame),)
    return ClassifiedIsometry(g, IsometryKind.PARABOLIC, coeffs, None, order, fixed)


def _loxodromic_fixed_points(g, radius, frame):
    m = frame.matrix(g)
    lam = radius.value
    points = []
    for eigenvalue in (lam, 1.0 / lam):
        _, _, vt = np.linalg.svd(m - eigenvalue * np.identity(len(m)))
        points.append(BoundaryPoint.from_null(vt[-1]))
    return tuple(points)


def _elliptic_fixed_point(g, order):
    if not order or g.form.witness is None:
        return None
    total = [Fraction(0)] * g.form.dim
    image = g.form.witness
    for _ in range(order):
        total = [t + c for t, c in zip(total, image)]
        image = g.apply(image)
    return tuple(total)


def _parabolic_fixed_point(g, order, frame):
    unipotent = g ** (order or 1)
    dim = len(g.matrix)
    nilpotent = unipotent.array - exact_array([[int(i == j) for j in range(dim)] for i in range(dim)])
    square = nilpotent.dot(nilpotent)
    column = next(square[:, j] for j in range(dim) if any(e != 0 for e in square[:, j]))
    p = primitive(column)
    if inner_product(p, g.form.witness, g.form) < 0:
        p = tuple(-c for c in p)
    return frame.boundary(p)


def displacement(g: FormIsometry, x: ModelPoint) -> float:
    """d_g(x) = dist(g x, x)"""
    frame = frame_for(g.form)
    y = to_hyperboloid(x.validate())
    if len(y) != g.form.dim:
        raise InvalidPoint("point dimension does not match isometry")
    return hyperboloid_distance(frame.matrix(g) @ y, y)


def translation_length(c: ClassifiedIsometry) -> TranslationLength:
    if c.kind is IsometryKind.LOXODROMIC:
        return TranslationLength(c.spectral_radius.log, True)
    return TranslationLength(0.0, c.kind is IsometryKind.ELLIPTIC)


def axis_points(c: ClassifiedIsometry, t: float) -> ModelPoint:
    """Arc-length parametrization of the axis; g maps axis(t) to axis(t + |g|)"""
    if c.kind is not IsometryKind.LOXODROMIC:
        raise NotLoxodromic(f"{c.kind.value} elements have no axis")
    a = c.fixed_boundary[0].null
    b = c.fixed_boundary[1].null
    k = 1.0 / np.sqrt(2.0 * minkowski(a, b))
    x = k * (np.exp(t) * a + np.exp(-t) * b)
    return ModelPoint(Model.HYPERBOLOID, tuple(x))


def min_displacement(g: FormIsometry, start: Optional[ModelPoint] = None) -> float:
    """Numerical infimum of d_g over H^n (Nelder-Mead in the Klein chart)"""
    frame = frame_for(g.form)
    m = frame.matrix(g)
    n = g.form.n

    def objective(k):
        r2 = float(np.dot(k, k))
        if r2 >= 1.0:
            return 1e6 * r2
        x = np.concatenate([[1.0], k]) / np.sqrt(1.0 - r2)
        return hyperboloid_distance(m @ x, x)

    x0 = np.zeros(n) if start is None else to_hyperboloid(start)[1:] / to_hyperboloid(start)[0]
    result = minimize(objective, x0, method="Nelder-Mead",
                      options={"xatol": 1e-12, "fatol": 1e-13, "maxiter": 20000})
    return float(result.fun)


def sym_square(a) -> Tuple[Tuple[int, ...], ...]:
    """Action of a 2x2 integer matrix of determinant +-1 on binary quadratic forms

    f -> f o a^-1 on coefficient vectors (A, B, C); preserves 4AC - B^2 and
    corresponds to the Moebius action of a on the upper half-plane.
    """
    (p, q), (r, s) = a
    if abs(p * s - q * r) != 1:
        raise NotAnIsometry("symmetric square needs determinant +-1")
    return ((s * s, -r * s, r * r),
            (-2 * q * s, p * s + q * r, -2 * p * r),
            (q * q, -p * q, p * p))


def power_charpoly(coeffs, n) -> sp.Poly:
    """Polynomial whose roots are the n-th powers of the roots of coeffs (resultant)"""
    y = sp.Symbol("y")
    poly = sp.Poly(list(coeffs), X).as_expr()
    res = sp.resultant(poly, y - X ** n, X)
    result = sp.Poly(res, y)
    if result.LC() < 0:
        result = -result
    return sp.Poly(result.as_expr().subs(y, X), X)


def conjugate(h: FormIsometry, g: FormIsometry) -> FormIsometry:
    return h @ g @ h.inverse()


def order_of_elliptic(c: ClassifiedIsometry) -> Optional[int]:
    """Order of a finite-order element, None for infinite order"""
    if c.kind is not IsometryKind.ELLIPTIC:
        return None
    return c.order


def spectral_radius_estimate(g: FormIsometry) -> float:
    """Floating point spectral radius, for screening before exact classification"""
    return float(np.max(np.abs(np.linalg.eigvals(g.float_array))))


def maybe_not_loxodromic(g: FormIsometry, margin=0.01) -> bool:
    """False only when g is certainly loxodromic (spectral radius clearly above 1)"""
    return spectral_radius_estimate(g) <= 1.0 + margin
