"""
Finitely generated groups of lattice isometries
Breadth-first word balls, the word metric, Dirichlet domains with exactly
certified facets, limit-set samples and boundary stabilizers.
"""
import logging
import string
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import sympy as sp
from scipy.optimize import linprog, minimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import BudgetExceeded, InvalidGenerator, InvalidPoint, NotFixed, NotInBall, StabilizerNontrivial
from .forms import (FormIsometry, QuadraticForm, RationalCone, exact_vector, group_to_json, inner_product,
                    load_group_json, primitive, to_fraction)
from .isometries import IsometryKind, classify, frame_for
from .models import (BoundaryPoint, HalfSpaceChart, ModelPoint, boost_from_origin, hyperboloid_distance,
                     min_pairing, minkowski, rationalize, to_hyperboloid, unit_directions)

LOGGER = logging.getLogger(__name__)

DEFAULT_ELEMENT_CAP = 20000
ANGULAR_TOL = 1e-6
RANK_TOL = 1e-9
# Float screen: bisectors with a slice thinner than this go to the exact redundancy proof
FACET_TOL = 1e-9

LETTERS = string.ascii_lowercase


def generator_letter(index, inverse=False):
    letter = LETTERS[index]
    return letter.upper() if inverse else letter


def parse_word(word, rank):
    """[(generator index, inverse?)] for a word like "aB a"; capitals are inverses"""
    letters = []
    for ch in word:
        if ch.isspace():
            continue
        index = LETTERS.find(ch.lower())
        if not ch.isalpha() or index < 0 or index >= rank:
            raise InvalidGenerator(f"unknown generator {ch!r} in word {word!r} (rank {rank})")
        letters.append((index, ch.isupper()))
    return letters


class GeneratedGroup:
    """Group generated by a symmetric set of FormIsometries

    Generator i is named by the i-th lowercase letter, its inverse by the
    capital. Word balls are enumerated lazily and kept, so growing the
    radius only expands the frontier.
    """

    def __init__(self, form: QuadraticForm, generators: Sequence[FormIsometry], cone: Optional[RationalCone] = None,
                 element_cap=DEFAULT_ELEMENT_CAP, name=None, presentation=None):
        if len(generators) > len(LETTERS):
            raise InvalidGenerator(f"at most {len(LETTERS)} generators are supported")
        self.form = form
        self.cone = cone if cone is not None else RationalCone.positive()
        self.element_cap = element_cap
        self.name = name
        # "free" or "coxeter" when the generators are known to be a free or universal Coxeter basis
        self.presentation = presentation
        self.generators = tuple(FormIsometry(g.matrix, form, generator_letter(i)) for i, g in enumerate(generators))
        symmetric = []
        for i, g in enumerate(self.generators):
            symmetric.append(g)
            inverse = g.inverse()
            symmetric.append(FormIsometry(inverse.matrix, form, generator_letter(i, inverse=True)))
        self.symmetric = tuple(symmetric)

        identity = FormIsometry.identity(form)
        self._index: Dict[tuple, FormIsometry] = {identity.key: identity}
        self._layers: List[List[FormIsometry]] = [[identity]]

    @classmethod
    def from_json(cls, data, **kwargs):
        form, generators, cone = load_group_json(data)
        return cls(form, generators, cone, **kwargs)

    def to_json(self):
        return group_to_json(self.form, self.generators, self.cone)

    @property
    def rank(self):
        return len(self.generators)

    @property
    def frame(self):
        return frame_for(self.form)

    @property
    def dedup_index(self):
        """Exact matrix -> canonical (shortest, first found) word"""
        return {key: g.word for key, g in self._index.items()}

    def element(self, word) -> FormIsometry:
        """Evaluate a generator word"""
        result = FormIsometry.identity(self.form)
        for index, inverse in parse_word(word, self.rank):
            result = result @ self.symmetric[2 * index + int(inverse)]
        return result

    def layer(self, k):
        self.word_ball(k)
        return list(self._layers[k])

    def word_ball(self, radius) -> List[FormIsometry]:
        """All distinct elements of word length <= radius, in BFS order

        A layer is committed to the index only once it fits under the element
        cap; on overflow the ball is left at its last complete radius.
        """
        if radius < 0:
            raise ValueError("radius must be non-negative")
        while len(self._layers) <= radius:
            staged: Dict[tuple, FormIsometry] = {}
            for g in self._layers[-1]:
                for s in self.symmetric:
                    h = g @ s
                    if h.key in self._index or h.key in staged:
                        continue
                    staged[h.key] = h
                    if len(self._index) + len(staged) > self.element_cap:
                        LOGGER.warning("word ball exceeded %d elements at radius %d",
                                       self.element_cap, len(self._layers))
                        raise BudgetExceeded(f"word ball exceeds {self.element_cap} elements",
                                             partial=list(self._index.values()) + list(staged.values()))
            self._index.update(staged)
            self._layers.append(list(staged.values()))
            LOGGER.debug("radius %d: %d new elements", len(self._layers) - 1, len(staged))
        return [g for layer in self._layers[:radius + 1] for g in layer]

    def lookup(self, g: FormIsometry) -> Optional[FormIsometry]:
        return self._index.get(g.key)

    def conjugated(self, h: FormIsometry):
        """The group h G h^-1 on the same form"""
        h_inv = h.inverse()
        return GeneratedGroup(self.form, [h @ g @ h_inv for g in self.generators], self.cone, self.element_cap,
                              self.name, self.presentation)


def word_ball(group: GeneratedGroup, radius) -> List[Tuple[str, FormIsometry]]:
    return [(g.word, g) for g in group.word_ball(radius)]


def word_length(group: GeneratedGroup, g: FormIsometry, radius) -> int:
    group.word_ball(radius)
    found = group.lookup(g)
    if found is None:
        raise NotInBall(f"element not found within word radius {radius}")
    return len(found.word)


@dataclass(frozen=True)
class Bisector:
    """Facet functional x -> functional . x >= 0 of the element's bisector"""
    element: FormIsometry
    functional: Tuple[Fraction, ...]
    certified: bool = False
    witness: Optional[Tuple[Fraction, ...]] = None

    def value(self, x):
        return sum((a * b for a, b in zip(self.functional, exact_vector(x))), Fraction(0))

    def to_json(self):
        data = {"word": self.element.word, "functional": [str(c) for c in self.functional],
                "certified": self.certified}
        if self.witness is not None:
            data["witness"] = [str(c) for c in self.witness]
        return data


@dataclass(frozen=True)
class RedundantBisector:
    """Exact proof that the bisector of `element` cuts nothing off the domain

    functional = sum_i weights[i] * facet_i + G cone_vector with every weight
    >= 0 and cone_vector in the closed future light cone, so functional . x
    >= 0 on every future x satisfying the facet inequalities.
    """
    element: FormIsometry
    functional: Tuple[Fraction, ...]
    weights: Tuple[Fraction, ...]
    cone_vector: Tuple[Fraction, ...]

    def holds(self, domain) -> bool:
        form = domain.form
        if len(self.weights) > len(domain.bisectors) or any(w < 0 for w in self.weights):
            return False
        if any(c != 0 for c in self.cone_vector):
            if form.q(self.cone_vector) < 0 or inner_product(self.cone_vector, form.witness, form) < 0:
                return False
        facets = [b.functional for b in domain.bisectors[:len(self.weights)]]
        return _cone_combination(form, facets, self.weights, self.cone_vector) == tuple(self.functional)

    def to_json(self):
        return {"word": self.element.word, "weights": [str(w) for w in self.weights],
                "cone_vector": [str(c) for c in self.cone_vector]}


@dataclass(frozen=True)
class SidePairing:
    """`element` maps facet `partner` onto facet `facet`"""
    facet: int
    element: FormIsometry
    partner: int

    def to_json(self):
        return {"facet": self.facet, "word": self.element.word, "partner": self.partner}


@dataclass(frozen=True)
class DirichletDomain:
    form: QuadraticForm
    xi: Tuple[Fraction, ...]
    basepoint: ModelPoint
    bisectors: Tuple[Bisector, ...]
    side_pairings: Tuple[SidePairing, ...]
    radius: int
    certified_locally_finite: bool
    redundant: Tuple[RedundantBisector, ...] = ()

    def contains(self, v, strict=False) -> bool:
        """Exact membership of the ray through a lattice vector"""
        v = exact_vector(v)
        if self.form.q(v) < 0 or inner_product(v, self.form.witness, self.form) <= 0:
            return False
        if strict:
            return all(b.value(v) > 0 for b in self.bisectors)
        return all(b.value(v) >= 0 for b in self.bisectors)

    def contains_ideal(self, p) -> bool:
        """Exact membership of a future null lattice vector in the closure"""
        return all(b.value(p) >= 0 for b in self.bisectors)

    def klein_constraints(self):
        """(A, b) with A k + b >= 0 describing the domain in the Klein chart"""
        return _klein_constraints(self.form, [b.functional for b in self.bisectors])

    def contains_klein(self, k, tol=0.0) -> bool:
        if not self.bisectors:
            return True
        a, b = self.klein_constraints()
        return bool(np.all(a @ np.asarray(k, dtype=float) + b >= -tol))

    def to_json(self):
        return {
            "basepoint": [str(c) for c in self.xi],
            "radius": self.radius,
            "facets": [b.to_json() for b in self.bisectors],
            "side_pairings": [s.to_json() for s in self.side_pairings],
            "certified_locally_finite": self.certified_locally_finite,
            "redundant_bisectors": [r.to_json() for r in self.redundant],
        }


def _klein_constraints(form, functionals):
    frame = frame_for(form)
    rows = np.array([[float(c) for c in ell] for ell in functionals], dtype=float) @ frame.P
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    rows = rows / norms
    return rows[:, 1:], rows[:, 0]


def _ball_directions(n):
    """Unit vectors whose tangent half-spaces u . k <= 1 contain the unit ball"""
    if n == 2:
        return unit_directions(2, 64)
    return np.vstack([np.identity(n), -np.identity(n), unit_directions(n, 200)])


def _violation(a_rows, b_rows, target_a, target_b, n):
    """Most negative value of target over {A k + b >= 0} inside the unit ball

    Returns (value, k). The LP over a polyhedral outer approximation of the
    ball screens out candidates that cannot cut the region at all.
    """
    directions = _ball_directions(n)
    a_ub = np.vstack([-a_rows, directions]) if len(a_rows) else directions
    b_ub = np.concatenate([b_rows, np.ones(len(directions))]) if len(a_rows) else np.ones(len(directions))
    screen = linprog(target_a, A_ub=a_ub, b_ub=b_ub, bounds=[(-1.0, 1.0)] * n, method="highs")
    if screen.status != 0 or screen.fun + target_b >= -FACET_TOL:
        return 0.0, None

    constraints = [{"type": "ineq", "fun": lambda k: 1.0 - 1e-12 - np.dot(k, k)}]
    if len(a_rows):
        constraints.append({"type": "ineq", "fun": lambda k: a_rows @ k + b_rows})
    start = np.asarray(screen.x, dtype=float)
    norm = np.linalg.norm(start)
    if norm >= 1.0:
        start = start * (0.999 / norm)
    result = minimize(lambda k: float(target_a @ k + target_b), start, jac=lambda k: target_a,
                      method="SLSQP", constraints=constraints, options={"ftol": 1e-14, "maxiter": 500})
    best_value, best_k = 0.0, None
    for k in (np.asarray(result.x, dtype=float), np.asarray(screen.x, dtype=float)):
        inside = np.dot(k, k) < 1.0 and (not len(a_rows) or np.all(a_rows @ k + b_rows >= -1e-10))
        value = float(target_a @ k + target_b)
        if inside and value < best_value:
            best_value, best_k = value, k
    return best_value, best_k


def _facet_witness(form, functionals, index, xi, k):
    """Exact lattice point on facet `index` strictly inside every other half-space"""
    frame = frame_for(form)
    x_float = frame.to_lattice(np.concatenate([[1.0], k]))
    ell = functionals[index]
    h_xi = sum((a * b for a, b in zip(ell, xi)), Fraction(0))
    for denominator in (10 ** 4, 10 ** 6, 10 ** 9):
        x = rationalize(x_float / np.max(np.abs(x_float)), denominator)
        h_x = sum((a * b for a, b in zip(ell, x)), Fraction(0))
        # Slide along xi onto the facet hyperplane
        point = tuple(c - (h_x / h_xi) * t for c, t in zip(x, xi))
        if form.q(point) <= 0 or inner_product(point, form.witness, form) <= 0:
            continue
        if all(sum((a * b for a, b in zip(other, point)), Fraction(0)) > 0
               for j, other in enumerate(functionals) if j != index):
            return point
    return None


def _cone_combination(form, facets, weights, cone_vector):
    """sum_i weights[i] * facets[i] + G cone_vector"""
    total = [sum((form.gram[i][j] * cone_vector[j] for j in range(form.dim)), Fraction(0)) for i in range(form.dim)]
    for w, facet in zip(weights, facets):
        for i in range(form.dim):
            total[i] += w * facet[i]
    return tuple(total)


def _rational_matrix(rows):
    return sp.Matrix([[sp.Rational(c.numerator, c.denominator) for c in row] for row in rows])


def _exact_gram_inverse(form):
    inv = _rational_matrix(form.gram).inv()
    return tuple(tuple(to_fraction(inv[i, j]) for j in range(form.dim)) for i in range(form.dim))


def _exact_weights(kept, ell, indices):
    """Nonnegative exact solution of ell = sum_{i in indices} w_i kept[i], or None"""
    if not indices or len(indices) > len(ell):
        return None
    m = _rational_matrix([[kept[i][r] for i in indices] for r in range(len(ell))])
    target = _rational_matrix([[c] for c in ell])
    normal = m.T * m
    if normal.det() == 0:
        return None
    solution = normal.LUsolve(m.T * target)
    if m * solution != target or any(s < 0 for s in solution):
        return None
    weights = [Fraction(0)] * len(kept)
    for i, s in zip(indices, solution):
        weights[i] = to_fraction(s)
    return tuple(weights)


def _light_cone_weights(form, ell, kept, gram_inv):
    """Weights leaving a future timelike remainder G^-1 (ell - sum w_i kept_i), or None"""
    frame = frame_for(form)
    to_frame = frame.P_inv @ np.linalg.inv(form.float_gram)
    base = to_frame @ np.array([float(c) for c in ell])
    cols = to_frame @ np.array([[float(c) for c in f] for f in kept], dtype=float).T if kept \
        else np.zeros((form.dim, 0))
    scale = max(np.linalg.norm(base), 1.0)

    def margin(lam):
        w = (base - cols @ lam) / scale
        return w[0] - np.sqrt(np.dot(w[1:], w[1:]) + 1e-18)

    lam = np.zeros(len(kept))
    if kept:
        bound = 1e3 * scale / np.maximum(np.linalg.norm(cols, axis=0), 1e-300)
        result = minimize(lambda x: -margin(x), lam, method="SLSQP", bounds=list(zip(np.zeros(len(kept)), bound)),
                          options={"ftol": 1e-14, "maxiter": 500})
        lam = np.clip(np.asarray(result.x, dtype=float), 0.0, bound)
    if margin(lam) <= 0.0:
        return None
    for denominator in (10 ** 6, 10 ** 9):
        weights = tuple(Fraction(float(x)).limit_denominator(denominator) for x in lam)
        residual = [ell[i] - sum((w * f[i] for w, f in zip(weights, kept)), Fraction(0)) for i in range(form.dim)]
        cone_vector = tuple(sum((gram_inv[i][j] * residual[j] for j in range(form.dim)), Fraction(0))
                            for i in range(form.dim))
        if form.q(cone_vector) > 0 and inner_product(cone_vector, form.witness, form) > 0:
            return weights, cone_vector
    return None


def _redundancy_certificate(form, ell, kept, gram_inv):
    """(weights, cone_vector) proving ell . x >= 0 on the domain cut out by `kept`, or None

    Tries a purely polyhedral certificate first (exact nonnegative combination
    of kept facets), then one with a future light-cone remainder.
    """
    zero = tuple(Fraction(0) for _ in range(form.dim))
    if kept:
        a = np.array([[float(c) for c in f] for f in kept], dtype=float).T
        b = np.array([float(c) for c in ell])
        col_norms = np.linalg.norm(a, axis=0)
        lp = linprog(np.zeros(len(kept)), A_eq=a / col_norms, b_eq=b / np.linalg.norm(b),
                     bounds=[(0, None)] * len(kept), method="highs")
        if lp.status == 0:
            top = max(float(np.max(lp.x)), 1e-300)
            support = [i for i, w in enumerate(lp.x) if w > 1e-12 * top]
            for indices in (support, list(range(len(kept)))):
                weights = _exact_weights(kept, ell, indices)
                if weights is not None:
                    return weights, zero
    return _light_cone_weights(form, ell, kept, gram_inv)


def dirichlet_domain(group: GeneratedGroup, xi, radius) -> DirichletDomain:
    """Dirichlet domain of the word ball at a rational timelike basepoint xi

    Facets are screened in floats, then settled exactly: every dropped
    bisector carries a RedundantBisector certificate and every kept one a
    rational facet witness when one is found. A bisector whose redundancy
    cannot be proven stays in the domain.
    """
    form = group.form.require_hyperbolic()
    xi = exact_vector(xi)
    if form.q(xi) <= 0 or inner_product(xi, form.witness, form) <= 0:
        raise InvalidPoint("basepoint must be a timelike vector in the positive sheet")
    elements = group.word_ball(radius)

    candidates = []
    for g in elements[1:]:
        image = g.apply(xi)
        if image == xi:
            raise StabilizerNontrivial(f"element {g.word!r} fixes the basepoint")
        diff = tuple(a - b for a, b in zip(image, xi))
        ell = tuple(sum((form.gram[i][j] * diff[j] for j in range(form.dim)), Fraction(0))
                    for i in range(form.dim))
        candidates.append((inner_product(xi, image, form), len(g.word), g,
                           tuple(Fraction(c) for c in primitive(ell))))
    # Nearest orbit points first; they carry the facets
    candidates.sort(key=lambda c: (c[0], c[1]))

    n = form.n
    accepted: List[Tuple[FormIsometry, Tuple[Fraction, ...]]] = []
    for _, _, g, ell in candidates:
        target_a, target_b = _klein_constraints(form, [ell])
        if accepted:
            a_rows, b_rows = _klein_constraints(form, [e for _, e in accepted])
        else:
            a_rows, b_rows = np.zeros((0, n)), np.zeros(0)
        value, _ = _violation(a_rows, b_rows, target_a[0], target_b[0], n)
        if value < -FACET_TOL:
            accepted.append((g, ell))

    # Later facets can hide earlier ones
    changed = True
    while changed:
        changed = False
        for i in range(len(accepted)):
            others = [e for j, (_, e) in enumerate(accepted) if j != i]
            a_rows, b_rows = _klein_constraints(form, others) if others else (np.zeros((0, n)), np.zeros(0))
            target_a, target_b = _klein_constraints(form, [accepted[i][1]])
            value, _ = _violation(a_rows, b_rows, target_a[0], target_b[0], n)
            if value >= -FACET_TOL:
                LOGGER.debug("dropping redundant bisector of %r", accepted[i][0].word)
                del accepted[i]
                changed = True
                break

    gram_inv = _exact_gram_inverse(form)
    kept_keys = {g.key for g, _ in accepted}
    redundant = []
    for _, _, g, ell in candidates:
        if g.key in kept_keys:
            continue
        found = _redundancy_certificate(form, ell, [e for _, e in accepted], gram_inv)
        if found is None:
            LOGGER.warning("bisector of %r kept: its redundancy could not be proven exactly", g.word)
            accepted.append((g, ell))
            kept_keys.add(g.key)
        else:
            redundant.append(RedundantBisector(g, ell, *found))

    functionals = [ell for _, ell in accepted]
    bisectors = []
    for i, (g, ell) in enumerate(accepted):
        witness = None
        k = _facet_point(form, functionals, i)
        if k is not None:
            witness = _facet_witness(form, functionals, i, xi, k)
        if witness is None:
            LOGGER.warning("facet of %r could not be certified exactly", g.word)
        bisectors.append(Bisector(g, ell, witness is not None, witness))

    pairings = []
    by_key = {b.element.key: i for i, b in enumerate(bisectors)}
    for i, b in enumerate(bisectors):
        partner = by_key.get(b.element.inverse().key)
        if partner is not None:
            pairings.append(SidePairing(i, b.element, partner))
    certified = len(pairings) == len(bisectors) and all(b.certified for b in bisectors)
    LOGGER.info("Dirichlet domain at radius %d: %d facets, %d paired, %d proven redundant",
                radius, len(bisectors), len(pairings), len(redundant))
    return DirichletDomain(form, xi, frame_for(form).point(xi), tuple(bisectors), tuple(pairings),
                           radius, certified, tuple(redundant))


def _facet_point(form, functionals, index):
    """Klein point on facet `index` maximizing its clearance from the other facets"""
    n = form.n
    a_all, b_all = _klein_constraints(form, functionals)
    others = [j for j in range(len(functionals)) if j != index]
    a_rows, b_rows = a_all[others], b_all[others]
    a_f, b_f = a_all[index], b_all[index]

    constraints = [
        {"type": "eq", "fun": lambda z: a_f @ z[:-1] + b_f},
        {"type": "ineq", "fun": lambda z: 1.0 - np.dot(z[:-1], z[:-1]) - z[-1]},
    ]
    if len(others):
        constraints.append({"type": "ineq", "fun": lambda z: a_rows @ z[:-1] + b_rows - z[-1]})
    # Foot of the facet hyperplane from the Klein origin
    start = -b_f * a_f / max(np.dot(a_f, a_f), 1e-300)
    norm = np.linalg.norm(start)
    if norm >= 1.0:
        start = start * (0.99 / norm)
    result = minimize(lambda z: -z[-1], np.concatenate([start, [0.0]]), method="SLSQP", constraints=constraints,
                      bounds=[(-1.0, 1.0)] * n + [(None, 1.0)], options={"ftol": 1e-14, "maxiter": 1000})
    if not result.success or result.x[-1] <= FACET_TOL:
        return None
    return np.asarray(result.x[:-1], dtype=float)


def choose_basepoint(group: GeneratedGroup, radius, rng, attempts=20):
    """Small rational timelike vector with trivial stabilizer in the word ball"""
    form = group.form.require_hyperbolic()
    elements = group.word_ball(radius)[1:]
    base = form.witness
    for attempt in range(attempts):
        if attempt == 0:
            candidate = base
        else:
            shift = rng.integers(-2, 3, size=form.dim)
            candidate = tuple(Fraction(int(c)) * 4 + Fraction(int(s)) for c, s in zip(primitive(base), shift))
        if form.q(candidate) <= 0 or inner_product(candidate, form.witness, form) <= 0:
            continue
        if all(g.apply(candidate) != tuple(candidate) for g in elements):
            return tuple(Fraction(c) for c in candidate)
        LOGGER.warning("basepoint %s has nontrivial stabilizer, retrying", [str(c) for c in candidate])
    raise StabilizerNontrivial(f"no basepoint with trivial stabilizer after {attempts} attempts")


@dataclass(frozen=True)
class LimitSample:
    points: Tuple[Tuple[BoundaryPoint, str], ...]
    depth: int

    def directions(self):
        return np.array([p.direction for p, _ in self.points]) if self.points else np.zeros((0, 0))

    def to_json(self):
        return {"depth": self.depth,
                "points": [{"word": w, **p.to_json()} for p, w in self.points]}


def deduplicate_directions(directions, tol=ANGULAR_TOL):
    """Index of the first representative of each cluster of nearby unit vectors"""
    if len(directions) == 0:
        return []
    pairs = cKDTree(directions).query_pairs(tol, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
                       shape=(len(directions), len(directions)))
    _, labels = connected_components(graph, directed=False)
    first = {}
    for i, label in enumerate(labels):
        first.setdefault(label, i)
    return sorted(first.values())


def limit_sample(group: GeneratedGroup, depth, basepoint: Optional[ModelPoint] = None,
                 tol=ANGULAR_TOL) -> LimitSample:
    """Directions of gamma x for the elements of word length exactly depth"""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    frame = group.frame
    x = to_hyperboloid(basepoint) if basepoint is not None else to_hyperboloid(frame.origin())
    layer = group.layer(depth)
    directions, words = [], []
    for g in layer:
        y = frame.matrix(g) @ x
        spatial = y[1:]
        norm = np.linalg.norm(spatial)
        if norm == 0.0:
            continue
        directions.append(spatial / norm)
        words.append(g.word)
    keep = deduplicate_directions(np.array(directions), tol) if directions else []
    points = tuple((BoundaryPoint.from_unit(directions[i]), words[i]) for i in keep)
    LOGGER.debug("limit sample at depth %d: %d of %d directions", depth, len(points), len(directions))
    return LimitSample(points, depth)


def _fixes(g: FormIsometry, p: BoundaryPoint, frame, tol=ANGULAR_TOL):
    if p.exact is not None:
        return primitive(g.apply(p.exact)) == tuple(p.exact)
    image = BoundaryPoint.from_null(frame.matrix(g) @ p.null)
    return image.angle_to(p) < tol


@dataclass(frozen=True)
class BoundaryStabilizer:
    point: BoundaryPoint
    elements: Tuple[FormIsometry, ...]
    parabolics: Tuple[FormIsometry, ...]
    translations: Tuple[Tuple[float, ...], ...]
    bieberbach_rank: int

    def to_json(self):
        return {"point": self.point.to_json(), "elements": [g.word for g in self.elements],
                "parabolics": [g.word for g in self.parabolics], "bieberbach_rank": self.bieberbach_rank}


def boundary_stabilizer(group: GeneratedGroup, p: BoundaryPoint, radius) -> BoundaryStabilizer:
    """Ball elements fixing p and the rank of their parabolic translation lattice"""
    frame = group.frame
    fixing = [g for g in group.word_ball(radius) if _fixes(g, p, frame)]
    if len(fixing) <= 1:
        raise NotFixed("no nontrivial enumerated element fixes the point")
    base = frame.to_frame(p.exact) if p.exact is not None else p.null
    chart = HalfSpaceChart(base / base[0])
    origin = to_hyperboloid(frame.origin())
    w0, _ = chart.coords(origin)

    parabolics, translations = [], []
    for g in fixing[1:]:
        c = classify(g)
        if c.kind is not IsometryKind.PARABOLIC:
            continue
        parabolics.append(g)
        unipotent = g ** (c.order or 1)
        w, _ = chart.coords(frame.matrix(unipotent) @ origin)
        translations.append(tuple(w - w0))
    rank = 0
    if translations:
        t = np.array(translations, dtype=float)
        scale = max(1.0, float(np.max(np.abs(t))))
        rank = int(np.linalg.matrix_rank(t, tol=RANK_TOL * scale))
    return BoundaryStabilizer(p, tuple(fixing), tuple(parabolics), tuple(translations), rank)


@dataclass(frozen=True)
class ConicalVerdict:
    conical: bool
    inconclusive: bool
    depth: int
    reach: float

    def to_json(self):
        return {"conical": self.conical, "inconclusive": self.inconclusive, "radius": self.depth,
                "reach": self.reach}


def conical_limit_test(group: GeneratedGroup, a: BoundaryPoint, radius, tube=1.0,
                       basepoint: Optional[ModelPoint] = None) -> ConicalVerdict:
    """Sampled conical approach: orbit points deep along the ray [x, a) within the tube"""
    frame = group.frame
    x = to_hyperboloid(basepoint) if basepoint is not None else to_hyperboloid(frame.origin())
    try:
        elements = group.word_ball(radius)
    except BudgetExceeded as exc:
        LOGGER.warning("conical test ran out of budget at radius %d", radius)
        elements = exc.partial or []
        if not elements:
            return ConicalVerdict(False, True, radius, 0.0)
    a_null = a.null
    u = a_null / minkowski(a_null, x) - x
    farthest, reach = 0.0, 0.0
    for g in elements:
        y = frame.matrix(g) @ x
        farthest = max(farthest, hyperboloid_distance(x, y))
        value, s = min_pairing(minkowski(y, x), minkowski(y, u), 0.0, np.inf)
        if np.arccosh(max(value, 1.0)) <= tube:
            reach = max(reach, s)
    if farthest == 0.0:
        return ConicalVerdict(False, False, radius, 0.0)
    conical = reach >= farthest / 2.0
    return ConicalVerdict(conical, False, radius, float(reach))


@dataclass(frozen=True)
class PropernessWitness:
    ball_radius: float
    counts: Tuple[int, int]
    stable: bool

    def to_json(self):
        return {"ball_radius": self.ball_radius, "counts": list(self.counts), "stable": self.stable}


def properness_witness(group: GeneratedGroup, xi, radius) -> PropernessWitness:
    """Count gamma with gamma B(xi, r) meeting B(xi, r), r half the least displacement"""
    frame = group.frame
    x = to_hyperboloid(frame.point(xi))

    def displacements(r):
        return [hyperboloid_distance(frame.matrix(g) @ x, x) for g in group.word_ball(r)]

    inner = displacements(radius)
    positive = [d for d in inner if d > 1e-12]
    r = min(positive) / 2.0 if positive else 0.0
    count = sum(1 for d in inner if d <= 2.0 * r + 1e-12)
    count_outer = sum(1 for d in displacements(radius + 2) if d <= 2.0 * r + 1e-12)
    return PropernessWitness(r, (count, count_outer), count == count_outer)


@dataclass(frozen=True)
class TilingReport:
    samples: int
    covered: int
    overlaps: int
    cover_radius: float
    single_interior: int = 0
    passed: bool = field(default=False)

    def to_json(self):
        return {"samples": self.samples, "covered": self.covered, "overlaps": self.overlaps,
                "single_interior": self.single_interior, "cover_radius": self.cover_radius, "passed": self.passed}


def tiling_check(domain: DirichletDomain, group: GeneratedGroup, radius, cover_radius, rng,
                 samples=200) -> TilingReport:
    """Sampled exact check that ball translates cover B(xi, r) with disjoint interiors

    Each sample z is rationalized and pulled back by every gamma^-1 in the
    word ball; gamma D contains z iff gamma^-1 z satisfies every facet
    inequality exactly. A float pre-pass discards translates that miss z by
    a wide margin before the exact test. A sample is covered with a closure
    hit and overlaps with more than one interior hit; passing needs exactly
    one interior hit for every sample.
    """
    frame = group.frame
    form = domain.form
    elements = group.word_ball(radius)
    gram = form.float_gram
    gram_inv = np.linalg.inv(gram)
    # g^-1 = G^-1 g^T G for every element of the ball
    inverse_stack = np.array([gram_inv @ g.float_array.T @ gram for g in elements])
    inverse_norms = np.linalg.norm(inverse_stack, axis=(1, 2))
    functionals = np.array([[float(c) for c in b.functional] for b in domain.bisectors], dtype=float)
    functional_norms = np.linalg.norm(functionals, axis=1) if len(functionals) else np.zeros(0)
    xi = to_hyperboloid(domain.basepoint)
    boost = boost_from_origin(xi)
    inverses = {}
    covered = overlaps = single = 0
    for _ in range(samples):
        direction = rng.normal(size=frame.n)
        direction /= np.linalg.norm(direction)
        r = cover_radius * rng.random() ** (1.0 / frame.n)
        local = np.concatenate([[np.cosh(r)], np.sinh(r) * direction])
        z = rationalize(frame.to_lattice(boost @ local), 10 ** 9)
        zf = np.array([float(c) for c in z])
        pulled = inverse_stack @ zf
        values = pulled @ functionals.T if len(functionals) else np.zeros((len(elements), 0))
        slack = 1e-9 * np.outer(inverse_norms, functional_norms) * np.linalg.norm(zf)
        candidates = np.flatnonzero(np.all(values >= -slack, axis=1))
        closure_hits = interior_hits = 0
        for i in candidates:
            g = elements[i]
            if g.key not in inverses:
                inverses[g.key] = g.inverse()
            exact = inverses[g.key].apply(z)
            if domain.contains(exact):
                closure_hits += 1
                if domain.contains(exact, strict=True):
                    interior_hits += 1
        covered += int(closure_hits > 0)
        overlaps += int(interior_hits > 1)
        single += int(interior_hits == 1)
    passed = covered == samples and overlaps == 0 and single == samples
    if not passed:
        LOGGER.warning("tiling check: %d/%d covered, %d overlaps, %d with one interior hit",
                       covered, samples, overlaps, single)
    return TilingReport(samples, covered, overlaps, float(cover_radius), single, passed)

