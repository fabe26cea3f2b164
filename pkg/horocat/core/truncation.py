"""
Truncated hyperbolic space
Cusps of a Dirichlet domain, the equivariant family of disjoint open
horoballs removed at them, geodesics of the induced length metric on the
complement, and sampled CAT(0) and compactness witnesses.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.spatial import ConvexHull, QhullError

from .discrete_groups import BoundaryStabilizer, DirichletDomain, GeneratedGroup, LimitSample, boundary_stabilizer
from .errors import ConvergenceFailure, InsideHoroball, NoDisjointLevel, RankDeficientCusp
from .forms import QuadraticForm, inner_product, primitive
from .isometries import IsometryKind, classify, frame_for, maybe_not_loxodromic
from .models import (BoundaryPoint, HalfSpaceChart, Model, ModelPoint, boost_from_origin,
                     hyperboloid_distance, hyperboloid_lerp, minkowski, to_hyperboloid, unit_directions)

LOGGER = logging.getLogger(__name__)

SOLVER_TOL = 1e-10
SOLVER_MAX_ITER = 10000
MAX_RESEEDS = 3
PENALTY = 100.0
# Relative slack for "on the horosphere" decisions
ON_HOROSPHERE = 1e-9
SHRINK_FACTOR = 1.5
MAX_SHRINKS = 10
FINE_EDGE = 0.5
UNBOUNDED_DISTANCE = 20.0
# Pure hyperbolic triangles with every side >= STRICT_MIN_SIDE must have excess <= -STRICT_MARGIN
STRICT_MARGIN = 1e-4
STRICT_MIN_SIDE = 0.5
RAY_LIMIT = 60.0


@dataclass(frozen=True)
class Horoball:
    """Open horoball {x : <x, v> < 1 / level}

    `vector` is the null vector v in standard coordinates, scaled from the
    primitive lattice vector of the base when that is known; with that
    scaling every translate of a horoball keeps its level, and the level is
    the height of its horosphere in the half-space chart centred at the base.
    """
    base: BoundaryPoint
    vector: Tuple[float, ...]
    level: float
    open: bool = True

    @classmethod
    def at(cls, base: BoundaryPoint, level, form: Optional[QuadraticForm] = None):
        if base.exact is not None and form is not None:
            vector = frame_for(form).to_frame(base.exact)
        else:
            vector = base.null
        return cls(base, tuple(float(c) for c in vector), float(level))

    @property
    def null(self):
        return np.array(self.vector, dtype=float)

    @property
    def c(self):
        return 1.0 / self.level

    def pairing(self, x):
        return float(minkowski(x, self.null))

    def contains(self, x, closed=False):
        value = self.pairing(x)
        return value <= self.c if closed else value < self.c * (1.0 - ON_HOROSPHERE)

    def chart(self):
        return HalfSpaceChart(self.null)

    def ball_model(self):
        """(centre, radius) of the Euclidean ball it is in the Poincare model"""
        v = self.null
        c_hat = self.c / v[0]
        rho = c_hat / (1.0 + c_hat)
        u = v[1:] / v[0]
        return (1.0 - rho) * u, rho

    def antipodal_point(self):
        """Point of the horosphere opposite its base in the ball model, on the hyperboloid"""
        centre, rho = self.ball_model()
        u = centre / np.linalg.norm(centre) if np.linalg.norm(centre) > 0 else self.null[1:] / self.null[0]
        b = (1.0 - 2.0 * rho) * u
        r2 = float(np.dot(b, b))
        return np.concatenate([[(1.0 + r2) / (1.0 - r2)], 2.0 * b / (1.0 - r2)])

    def disjoint_from(self, other, slack=ON_HOROSPHERE):
        """Closures are disjoint iff <v1, v2> > 2 c1 c2"""
        return float(minkowski(self.null, other.null)) > 2.0 * self.c * other.c * (1.0 + slack)

    def with_level(self, level):
        return Horoball(self.base, self.vector, float(level), self.open)

    def to_json(self):
        return {"base": self.base.to_json(), "level": self.level, "open": self.open}


@dataclass(frozen=True)
class CuspOrbit:
    representative: BoundaryPoint
    members: Tuple[BoundaryPoint, ...]
    stabilizer: BoundaryStabilizer
    rank: int
    n: int

    @property
    def full_rank(self):
        return self.rank == self.n - 1

    def to_json(self):
        return {"representative": self.representative.to_json(),
                "members": [m.to_json() for m in self.members],
                "bieberbach_rank": self.rank, "full_rank_cusp": self.full_rank,
                "stabilizer": [g.word for g in self.stabilizer.parabolics]}


def detect_cusps(group: GeneratedGroup, domain: DirichletDomain, radius) -> List[CuspOrbit]:
    """Parabolic fixed points in the closure of the domain, grouped into orbits"""
    elements = group.word_ball(radius)
    candidates: Dict[tuple, BoundaryPoint] = {}
    for g in elements[1:]:
        if not maybe_not_loxodromic(g):
            continue
        c = classify(g)
        if c.kind is not IsometryKind.PARABOLIC:
            continue
        p = c.fixed_boundary[0]
        if p.exact not in candidates and domain.contains_ideal(p.exact):
            candidates[p.exact] = p

    orbits = []
    assigned = set()
    for key, point in candidates.items():
        if key in assigned:
            continue
        assigned.add(key)
        members = [point]
        for g in elements:
            image = primitive(g.apply(key))
            if image in candidates and image not in assigned:
                assigned.add(image)
                members.append(candidates[image])
        stabilizer = boundary_stabilizer(group, point, radius)
        orbits.append(CuspOrbit(point, tuple(members), stabilizer, stabilizer.bieberbach_rank, group.form.n))
    LOGGER.info("found %d cusp orbit(s) at radius %d", len(orbits), radius)
    return orbits


def rank_of_cusp(group: GeneratedGroup, p: BoundaryPoint, radius) -> int:
    return boundary_stabilizer(group, p, radius).bieberbach_rank


class LimitHull:
    """Convex hull of a limit sample in the Klein chart

    Facets whose edges are all shorter than `fine_edge` are treated as part
    of the sphere at infinity, so the sampled hull of a dense limit set is
    the whole ball. Fewer than n + 1 points give a degenerate hull tested
    by linear programming.
    """

    def __init__(self, points, fine_edge=FINE_EDGE):
        if isinstance(points, LimitSample):
            points = points.directions()
        self.points = np.asarray(points, dtype=float)
        self.fine_edge = fine_edge
        self.hull = None
        if self.points.ndim == 2 and len(self.points) > self.points.shape[1]:
            try:
                self.hull = ConvexHull(self.points)
            except QhullError:
                LOGGER.debug("limit sample is degenerate, using LP membership")
        self._coarse = None
        if self.hull is not None:
            coarse = []
            for simplex, equation in zip(self.hull.simplices, self.hull.equations):
                vertices = self.points[simplex]
                edges = [np.linalg.norm(a - b) for i, a in enumerate(vertices) for b in vertices[i + 1:]]
                if max(edges) > fine_edge:
                    coarse.append(equation)
            self._coarse = np.array(coarse).reshape(-1, self.points.shape[1] + 1)

    @property
    def degenerate(self):
        return self.hull is None

    def functionals(self):
        """Rows L with L . x >= 0 on hyperboloid points inside the hull, or None"""
        if self.hull is None:
            return None
        # normal . k + offset <= 0 inside, homogenized with x0
        return -np.column_stack([self._coarse[:, -1], self._coarse[:, :-1]])

    def contains_klein(self, k, tol=1e-12):
        k = np.asarray(k, dtype=float)
        if np.dot(k, k) >= 1.0:
            return False
        if self.hull is None:
            if len(self.points) == 0:
                return False
            count = len(self.points)
            a_eq = np.vstack([self.points.T, np.ones((1, count))])
            b_eq = np.concatenate([k, [1.0]])
            result = linprog(np.zeros(count), A_eq=a_eq, b_eq=b_eq, bounds=[(0.0, None)] * count, method="highs")
            return result.status == 0
        if len(self._coarse) == 0:
            return True
        return bool(np.all(self._coarse[:, :-1] @ k + self._coarse[:, -1] <= tol))


@dataclass(frozen=True)
class HoroballFamily:
    form: Optional[QuadraticForm]
    representatives: Tuple[Tuple[Horoball, int], ...]
    translates: Tuple[Tuple[Horoball, int, str], ...]
    radius: int
    step4_satisfied: bool = True
    _index: Dict[tuple, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        for i, (ball, _, _) in enumerate(self.translates):
            if ball.base.exact is not None:
                self._index[tuple(ball.base.exact)] = i

    @classmethod
    def single(cls, horoball: Horoball):
        """Family of one horoball with no group, for direct geometric use"""
        return cls(None, ((horoball, 0),), ((horoball, 0, ""),), 0)

    @property
    def horoballs(self):
        return [ball for ball, _, _ in self.translates]

    @property
    def level(self):
        return self.representatives[0][0].level if self.representatives else None

    def contains(self, x, closed=False):
        return any(ball.contains(x, closed) for ball in self.horoballs)

    def image(self, g, i) -> Optional[int]:
        """Index j with g B_i = B_j, when g B_i is an enumerated translate"""
        base = self.translates[i][0].base.exact
        return self._index.get(primitive(g.apply(base)))

    def arrays(self):
        if not self.translates:
            return np.zeros((0, 0)), np.zeros(0)
        return (np.array([ball.vector for ball in self.horoballs], dtype=float),
                np.array([ball.c for ball in self.horoballs], dtype=float))

    def to_json(self):
        return {
            "radius": self.radius,
            "level": self.level,
            "step4_satisfied": self.step4_satisfied,
            "representatives": [dict(ball.to_json(), orbit=orbit) for ball, orbit in self.representatives],
            "translates": len(self.translates),
        }


def _bisect_level(predicate, iterations=200):
    """Smallest level (to relative 1e-12) where the monotone predicate holds"""
    hi = 1.0
    for _ in range(64):
        if predicate(hi):
            break
        hi *= 2.0
    else:
        raise NoDisjointLevel("no level with disjoint translates found")
    lo = 0.0
    for _ in range(iterations):
        if hi - lo <= 1e-12 * hi:
            break
        mid = (lo + hi) / 2.0
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return hi


def build_horoball_family(group: GeneratedGroup, cusps: Sequence[CuspOrbit], radius, hull: Optional[LimitHull] = None,
                          level=None, shrink=SHRINK_FACTOR, max_shrinks=MAX_SHRINKS) -> HoroballFamily:
    """One horoball per cusp orbit at a common level, plus all its ball translates

    The level is the least one for which every pair of distinct translates
    has disjoint closures, certified exactly: h^2 <p, g p'> > 2 on primitive
    lattice null vectors.
    """
    deficient = [c for c in cusps if not c.full_rank]
    if deficient:
        raise RankDeficientCusp(f"{len(deficient)} cusp(s) have Bieberbach rank below {group.form.n - 1}",
                                cusps=deficient)
    form = group.form
    if not cusps:
        return HoroballFamily(form, (), (), radius)
    elements = group.word_ball(radius)

    bases: Dict[tuple, Tuple[int, str]] = {}
    for k, cusp in enumerate(cusps):
        for g in elements:
            key = primitive(g.apply(cusp.representative.exact))
            bases.setdefault(key, (k, g.word))

    least = None
    for cusp in cusps:
        for key in bases:
            if key == tuple(cusp.representative.exact):
                continue
            value = inner_product(cusp.representative.exact, key, form)
            if least is None or value < least:
                least = value
    if least is None or least <= 0:
        raise NoDisjointLevel("cusp translates are not separated")

    def disjoint(h):
        return Fraction(h) ** 2 * least > 2

    if level is None:
        level = _bisect_level(disjoint)
    elif not disjoint(level):
        raise NoDisjointLevel(f"level {level} does not separate translates (needs h^2 > {2 / least})")
    LOGGER.info("horoball level %.9g (minimal pairing %s)", level, least)

    frame = frame_for(form)
    step4 = True
    if hull is not None:
        for _ in range(max_shrinks + 1):
            tops = [Horoball.at(c.representative, level, form).antipodal_point() for c in cusps]
            if all(hull.contains_klein(top[1:] / top[0]) for top in tops):
                break
            level *= shrink
        else:
            step4 = False
            LOGGER.warning("antipodal points stay outside the limit hull after %d shrinks", max_shrinks)

    representatives = tuple((Horoball.at(c.representative, level, form), k) for k, c in enumerate(cusps))
    translates = tuple((Horoball(BoundaryPoint.from_null(frame.to_frame(key), key),
                                 tuple(float(v) for v in frame.to_frame(key)), float(level)), k, word)
                       for key, (k, word) in bases.items())
    return HoroballFamily(form, representatives, translates, radius, step4)


def certify_disjoint(family: HoroballFamily):
    """(all closures pairwise disjoint, number of pairs checked exactly)"""
    if len(family.translates) < 2:
        return True, 0
    vectors, cs = family.arrays()
    pairings = minkowski(vectors[:, None, :], vectors[None, :, :])
    bounds = 2.0 * np.outer(cs, cs)
    exact_checked = 0
    ok = True
    for i, j in zip(*np.triu_indices(len(vectors), 1)):
        if pairings[i, j] > bounds[i, j] * (1.0 + 1e-6):
            continue
        a = family.translates[i][0]
        b = family.translates[j][0]
        if family.form is not None and a.base.exact is not None and b.base.exact is not None:
            exact_checked += 1
            value = inner_product(a.base.exact, b.base.exact, family.form)
            ok &= Fraction(a.level) * Fraction(b.level) * value > 2
        else:
            ok &= bool(pairings[i, j] > bounds[i, j])
    return ok, exact_checked


@dataclass(frozen=True)
class HyperbolicArc:
    start: Tuple[float, ...]
    end: Tuple[float, ...]

    @property
    def length(self):
        return hyperboloid_distance(self.start, self.end)

    def point(self, t):
        return hyperboloid_lerp(np.array(self.start), np.array(self.end), t)

    def to_json(self):
        return {"type": "hyperbolic", "start": list(self.start), "end": list(self.end), "length": self.length}


@dataclass(frozen=True)
class HorosphericalArc:
    """Straight segment of a horosphere in its flat half-space coordinates"""
    horoball: int
    level: float
    start_w: Tuple[float, ...]
    end_w: Tuple[float, ...]
    chart: HalfSpaceChart = field(compare=False, repr=False)

    @property
    def length(self):
        return float(np.linalg.norm(np.subtract(self.end_w, self.start_w)) / self.level)

    @property
    def start(self):
        return tuple(self.chart.to_hyperboloid(self.start_w, self.level))

    @property
    def end(self):
        return tuple(self.chart.to_hyperboloid(self.end_w, self.level))

    def point(self, t):
        w = (1.0 - t) * np.asarray(self.start_w) + t * np.asarray(self.end_w)
        return self.chart.to_hyperboloid(w, self.level)

    def to_json(self):
        return {"type": "horospherical", "horoball": self.horoball, "start": list(self.start),
                "end": list(self.end), "length": self.length}


@dataclass(frozen=True)
class TruncatedGeodesic:
    arcs: Tuple[object, ...]
    total_length: float
    locally_optimal: bool = True
    residual: float = 0.0
    reseeds: int = 0

    def __post_init__(self):
        for a, b in zip(self.arcs, self.arcs[1:]):
            if type(a) is type(b):
                raise ValueError("arc types must alternate")

    @property
    def horoballs_crossed(self):
        return [arc.horoball for arc in self.arcs if isinstance(arc, HorosphericalArc)]

    def point_at(self, fraction):
        """Point at the given fraction of total arc length"""
        if self.total_length <= 0.0:
            return np.array(self.arcs[0].start)
        target = fraction * self.total_length
        for arc in self.arcs:
            length = arc.length
            if target <= length or arc is self.arcs[-1]:
                return arc.point(min(target / length, 1.0) if length > 0 else 0.0)
            target -= length
        return np.array(self.arcs[-1].end)

    def to_json(self):
        return {"total_length": self.total_length, "locally_optimal": self.locally_optimal,
                "residual": self.residual, "reseeds": self.reseeds, "horoballs_crossed": self.horoballs_crossed,
                "arcs": [a.to_json() for a in self.arcs]}


def _penetration(u, v, vectors, cs):
    """Relative depth max(0, 1 - min <x, V> / c) of the segment [u, v] into each horoball"""
    alpha = minkowski(vectors, u)
    length = hyperboloid_distance(u, v)
    if length < 1e-12:
        return np.maximum(0.0, 1.0 - alpha / cs)
    beta = (minkowski(vectors, v) - alpha * np.cosh(length)) / np.sinh(length)
    ratio = np.clip(-beta / np.maximum(alpha, 1e-300), -1.0 + 1e-16, 1.0 - 1e-16)
    s = np.clip(np.arctanh(ratio), 0.0, length)
    lowest = alpha * np.cosh(s) + beta * np.sinh(s)
    return np.maximum(0.0, 1.0 - lowest / cs)


def _crossing_params(u, v, vector, c):
    """Arc-length parameters where [u, v] enters and leaves {<x, vector> < c}"""
    length = hyperboloid_distance(u, v)
    alpha = float(minkowski(u, vector))
    beta = (float(minkowski(v, vector)) - alpha * np.cosh(length)) / np.sinh(length)
    # alpha cosh s + beta sinh s = c  <=>  (alpha + beta) E^2 - 2 c E + (alpha - beta) = 0, E = e^s
    disc = max(c * c - (alpha * alpha - beta * beta), 0.0)
    if alpha + beta > 1e-300:
        roots = [(c - np.sqrt(disc)) / (alpha + beta), (c + np.sqrt(disc)) / (alpha + beta)]
    else:
        roots = [(alpha - beta) / (2.0 * c), np.inf]
    params = [float(np.clip(np.log(r), 0.0, length)) if r > 0 else 0.0 for r in roots]
    return params[0], params[1], length


class _Path:
    """Crossing sequence with entry/exit horosphere coordinates"""

    def __init__(self, x, y, family, sequence):
        self.x, self.y = x, y
        self.family = family
        self.sequence = list(sequence)
        self.charts = {}
        self.w = {}
        self.fixed = set()

    def chart(self, i):
        if i not in self.charts:
            self.charts[i] = self.family.horoballs[i].chart()
        return self.charts[i]

    def seed_between(self, i, u, v):
        ball = self.family.horoballs[i]
        s_in, s_out, length = _crossing_params(u, v, ball.null, ball.c)
        entry = hyperboloid_lerp(u, v, s_in / length, length)
        leave = hyperboloid_lerp(u, v, s_out / length, length)
        self.w[i] = (self.chart(i).coords(entry)[0], self.chart(i).coords(leave)[0])

    def snap_endpoints(self):
        first, last = self.sequence[0], self.sequence[-1]
        for i, point, slot in ((first, self.x, 0), (last, self.y, 1)):
            ball = self.family.horoballs[i]
            if abs(ball.pairing(point) / ball.c - 1.0) < ON_HOROSPHERE:
                pair = list(self.w[i])
                pair[slot] = self.chart(i).coords(point)[0]
                self.w[i] = tuple(pair)
                self.fixed.add((i, slot))

    def points(self):
        """Corner points x, e1, o1, ..., y on the hyperboloid"""
        corners = [self.x]
        for i in self.sequence:
            level = self.family.horoballs[i].level
            entry, leave = self.w[i]
            corners.append(self.chart(i).to_hyperboloid(entry, level))
            corners.append(self.chart(i).to_hyperboloid(leave, level))
        corners.append(self.y)
        return corners

    def energy(self, vectors, cs, penalty=PENALTY):
        corners = self.points()
        total, pen = 0.0, 0.0
        for k in range(0, len(corners), 2):
            u, v = corners[k], corners[k + 1]
            total += hyperboloid_distance(u, v)
            if len(cs):
                pen += float(np.sum(_penetration(u, v, vectors, cs)))
        for i in self.sequence:
            entry, leave = self.w[i]
            total += float(np.linalg.norm(np.subtract(leave, entry))) / self.family.horoballs[i].level
        return total + penalty * pen, total, pen

    def free_block(self, i):
        return [slot for slot in (0, 1) if (i, slot) not in self.fixed]


def _relevant(family, x, y, bound):
    """Translates within `bound` of x or y; no shorter path can reach the others"""
    vectors, cs = family.arrays()
    if not len(cs):
        return np.arange(0)
    dx = np.log(np.maximum(minkowski(vectors, x) / cs, 1e-300))
    dy = np.log(np.maximum(minkowski(vectors, y) / cs, 1e-300))
    return np.flatnonzero(np.minimum(dx, dy) <= bound + 1e-9)


def _optimize(path, vectors, cs, tol, max_iter):
    energy, _, _ = path.energy(vectors, cs)
    residual, iterations, converged = np.inf, 0, False
    n_free = sum(len(path.free_block(i)) for i in path.sequence)
    if n_free == 0:
        return energy, 0.0, 0, True
    while iterations < max_iter:
        before = energy
        for i in path.sequence:
            slots = path.free_block(i)
            if not slots:
                continue
            dim = len(path.w[i][0])
            x0 = np.concatenate([np.asarray(path.w[i][s], dtype=float) for s in slots])

            def objective(z, i=i, slots=slots, dim=dim):
                pair = list(path.w[i])
                for k, s in enumerate(slots):
                    pair[s] = z[k * dim:(k + 1) * dim]
                saved = path.w[i]
                path.w[i] = tuple(pair)
                value = path.energy(vectors, cs)[0]
                path.w[i] = saved
                return value

            result = minimize(objective, x0, method="Powell", options={"xtol": 1e-12, "ftol": 1e-15})
            if result.fun < objective(x0):
                pair = list(path.w[i])
                for k, s in enumerate(slots):
                    pair[s] = np.asarray(result.x[k * dim:(k + 1) * dim], dtype=float)
                path.w[i] = tuple(pair)
            iterations += 1
        energy = path.energy(vectors, cs)[0]
        residual = before - energy
        if residual < tol:
            converged = True
            break
    return energy, float(max(residual, 0.0)), iterations, converged


def truncated_geodesic(x: ModelPoint, y: ModelPoint, family: HoroballFamily, tol=SOLVER_TOL,
                       max_iter=SOLVER_MAX_ITER, max_reseeds=MAX_RESEEDS) -> TruncatedGeodesic:
    """Locally shortest path from x to y avoiding the open horoballs of the family"""
    xs = to_hyperboloid(x.validate())
    ys = to_hyperboloid(y.validate())
    for point in (xs, ys):
        if family.contains(point):
            raise InsideHoroball(f"point {tuple(point)} lies inside an open horoball")
    length = hyperboloid_distance(xs, ys)
    vectors, cs = family.arrays()
    if len(cs) == 0 or length < 1e-15:
        return TruncatedGeodesic((HyperbolicArc(tuple(xs), tuple(ys)),), length)

    crossing = np.flatnonzero(_penetration(xs, ys, vectors, cs) > ON_HOROSPHERE)
    if not len(crossing):
        return TruncatedGeodesic((HyperbolicArc(tuple(xs), tuple(ys)),), length)

    # Order by where the naive geodesic comes closest to each base
    order = []
    for i in crossing:
        s_in, s_out, _ = _crossing_params(xs, ys, vectors[i], cs[i])
        order.append(((s_in + s_out) / 2.0, int(i)))
    path = _Path(xs, ys, family, [i for _, i in sorted(order)])
    for i in path.sequence:
        path.seed_between(i, xs, ys)
    path.snap_endpoints()

    seed_total = path.energy(vectors, cs)[1]
    relevant = _relevant(family, xs, ys, seed_total / 2.0)
    local_vectors, local_cs = vectors[relevant], cs[relevant]

    reseeds = 0
    while True:
        _, residual, iterations, converged = _optimize(path, local_vectors, local_cs, tol, max_iter)
        corners = path.points()
        changed = False
        # Horoballs the path only touches are not obstacles
        for i in list(path.sequence):
            entry, leave = path.w[i]
            if np.linalg.norm(np.subtract(leave, entry)) / family.horoballs[i].level < 1e-9 and \
                    (i, 0) not in path.fixed and (i, 1) not in path.fixed:
                path.sequence.remove(i)
                changed = True
        if not changed:
            for k in range(0, len(corners), 2):
                depth = _penetration(corners[k], corners[k + 1], local_vectors, local_cs)
                for j in np.flatnonzero(depth > 1e-8):
                    index = int(relevant[j])
                    if index in path.sequence:
                        continue
                    path.sequence.insert(k // 2, index)
                    path.seed_between(index, corners[k], corners[k + 1])
                    changed = True
                    break
                if changed:
                    break
        if not changed or reseeds >= max_reseeds:
            break
        reseeds += 1
        LOGGER.debug("re-seeding crossing sequence (%d)", reseeds)
        if not path.sequence:
            return TruncatedGeodesic((HyperbolicArc(tuple(xs), tuple(ys)),), length, True, 0.0, reseeds)

    _, total, pen = path.energy(local_vectors, local_cs)
    arcs = _assemble(path)
    result = TruncatedGeodesic(tuple(arcs), float(sum(a.length for a in arcs)), converged, residual, reseeds)
    if pen > 1e-8 or not converged:
        LOGGER.warning("geodesic solver stopped with penetration %.3g, residual %.3g", pen, residual)
        raise ConvergenceFailure("truncated geodesic did not converge", best=result, residual=max(pen, residual))
    return result


def _assemble(path):
    corners = path.points()
    arcs = []
    for k in range(0, len(corners) - 1):
        if k % 2 == 0:
            u, v = corners[k], corners[k + 1]
            if hyperboloid_distance(u, v) > 1e-12:
                arcs.append(HyperbolicArc(tuple(u), tuple(v)))
        else:
            i = path.sequence[k // 2]
            entry, leave = path.w[i]
            arcs.append(HorosphericalArc(i, path.family.horoballs[i].level, tuple(np.atleast_1d(entry)),
                                         tuple(np.atleast_1d(leave)), path.chart(i)))
    return arcs


def truncated_distance(x: ModelPoint, y: ModelPoint, family: HoroballFamily, **kwargs) -> float:
    return truncated_geodesic(x, y, family, **kwargs).total_length


def _as_point(x):
    return ModelPoint(Model.HYPERBOLOID, tuple(float(c) for c in x))


@dataclass(frozen=True)
class Cat0Report:
    excess: float
    residual: float
    pairs: int
    side_lengths: Tuple[float, float, float]
    pure_hyperbolic: bool

    @property
    def passed(self):
        return self.excess <= 1e-6 + self.residual

    @property
    def strictly_negative(self):
        """Negative curvature shows: excess < 0, with a margin once the triangle is not tiny"""
        if min(self.side_lengths) >= STRICT_MIN_SIDE:
            return self.excess <= -STRICT_MARGIN
        return self.excess < 0.0

    def to_json(self):
        data = {"max_excess": self.excess, "residual": self.residual, "pairs": self.pairs,
                "side_lengths": list(self.side_lengths), "pure_hyperbolic": self.pure_hyperbolic,
                "passed": self.passed}
        if self.pure_hyperbolic:
            data["strictly_negative"] = self.strictly_negative
        return data


def _comparison_triangle(a, b, c):
    """Euclidean vertices for side lengths |xy| = a, |yz| = b, |zx| = c"""
    px = np.zeros(2)
    py = np.array([a, 0.0])
    if a <= 0.0:
        return px, py, np.array([c, 0.0])
    u = (a * a + c * c - b * b) / (2.0 * a)
    v = np.sqrt(max(c * c - u * u, 0.0))
    return px, py, np.array([u, v])


def _sides_through(side, fraction):
    """Sides of the triangle containing the point at `fraction` along `side`"""
    if fraction <= 0.0:
        return {side, (side - 1) % 3}
    if fraction >= 1.0:
        return {side, (side + 1) % 3}
    return {side}


def cat0_check(x: ModelPoint, y: ModelPoint, z: ModelPoint, family: HoroballFamily,
               fractions=(1.0 / 3.0, 2.0 / 3.0), **kwargs) -> Cat0Report:
    """Largest d_X(p, q) - d_E(p', q') over points on two sides of a geodesic triangle"""
    sides = [truncated_geodesic(x, y, family, **kwargs), truncated_geodesic(y, z, family, **kwargs),
             truncated_geodesic(z, x, family, **kwargs)]
    lengths = tuple(s.total_length for s in sides)
    vertices = _comparison_triangle(*lengths)
    flat_sides = [(vertices[0], vertices[1]), (vertices[1], vertices[2]), (vertices[2], vertices[0])]
    residual = sum(s.residual for s in sides)
    worst, pairs = -np.inf, 0
    samples = [0.0] + list(fractions) + [1.0]
    for i in range(3):
        for j in range(i + 1, 3):
            for s in samples:
                for t in samples:
                    # Points on a common side compare trivially
                    if _sides_through(i, s) & _sides_through(j, t):
                        continue
                    p = sides[i].point_at(s)
                    q = sides[j].point_at(t)
                    path = truncated_geodesic(_as_point(p), _as_point(q), family, **kwargs)
                    residual = max(residual, path.residual)
                    flat_p = (1.0 - s) * flat_sides[i][0] + s * flat_sides[i][1]
                    flat_q = (1.0 - t) * flat_sides[j][0] + t * flat_sides[j][1]
                    worst = max(worst, path.total_length - float(np.linalg.norm(flat_p - flat_q)))
                    pairs += 1
    pure = all(len(s.arcs) == 1 and isinstance(s.arcs[0], HyperbolicArc) for s in sides)
    return Cat0Report(float(worst), float(residual), pairs, lengths, pure)


@dataclass(frozen=True)
class Cat0Suite:
    reports: Tuple[Cat0Report, ...]
    seed: int

    @property
    def max_excess(self):
        return max((r.excess for r in self.reports), default=-np.inf)

    @property
    def pure_max_excess(self):
        return max((r.excess for r in self.reports if r.pure_hyperbolic), default=None)

    @property
    def pure_failures(self):
        """Pure hyperbolic triangles whose excess is not strictly negative"""
        return sum(1 for r in self.reports if r.pure_hyperbolic and not r.strictly_negative)

    @property
    def passed(self):
        return all(r.passed for r in self.reports) and self.pure_failures == 0

    def to_json(self):
        return {"seed": self.seed, "triangles": len(self.reports), "max_excess": self.max_excess,
                "max_residual": max((r.residual for r in self.reports), default=0.0),
                "pure_hyperbolic_max_excess": self.pure_max_excess, "pure_hyperbolic_failures": self.pure_failures,
                "passed": self.passed, "excess": [r.excess for r in self.reports]}


def random_outside_point(center, radius, family, rng, attempts=1000):
    """Point within `radius` of center, outside every closed horoball"""
    center = to_hyperboloid(center) if isinstance(center, ModelPoint) else np.asarray(center, dtype=float)
    boost = boost_from_origin(center)
    n = len(center) - 1
    for _ in range(attempts):
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        r = radius * rng.random()
        point = boost @ np.concatenate([[np.cosh(r)], np.sinh(r) * direction])
        if not family.contains(point, closed=True):
            return _as_point(point)
    raise InsideHoroball("could not sample a point outside the horoballs")


def _check_triangle(vertices, family, options):
    return cat0_check(*vertices, family, **options)


def cat0_suite(family: HoroballFamily, center, samples, seed, radius=4.0, jobs=1, **kwargs) -> Cat0Suite:
    """Seeded random triangles near `center`; every report must pass

    Triangles are drawn up front, so the reports do not depend on `jobs`.
    """
    rng = np.random.default_rng(seed)
    triangles = [tuple(random_outside_point(center, radius, family, rng) for _ in range(3)) for _ in range(samples)]
    check = partial(_check_triangle, family=family, options=kwargs)
    if jobs > 1 and len(triangles) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(check, triangles))
    else:
        reports = [check(t) for t in triangles]
    suite = Cat0Suite(tuple(reports), seed)
    LOGGER.info("CAT(0) suite: %d triangles on %d job(s), max excess %.3g", samples, jobs, suite.max_excess)
    return suite


@dataclass(frozen=True)
class CompactnessReport:
    suprema: Tuple[float, ...]
    bounded_at_scale: bool
    threshold: float
    samples: int

    @property
    def unbounded(self):
        return max(self.suprema) >= self.threshold

    def to_json(self):
        return {"suprema": list(self.suprema), "bounded_at_scale": self.bounded_at_scale,
                "unbounded": self.unbounded, "threshold": self.threshold, "samples": self.samples,
                "note": "sampled witness, not a proof"}


def _ray_window(a, b, lo, hi):
    """Restrict [lo, hi] to {t : a cosh t + b sinh t >= 0}"""
    if abs(a + b) <= 1e-12 * max(abs(a), abs(b), 1e-300):
        # Asymptotic to the constraint at infinity
        return (lo, hi) if a >= 0 else (hi, lo)
    root = None
    if b != 0 and abs(a / b) < 1.0:
        root = float(np.arctanh(-a / b))
    if a >= 0:
        if root is not None and root >= 0 and b < 0:
            hi = min(hi, root)
    else:
        if root is not None and b > 0:
            lo = max(lo, root)
        else:
            return hi, lo
    return lo, hi


def _horoball_window(alpha, beta, c):
    """Open t-interval where alpha cosh t + beta sinh t < c, or None"""
    disc = c * c - (alpha * alpha - beta * beta)
    if disc <= 0:
        return None
    if alpha + beta > 1e-300:
        t1 = np.log(max((c - np.sqrt(disc)) / (alpha + beta), 1e-300))
        t2 = np.log((c + np.sqrt(disc)) / (alpha + beta))
        return t1, t2
    return np.log((alpha - beta) / (2.0 * c)), np.inf


class _RadialProfile:
    """Farthest point of domain cap hull minus horoballs along each ray from xi"""

    def __init__(self, domain, hull, family):
        self.frame = frame_for(domain.form)
        self.xi = to_hyperboloid(domain.basepoint)
        self.boost = boost_from_origin(self.xi)
        rows = [np.array([float(c) for c in b.functional]) @ self.frame.P for b in domain.bisectors]
        if hull is not None and hull.functionals() is not None:
            rows += list(hull.functionals())
        self.rows = np.array(rows).reshape(-1, len(self.xi))
        self.vectors, self.cs = family.arrays() if family is not None else (np.zeros((0, 0)), np.zeros(0))

    def tangent(self, d):
        d = np.asarray(d, dtype=float)
        return self.boost @ np.concatenate([[0.0], d / np.linalg.norm(d)])

    def reach(self, d):
        u = self.tangent(d)
        lo, hi = 0.0, RAY_LIMIT
        for row in self.rows:
            lo, hi = _ray_window(float(row @ self.xi), float(row @ u), lo, hi)
            if lo > hi:
                return None
        candidate = hi
        if len(self.cs):
            alphas = minkowski(self.vectors, self.xi)
            betas = minkowski(self.vectors, u)
            windows = [w for w in (_horoball_window(a, b, c) for a, b, c in zip(alphas, betas, self.cs)) if w]
            moved = True
            while moved:
                moved = False
                for t1, t2 in windows:
                    if t1 < candidate < t2 or (t2 == np.inf and candidate > t1):
                        candidate = t1
                        moved = True
        return candidate if candidate >= lo else None

    def direction_to(self, null):
        """Unit direction at xi of the ray toward a boundary null vector"""
        u = null / minkowski(null, self.xi) - self.xi
        local = np.linalg.solve(self.boost, u)
        return local[1:]


def compactness_check(domain: DirichletDomain, hull: Optional[LimitHull], family: Optional[HoroballFamily],
                      cusps: Sequence[CuspOrbit] = (), refinements=(32, 64, 128),
                      threshold=UNBOUNDED_DISTANCE, stability=1e-2) -> CompactnessReport:
    """Supremum of dist(xi, .) over the domain inside the hull with the horoballs removed

    Every point of the region lies on a geodesic ray from xi, so the
    region is sampled radially: each ray is clipped exactly against the
    facets, the hull and the horoballs. Cusp directions are always
    included and the best rays are refined locally.
    """
    profile = _RadialProfile(domain, hull, family)
    frame = profile.frame
    n = domain.form.n
    cusp_dirs = []
    for cusp in cusps:
        for member in cusp.members:
            cusp_dirs.append(profile.direction_to(frame.to_frame(member.exact)))

    def reach(d):
        value = profile.reach(d)
        return -1.0 if value is None else value

    suprema, total = [], 0
    for count in refinements:
        dirs = list(unit_directions(n, count)) + cusp_dirs
        values = [reach(d) for d in dirs]
        total += len(dirs)
        best = float(max(values))
        for k in np.argsort(values)[-3:]:
            result = minimize(lambda d: -reach(d), np.asarray(dirs[k], dtype=float), method="Nelder-Mead",
                              options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 2000})
            best = max(best, float(-result.fun))
        suprema.append(best)
    bounded = max(suprema) < threshold
    if len(suprema) > 1:
        bounded = bounded and abs(suprema[-1] - suprema[-2]) <= stability
    if not bounded:
        LOGGER.warning("compactness check: suprema %s", ["%.4g" % s for s in suprema])
    return CompactnessReport(tuple(suprema), bool(bounded), float(threshold), total)
