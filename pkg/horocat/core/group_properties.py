"""
Group-theoretic properties of lattice isometry groups at desk scale
Tits alternative verdicts with ping-pong certificates, finite subgroups up
to conjugacy, torsion closures, word-length distortion and translation
length additivity. Every verdict is a claim about the enumerated word ball
and carries its radius.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .discrete_groups import ANGULAR_TOL, GeneratedGroup, boundary_stabilizer, parse_word
from .errors import BudgetExceeded, NotFixed, NotLoxodromic
from .forms import FormIsometry
from .isometries import (IsometryKind, axis_points, char_poly, classify, displacement, dominant_real_root, frame_for,
                         maybe_not_loxodromic, min_displacement, power_charpoly, spectral_radius_estimate)
from .models import BoundaryPoint, hyperboloid_distance, to_hyperboloid, unit_directions

LOGGER = logging.getLogger(__name__)

PING_PONG_SAMPLES = 1000
PING_PONG_POWER = 3
SOUNDNESS_WORDS = 200
SOUNDNESS_LENGTH = 8
CLOSURE_CAP = 512
# Only this many leading ball elements are classified when searching for loxodromics
LOXODROMIC_SEARCH = 400


class TitsKind(Enum):
    VIRTUALLY_ABELIAN = "virtually_abelian"
    CONTAINS_FREE_GROUP = "contains_free_group"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class PingPongCertificate:
    """Two pairs of disjoint boundary caps played against each other

    g^power maps the complement of the cap at its repelling point into the
    cap at its attracting point, and likewise for h^power and the inverses;
    by the ping-pong lemma the two powers generate a free group.
    """
    words: Tuple[str, str]
    power: int
    centres: Tuple[Tuple[float, ...], ...]
    aperture: float
    least_aperture: float
    samples: int
    words_checked: int

    def to_json(self):
        return {"words": list(self.words), "power": self.power, "aperture": self.aperture,
                "least_aperture": self.least_aperture, "cap_centres": [list(c) for c in self.centres],
                "samples": self.samples, "reduced_words_checked": self.words_checked}


@dataclass(frozen=True)
class TitsVerdict:
    kind: TitsKind
    radius: int
    rank: Optional[int] = None
    witnesses: Tuple[str, ...] = ()
    certificate: Optional[PingPongCertificate] = None
    reason: Optional[str] = None

    def to_json(self):
        data = {"verdict": self.kind.value, "radius": self.radius}
        if self.rank is not None:
            data["rank"] = self.rank
        if self.witnesses:
            data["witnesses"] = list(self.witnesses)
        if self.certificate is not None:
            data["certificate"] = self.certificate.to_json()
        if self.reason:
            data["reason"] = self.reason
        return data


def _boundary_image(m, directions):
    """Action of a standard-coordinate matrix on unit vectors of the sphere at infinity"""
    null = np.column_stack([np.ones(len(directions)), directions])
    image = null @ m.T
    spatial = image[:, 1:]
    return spatial / np.linalg.norm(spatial, axis=1, keepdims=True)


def _angles(directions, centre):
    return np.arccos(np.clip(directions @ centre, -1.0, 1.0))


def _cap_boundary(centre, aperture, count=64):
    """Points of the sphere at angle `aperture` from centre"""
    n = len(centre)
    if n == 1:
        return np.array([centre])
    basis = np.linalg.svd(centre.reshape(1, -1))[2][1:]
    around = unit_directions(n - 1, count) @ basis
    return np.cos(aperture) * centre + np.sin(aperture) * around


def _ping_pong_holds(matrices, centres, aperture, samples):
    """Check the four cap inclusions on samples outside the repelling caps

    matrices are (g, g^-1, h, h^-1); centres are (g+, g-, h+, h-), the
    attracting and repelling fixed points of g and h.
    """
    for m, target, source in zip(matrices, (0, 1, 2, 3), (1, 0, 3, 2)):
        outside = samples[_angles(samples, centres[source]) > aperture]
        points = np.vstack([outside, _cap_boundary(centres[source], aperture)])
        if np.any(_angles(_boundary_image(m, points), centres[target]) >= aperture):
            return False
    return True


def _reduced_words(rng, count, length):
    letters = "abAB"
    inverse = {"a": "A", "A": "a", "b": "B", "B": "b"}
    words = []
    for _ in range(count):
        size = int(rng.integers(1, length + 1))
        word = [str(rng.choice(list(letters)))]
        while len(word) < size:
            choice = str(rng.choice(list(letters)))
            if choice != inverse[word[-1]]:
                word.append(choice)
        words.append("".join(word))
    return words


def ping_pong_certificate(g: FormIsometry, h: FormIsometry, max_power=PING_PONG_POWER, samples=PING_PONG_SAMPLES,
                          seed=0) -> Optional[PingPongCertificate]:
    """Ping-pong caps for powers of two loxodromics with disjoint fixed pairs, or None"""
    cg, ch = classify(g), classify(h)
    if cg.kind is not IsometryKind.LOXODROMIC or ch.kind is not IsometryKind.LOXODROMIC:
        raise NotLoxodromic("ping-pong needs two loxodromic elements")
    centres = [p.direction for p in cg.fixed_boundary + ch.fixed_boundary]
    gaps = [float(np.arccos(np.clip(np.dot(a, b), -1.0, 1.0)))
            for i, a in enumerate(centres) for b in centres[i + 1:]]
    if min(gaps) <= ANGULAR_TOL:
        LOGGER.debug("fixed pairs of %r and %r meet", g.word, h.word)
        return None
    widest = min(gaps) / 2.0 * (1.0 - 1e-6)

    rng = np.random.default_rng(seed)
    n = g.form.n
    sample = rng.normal(size=(samples, n))
    sample /= np.linalg.norm(sample, axis=1, keepdims=True)
    sample = np.vstack([sample] + [c.reshape(1, -1) for c in centres])

    frame = frame_for(g.form)
    for power in range(1, max_power + 1):
        gp, hp = g ** power, h ** power
        matrices = [frame.matrix(x) for x in (gp, gp.inverse(), hp, hp.inverse())]
        if not _ping_pong_holds(matrices, centres, widest, sample):
            continue
        lo, hi = 0.0, widest
        for _ in range(60):
            mid = (lo + hi) / 2.0
            if _ping_pong_holds(matrices, centres, mid, sample):
                hi = mid
            else:
                lo = mid
        aperture = (hi + widest) / 2.0
        if not _ping_pong_holds(matrices, centres, aperture, sample):
            aperture = widest

        # Reduced words in the certified pair must be nontrivial
        pair = {"a": gp, "A": gp.inverse(), "b": hp, "B": hp.inverse()}
        checked = 0
        for word in _reduced_words(rng, SOUNDNESS_WORDS, SOUNDNESS_LENGTH):
            result = FormIsometry.identity(g.form)
            for letter in word:
                result = result @ pair[letter]
            if result.is_identity:
                LOGGER.warning("reduced word %s is trivial despite ping-pong caps", word)
                return None
            checked += 1
        return PingPongCertificate((g.word, h.word), power, tuple(tuple(float(v) for v in c) for c in centres),
                                   float(aperture), float(hi), len(sample), checked)
    return None


def _commutator_is_torsion(a: FormIsometry, b: FormIsometry):
    c = a @ b @ a.inverse() @ b.inverse()
    if c.is_identity:
        return True
    return maybe_not_loxodromic(c) and classify(c).kind is IsometryKind.ELLIPTIC


def _same_points(points: Sequence[BoundaryPoint], others: Sequence[BoundaryPoint]):
    return all(min(p.angle_to(q) for q in others) < ANGULAR_TOL for p in points)


def _ball_stopped(group, radius):
    """True when the ball stopped growing before radius, so the group is finite"""
    try:
        return radius > 0 and not group.layer(radius)
    except BudgetExceeded:
        return False


def tits_classify(group: GeneratedGroup, radius, max_power=PING_PONG_POWER, seed=0) -> TitsVerdict:
    """Free subgroup certificate or virtually abelian witness, at word radius `radius`"""
    if group.form.n == 1:
        # O(1, 1): every element preserves the single geodesic
        infinite = [g.word for g in group.generators if dominant_real_root(char_poly(g)) is not None]
        return TitsVerdict(TitsKind.VIRTUALLY_ABELIAN, radius, 1 if infinite else 0, tuple(infinite[:1]))
    try:
        elements = group.word_ball(radius)
    except BudgetExceeded as exc:
        LOGGER.warning("Tits classification hit the element budget")
        elements = exc.partial or []
    finite = _ball_stopped(group, radius)

    loxodromics = []
    for g in elements[1:LOXODROMIC_SEARCH]:
        if spectral_radius_estimate(g) > 1.0 + 1e-3:
            c = classify(g)
            if c.kind is IsometryKind.LOXODROMIC:
                loxodromics.append(c)

    for i, a in enumerate(loxodromics):
        for b in loxodromics[i + 1:]:
            if any(p.angle_to(q) < ANGULAR_TOL for p in a.fixed_boundary for q in b.fixed_boundary):
                continue
            certificate = ping_pong_certificate(a.base, b.base, max_power, seed=seed)
            if certificate is not None:
                LOGGER.info("ping-pong certified for %r, %r at power %d", a.base.word, b.base.word,
                            certificate.power)
                return TitsVerdict(TitsKind.CONTAINS_FREE_GROUP, radius, witnesses=certificate.words,
                                   certificate=certificate)

    commuting = all(_commutator_is_torsion(a, b) for i, a in enumerate(group.generators)
                    for b in group.generators[i + 1:])
    if not commuting:
        reason = "generators do not commute up to torsion and no ping-pong pair was found"
        LOGGER.warning("Tits classification inconclusive: %s", reason)
        return TitsVerdict(TitsKind.INCONCLUSIVE, radius, reason=reason)

    if loxodromics:
        axis = loxodromics[0].fixed_boundary
        if all(_same_points(c.fixed_boundary, axis) for c in loxodromics):
            return TitsVerdict(TitsKind.VIRTUALLY_ABELIAN, radius, 1, (loxodromics[0].base.word,))
        reason = "loxodromics with distinct axes but no certified ping-pong pair"
        LOGGER.warning("Tits classification inconclusive: %s", reason)
        return TitsVerdict(TitsKind.INCONCLUSIVE, radius, reason=reason)

    parabolics = [classify(g) for g in elements[1:LOXODROMIC_SEARCH] if maybe_not_loxodromic(g)]
    parabolics = [c for c in parabolics if c.kind is IsometryKind.PARABOLIC]
    if parabolics:
        point = parabolics[0].fixed_boundary[0]
        if all(_same_points(c.fixed_boundary, (point,)) for c in parabolics):
            try:
                stabilizer = boundary_stabilizer(group, point, min(radius, 4))
            except NotFixed:
                stabilizer = None
            rank = stabilizer.bieberbach_rank if stabilizer is not None else 1
            return TitsVerdict(TitsKind.VIRTUALLY_ABELIAN, radius, rank,
                               tuple(g.word for g in stabilizer.parabolics[:rank]) if stabilizer else ())
        return TitsVerdict(TitsKind.INCONCLUSIVE, radius, reason="parabolics with distinct fixed points")

    if finite:
        return TitsVerdict(TitsKind.VIRTUALLY_ABELIAN, radius, 0)
    return TitsVerdict(TitsKind.INCONCLUSIVE, radius, reason="only elliptic elements seen but the ball keeps growing")


def _closure(generators: Sequence[FormIsometry], cap=CLOSURE_CAP):
    """(elements, status) of the subgroup generated, status finite / non_torsion / escaped"""
    if not generators:
        return {}, "finite"
    identity = FormIsometry.identity(generators[0].form)
    elements: Dict[tuple, FormIsometry] = {identity.key: identity}
    frontier = [identity]
    while frontier:
        new = []
        for x in frontier:
            for s in generators:
                y = x @ s
                if y.key in elements:
                    continue
                if not maybe_not_loxodromic(y) or classify(y).kind is not IsometryKind.ELLIPTIC:
                    return elements, "non_torsion"
                elements[y.key] = y
                new.append(y)
                if len(elements) > cap:
                    return elements, "escaped"
        frontier = new
    return elements, "finite"


@dataclass(frozen=True)
class CensusClass:
    class_id: int
    order: int
    generators: Tuple[str, ...]
    conjugates_seen: int

    def to_json(self):
        return {"class": self.class_id, "order": self.order, "generators": list(self.generators),
                "conjugates_seen": self.conjugates_seen}


@dataclass(frozen=True)
class SubgroupCensus:
    classes: Tuple[CensusClass, ...]
    radius: int

    @property
    def bound(self):
        return max(c.order for c in self.classes)

    @property
    def orders(self):
        return sorted({c.order for c in self.classes})

    def to_json(self):
        return {"radius": self.radius, "class_count": len(self.classes), "max_order": self.bound,
                "orders": self.orders, "classes": [c.to_json() for c in self.classes]}


def torsion_elements(group: GeneratedGroup, radius) -> List[FormIsometry]:
    """Nontrivial finite-order ball elements, exactly classified"""
    return [g for g in group.word_ball(radius)[1:]
            if maybe_not_loxodromic(g) and classify(g).kind is IsometryKind.ELLIPTIC]


def finite_subgroup_census(group: GeneratedGroup, radius) -> SubgroupCensus:
    """Finite subgroups generated by ball torsion, up to conjugation by ball elements"""
    elements = group.word_ball(radius)
    torsion = torsion_elements(group, radius)

    subgroups: Dict[FrozenSet[tuple], Tuple[str, ...]] = {}
    cyclic = []
    for g in torsion:
        members, status = _closure([g])
        key = frozenset(members)
        if status == "finite" and key not in subgroups:
            subgroups[key] = (g.word,)
            cyclic.append((key, g))
    # Pairs of cyclic subgroups that generate a finite group
    for i, (key_a, a) in enumerate(cyclic):
        for key_b, b in cyclic[i + 1:]:
            if key_b <= key_a or key_a <= key_b:
                continue
            members, status = _closure([a, b])
            key = frozenset(members)
            if status == "finite" and key not in subgroups:
                subgroups[key] = (a.word, b.word)

    identity = elements[0]
    classes: List[CensusClass] = [CensusClass(0, 1, (), 1)]
    seen = {frozenset([identity.key]): 0}
    inverses = [g.inverse() for g in elements]
    for key, gens in sorted(subgroups.items(), key=lambda item: (len(item[0]), item[1])):
        if key in seen:
            continue
        members = [group.lookup(FormIsometry(k, group.form)) or FormIsometry(k, group.form) for k in key]
        class_id = len(classes)
        orbit = set()
        for g, g_inv in zip(elements, inverses):
            orbit.add(frozenset((g @ m @ g_inv).key for m in members))
        for conjugate in orbit:
            seen.setdefault(conjugate, class_id)
        classes.append(CensusClass(class_id, len(key), gens, len(orbit)))
    census = SubgroupCensus(tuple(classes), radius)
    LOGGER.info("census at radius %d: %d classes, orders %s", radius, len(classes), census.orders)
    return census


@dataclass(frozen=True)
class BurnsideReport:
    trials: int
    closure_sizes: Tuple[int, ...]
    non_torsion: int
    escapes: Tuple[Tuple[str, ...], ...]
    seed: int

    @property
    def passed(self):
        return not self.escapes

    def to_json(self):
        return {"trials": self.trials, "closure_sizes": list(self.closure_sizes), "non_torsion": self.non_torsion,
                "escapes": [list(e) for e in self.escapes], "seed": self.seed, "passed": self.passed}


def burnside_check(group: GeneratedGroup, radius, trials, seed=0, subset_size=2, cap=CLOSURE_CAP) -> BurnsideReport:
    """Random subsets of ball torsion must close up to finite subgroups

    A subset whose closure meets an element of infinite order does not
    generate a torsion group and is only counted. A closure that keeps
    growing with every element of finite order is a counterexample candidate.
    """
    torsion = torsion_elements(group, radius)
    rng = np.random.default_rng(seed)
    sizes, escapes, non_torsion = [], [], 0
    if not torsion:
        return BurnsideReport(0, (), 0, (), seed)
    for _ in range(trials):
        size = min(len(torsion), int(rng.integers(1, subset_size + 1)))
        picks = rng.choice(len(torsion), size=size, replace=False)
        subset = [torsion[int(i)] for i in sorted(picks)]
        members, status = _closure(subset, cap)
        if status == "finite":
            sizes.append(len(members))
        elif status == "non_torsion":
            non_torsion += 1
        else:
            LOGGER.warning("torsion closure of %s escaped %d elements", [g.word for g in subset], cap)
            escapes.append(tuple(g.word for g in subset))
    return BurnsideReport(trials, tuple(sizes), non_torsion, tuple(escapes), seed)


def reduce_word(word, presentation="free"):
    """Freely reduce a letter word; for universal Coxeter words a letter is its own inverse"""
    out: List[str] = []
    for ch in word:
        if ch.isspace():
            continue
        if out and (out[-1] == ch.lower() if presentation == "coxeter" else out[-1] == ch.swapcase()):
            out.pop()
        else:
            out.append(ch.lower() if presentation == "coxeter" else ch)
    return "".join(out)


@dataclass(frozen=True)
class DistortionProfile:
    word: str
    rows: Tuple[Tuple[int, int, float], ...]
    lower_bound: float
    infinite_order: bool
    partial: bool = False

    @property
    def min_ratio(self):
        return min((r for _, _, r in self.rows), default=0.0)

    @property
    def undistorted(self):
        return self.infinite_order and self.min_ratio >= self.lower_bound - 1e-9 and self.min_ratio > 0

    def to_json(self):
        return {"word": self.word, "lower_bound": self.lower_bound, "infinite_order": self.infinite_order,
                "partial": self.partial, "min_ratio": self.min_ratio,
                "profile": [{"n": n, "length": length, "ratio": ratio} for n, length, ratio in self.rows]}


def generator_displacement(group: GeneratedGroup, x=None):
    """mu = max over generators s of dist(x, s x)"""
    frame = group.frame
    point = to_hyperboloid(frame.point(group.form.witness)) if x is None else x
    return max(hyperboloid_distance(frame.matrix(s) @ point, point) for s in group.generators)


def distortion_profile(group: GeneratedGroup, word: str, upto, radius_cap=12) -> DistortionProfile:
    """(n, |g^n|, |g^n| / n) for n = 1..upto, with the lower bound |g| / mu"""
    g = group.element(word)
    c = classify(g)
    infinite = not (c.kind is IsometryKind.ELLIPTIC)
    mu = generator_displacement(group)
    bound = (c.spectral_radius.log / mu) if c.kind is IsometryKind.LOXODROMIC and mu > 0 else 0.0

    rows = []
    if group.presentation in ("free", "coxeter"):
        parse_word(word, group.rank)
    power = FormIsometry.identity(group.form)
    for n in range(1, upto + 1):
        power = power @ g
        if group.presentation in ("free", "coxeter"):
            length = len(reduce_word(word * n, group.presentation))
        else:
            length = None
            radius = 1
            while length is None:
                try:
                    group.word_ball(radius)
                except BudgetExceeded:
                    LOGGER.warning("distortion profile of %r stopped at n = %d", word, n)
                    return DistortionProfile(word, tuple(rows), bound, infinite, partial=True)
                found = group.lookup(power)
                if found is not None:
                    length = len(found.word)
                elif radius >= radius_cap:
                    return DistortionProfile(word, tuple(rows), bound, infinite, partial=True)
                else:
                    radius += 1
        rows.append((n, length, length / n))
    return DistortionProfile(word, tuple(rows), float(bound), infinite)


@dataclass(frozen=True)
class AdditivityRow:
    n: int
    scaled_log: float
    power_log: float
    exact: bool
    axis_displacement: float
    min_displacement: Optional[float] = None

    def to_json(self):
        data = {"n": self.n, "n_log_lambda": self.scaled_log, "log_lambda_power": self.power_log,
                "exact_charpoly_identity": self.exact, "axis_displacement": self.axis_displacement}
        if self.min_displacement is not None:
            data["min_displacement"] = self.min_displacement
        return data


@dataclass(frozen=True)
class AdditivityReport:
    word: str
    log_lambda: float
    rows: Tuple[AdditivityRow, ...]
    tolerance: float = 1e-6

    def mismatches(self) -> List[int]:
        """Powers n whose charpoly or measured displacement disagrees with n log lambda"""
        bad = []
        for row in self.rows:
            if not row.exact or abs(row.scaled_log - row.power_log) > 1e-10 * max(1.0, row.scaled_log):
                bad.append(row.n)
            elif abs(row.axis_displacement - row.scaled_log) > self.tolerance * max(1.0, row.scaled_log):
                bad.append(row.n)
            elif row.min_displacement is not None and abs(row.min_displacement - row.scaled_log) > self.tolerance:
                bad.append(row.n)
        return bad

    @property
    def passed(self):
        return not self.mismatches()

    def to_json(self):
        return {"word": self.word, "log_lambda": self.log_lambda, "passed": self.passed,
                "mismatches": self.mismatches(), "rows": [r.to_json() for r in self.rows]}


def translation_additivity_check(g: FormIsometry, upto, displacement_upto=2, tolerance=1e-6) -> AdditivityReport:
    """n log lambda(g) = log lambda(g^n), through the characteristic polynomials and numerically

    Every power is displaced along the axis of g and compared with n log lambda;
    the Nelder-Mead infimum is added for n <= displacement_upto.
    """
    c = classify(g)
    if c.kind is not IsometryKind.LOXODROMIC:
        raise NotLoxodromic(f"element {g.word!r} is {c.kind.value}")
    log_lambda = c.spectral_radius.log
    on_axis = axis_points(c, 0.0)
    rows = []
    for n in range(1, upto + 1):
        predicted = power_charpoly(c.charpoly, n)
        power = g ** n
        actual = char_poly(power)
        exact = predicted.all_coeffs() == actual.all_coeffs()
        radius = dominant_real_root(predicted)
        displaced = min_displacement(power) if n <= displacement_upto else None
        rows.append(AdditivityRow(n, n * log_lambda, radius.log if radius is not None else 0.0, exact,
                                  displacement(power, on_axis), displaced))
    report = AdditivityReport(g.word, log_lambda, tuple(rows), tolerance)
    if not report.passed:
        LOGGER.warning("translation length of %r not additive at n = %s", g.word, report.mismatches())
    return report
