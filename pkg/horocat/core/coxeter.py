"""
Universal Coxeter groups
The geometric representation of the free product of r copies of Z/2 with
every m_ij infinite: B = 2I - J, reflections s_i(v) = v - 2 B(e_i, v) e_i.
For r >= 3, B has one negative direction, so the form handed to the rest of
horocat is -B (signature (1, 0, r - 1)) with the all-ones vector as witness.
The fundamental chamber is D = {v : B(e_i, v) <= 0 for all i}, which for
-B reads (-B v)_i >= 0.
"""
import logging
import re
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .discrete_groups import GeneratedGroup
from .errors import BudgetExceeded, DegenerateForm, InvalidGenerator, NotAnIsometry
from .forms import FormIsometry, QuadraticForm, RationalCone, exact_vector
from .isometries import IsometryKind, classify

LOGGER = logging.getLogger(__name__)

# Bare digits are single generators; "s12" names generator 12
WORD_TOKEN = re.compile(r"\s*(?:s(\d+)|(\d)|([a-z]))\s*,?")


@dataclass(frozen=True)
class UniversalCoxeterRep:
    rank: int
    gram: Tuple[Tuple[int, ...], ...]
    form: QuadraticForm
    reflections: Tuple[FormIsometry, ...]

    @property
    def degenerate(self):
        return not self.form.is_hyperbolic

    @property
    def chamber(self) -> RationalCone:
        """Fundamental chamber D as a cone of the normalized form"""
        return RationalCone.from_functionals(self.form.gram)

    def group(self, **kwargs) -> GeneratedGroup:
        if self.degenerate:
            raise DegenerateForm(f"rank {self.rank} representation has signature {self.form.inertia}")
        return GeneratedGroup(self.form, self.reflections, name=f"coxeter{self.rank}",
                              presentation="coxeter", **kwargs)

    def to_json(self):
        return {"rank": self.rank, "gram": [list(r) for r in self.gram], "degenerate": self.degenerate,
                "signature": list(self.form.inertia), "negated": self.form.negated}


def build_rep(n) -> UniversalCoxeterRep:
    """Geometric representation of UC(n + 1)"""
    if n < 1:
        raise ValueError("N must be at least 1")
    r = n + 1
    gram = tuple(tuple(1 if i == j else -1 for j in range(r)) for i in range(r))
    witness = (1,) * r if r >= 3 else None
    form = QuadraticForm.from_gram(gram, witness=witness)
    reflections = []
    for i in range(r):
        # s_i = I - 2 e_i e_i^T B
        matrix = tuple(tuple(int(a == b) - (2 * gram[i][b] if a == i else 0) for b in range(r)) for a in range(r))
        if form.is_hyperbolic:
            reflections.append(FormIsometry.checked(matrix, form, str(i + 1)))
        else:
            reflections.append(FormIsometry(matrix, form, str(i + 1)))
    for s in reflections:
        if not (s @ s).is_identity:
            raise NotAnIsometry("reflection is not an involution")
    if not form.is_hyperbolic:
        LOGGER.info("rank %d representation is degenerate (signature %s)", r, form.inertia)
    return UniversalCoxeterRep(r, gram, form, tuple(reflections))


def parse_coxeter_word(word, rank) -> List[int]:
    """Generator indices for "1 2 3", "s1s2s3", "1,2" or "abc" """
    indices = []
    position = 0
    word = word.strip()
    while position < len(word):
        match = WORD_TOKEN.match(word, position)
        if match is None or match.end() == position:
            raise InvalidGenerator(f"cannot parse Coxeter word {word!r}")
        named, digit, letter = match.groups()
        if letter is not None:
            index = ord(letter) - ord("a")
        else:
            index = int(named if named is not None else digit) - 1
        if not 0 <= index < rank:
            raise InvalidGenerator(f"generator {match.group().strip()!r} out of range for rank {rank}")
        indices.append(index)
        position = match.end()
    return indices


def word_to_matrix(rep: UniversalCoxeterRep, word) -> FormIsometry:
    indices = parse_coxeter_word(word, rep.rank) if isinstance(word, str) else [int(i) - 1 for i in word]
    result = FormIsometry.identity(rep.form)
    for i in indices:
        if not 0 <= i < rep.rank:
            raise InvalidGenerator(f"generator {i + 1} out of range for rank {rep.rank}")
        result = result @ rep.reflections[i]
    return FormIsometry(result.matrix, rep.form, "".join(str(i + 1) for i in indices))


def reduced_words(rank, length):
    """Words with no immediate repetition, as index tuples of the given length"""
    if length == 0:
        return [()]
    words = []
    for first in range(rank):
        stack = [(first,)]
        while stack:
            w = stack.pop()
            if len(w) == length:
                words.append(w)
                continue
            stack.extend(w + (j,) for j in reversed(range(rank)) if j != w[-1])
    return sorted(words)


@dataclass(frozen=True)
class CoxeterStatistics:
    rank: int
    counts: Dict[int, Dict[str, int]]
    spectral_radii: Dict[str, float]

    def to_json(self):
        return {"rank": self.rank,
                "counts": {str(k): dict(v) for k, v in sorted(self.counts.items())},
                "spectral_radii": dict(self.spectral_radii)}


def classify_coxeter_words(rep: UniversalCoxeterRep, upto, cap=20000) -> CoxeterStatistics:
    """Classification counts of reduced words by length"""
    if rep.degenerate:
        raise DegenerateForm("classification needs a rank of at least 3")
    counts: Dict[int, Dict[str, int]] = {}
    radii = {}
    seen = 0
    for length in range(1, upto + 1):
        counter = Counter()
        for w in reduced_words(rep.rank, length):
            seen += 1
            if seen > cap:
                raise BudgetExceeded(f"more than {cap} reduced words", partial=counts)
            c = classify(word_to_matrix(rep, [i + 1 for i in w]))
            counter[c.kind.value] += 1
            if c.kind is IsometryKind.LOXODROMIC and len(set(w)) == len(w) == 3 and len(radii) < 16:
                radii[c.base.word] = c.spectral_radius.value
        counts[length] = dict(counter)
        LOGGER.debug("rank %d, length %d: %s", rep.rank, length, dict(counter))
    return CoxeterStatistics(rep.rank, counts, radii)


def in_chamber(rep: UniversalCoxeterRep, v, strict=False):
    values = [sum(a * b for a, b in zip(row, v)) for row in rep.form.gram]
    return all(x > 0 for x in values) if strict else all(x >= 0 for x in values)


@dataclass(frozen=True)
class TitsConeVerdict:
    found: bool
    word: Optional[str]
    radius: int

    def to_json(self):
        if self.found:
            return {"found": True, "word": self.word, "radius": self.radius}
        return {"found": False, "status": "not_found_at_radius", "radius": self.radius}


def tits_cone_membership(rep: UniversalCoxeterRep, v, radius) -> TitsConeVerdict:
    """Shortest ball element w with w^-1 v in the chamber

    Since w preserves G = -B, G w^-1 v = w^T G v and no inverse is needed.
    """
    group = rep.group()
    v = exact_vector(v)
    gram = rep.form.gram
    gv = [sum(a * b for a, b in zip(row, v)) for row in gram]
    for g in group.word_ball(radius):
        values = [sum(g.matrix[k][i] * gv[k] for k in range(rep.rank)) for i in range(rep.rank)]
        if all(x >= 0 for x in values):
            return TitsConeVerdict(True, "".join(str(ord(ch) - ord("a") + 1) for ch in g.word.lower()), radius)
    return TitsConeVerdict(False, None, radius)


def chamber_separation(rep: UniversalCoxeterRep, upto) -> Dict[str, int]:
    """For each nonempty reduced word w, a wall of D strictly violated by w applied to the witness

    A chamber image whose interior point lies strictly outside D has interior
    disjoint from D; -1 marks a word for which no wall separates.
    """
    witness = rep.form.witness
    walls = {}
    for length in range(1, upto + 1):
        for w in reduced_words(rep.rank, length):
            image = word_to_matrix(rep, [i + 1 for i in w]).apply(witness)
            values = [sum(a * b for a, b in zip(row, image)) for row in rep.form.gram]
            violated = [i for i, x in enumerate(values) if x < 0]
            walls["".join(str(i + 1) for i in w)] = violated[0] if violated else -1
    return walls


def wehler_dictionary(n):
    """Labels matching UC(n + 1) with the involutions of a Wehler n-fold

    A smooth hypersurface X of multidegree (2, ..., 2) in (P^1)^(n + 1) has
    n + 1 projections forgetting one factor; each is a double cover whose
    covering involution acts on the Neron-Severi lattice as a reflection.
    """
    return [{"generator": str(k + 1), "reflection": f"s{k + 1}", "involution": f"iota_{k + 1}",
             "projection": f"pi_{k + 1}: X -> (P^1)^{n} forgetting factor {k + 1}"}
            for k in range(n + 1)]
